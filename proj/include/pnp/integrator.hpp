// Semi-implicit time stepping for the coupled drift-diffusion / potential
// system written in chemical-potential form.
//
// Each step freezes the mobility at (extrapolated) old concentrations and
// solves the remaining nonlinear system by Newton iteration. The chemical
// potential is eliminated nodally (p = q phi + log c + 1 at collocation
// points), so the unknowns per step are the concentrations and the
// potential. A fraction-to-boundary rule keeps every nodal concentration
// strictly positive along the iteration.
#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "pnp/forms.hpp"

namespace pnp {

using SpaceTimeFn = std::function<double(double, const std::array<double, 2>&)>;

struct SpeciesSpec {
  double valence = 1.0;
  double diffusion = 1.0;
  SpaceFn initial;
};

struct SystemState {
  std::vector<Field> c;  // concentrations
  std::vector<Field> p;  // chemical potentials, nodally q*phi + log c + 1
  Field phi;
  double t = 0;
  long step = 0;
};

struct SchemeConfig {
  int time_order = 1;
  double tau = 1e-3;
  Method method = Method::ddg;
  double beta0 = 4.0;
  double beta1 = 0.0;
  VariableBc phi_bc;  // concentration boundaries are zero-flux or periodic
  double epsilon = 1.0;
  double newton_tol = 1e-12;
  int newton_max = 50;
  double ftb_factor = 0.95;
  int polish_iters = 1;
  bool limiter = false;
  double mobility_floor = 1e-12;  // second-order extrapolation guard
};

struct StepReport {
  int newton_iters = 0;
  double residual = 0;
  double alpha_min = 1.0;
  std::vector<double> min_c;
  std::vector<char> limiter_hit;
  bool mobility_floored = false;
  double dissipation = 0;  // sum_i a_{psi_i}(p_i, p_i) of the accepted step
  std::vector<double> residual_history;
  bool converged = true;
  double recommended_tau = 0;
};

struct SolverFailure : std::runtime_error {
  StepReport report;
  SolverFailure(const std::string& what, StepReport r)
      : std::runtime_error(what), report(std::move(r)) {}
};

struct Sources {
  std::vector<SpaceTimeFn> species;  // empty or one per species
  SpaceTimeFn poisson;
};

// Largest step fraction keeping c + alpha*dc componentwise positive, damped
// by the interior factor.
inline double fraction_to_boundary(const Eigen::VectorXd& c, const Eigen::VectorXd& dc,
                                   double factor) {
  double alpha_max = std::numeric_limits<double>::infinity();
  for (int i = 0; i < c.size(); ++i)
    if (dc[i] < 0.0) alpha_max = std::min(alpha_max, -c[i] / dc[i]);
  if (!std::isfinite(alpha_max)) return 1.0;
  return std::min(1.0, factor * alpha_max);
}

struct NewtonOptions {
  double tol = 1e-12;
  int max_iters = 50;
  double ftb_factor = 0.95;
  int polish_iters = 1;
};

struct NewtonProblem {
  int size = 0;
  std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)> residual;
  std::function<void(const Eigen::VectorXd&, std::vector<Eigen::Triplet<double>>&)> jacobian;
  // index ranges [begin, end) that must stay strictly positive
  std::vector<std::pair<int, int>> positive_ranges;
};

struct NewtonResult {
  Eigen::VectorXd x;
  int iters = 0;
  double residual = 0;
  double alpha_min = 1.0;
  std::vector<double> history;
  bool converged = false;
  bool alpha_underflow = false;
};

struct NewtonWorkspace {
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  bool analyzed = false;
};

inline double newton_step_alpha(const NewtonProblem& prob, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& dx, double factor) {
  double alpha = 1.0;
  for (auto [b, e] : prob.positive_ranges)
    alpha = std::min(alpha, fraction_to_boundary(x.segment(b, e - b), dx.segment(b, e - b), factor));
  return alpha;
}

inline NewtonResult newton_solve(const NewtonProblem& prob, const Eigen::VectorXd& x0,
                                 const NewtonOptions& opts, NewtonWorkspace* ws = nullptr) {
  NewtonResult res;
  res.x = x0;
  Eigen::VectorXd r(prob.size), dx(prob.size);
  prob.residual(res.x, r);
  res.residual = r.lpNorm<Eigen::Infinity>();
  res.history.push_back(res.residual);
  if (res.residual <= opts.tol) {  // nothing to do
    res.converged = true;
    return res;
  }
  NewtonWorkspace local;
  NewtonWorkspace& w = ws ? *ws : local;
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::SparseMatrix<double> J(prob.size, prob.size);
  auto take_step = [&]() -> bool {
    trip.clear();
    prob.jacobian(res.x, trip);
    J.setFromTriplets(trip.begin(), trip.end());
    if (!w.analyzed) {
      w.lu.analyzePattern(J);
      w.analyzed = true;
    }
    w.lu.factorize(J);
    if (w.lu.info() != Eigen::Success) return false;
    dx = w.lu.solve(-r);
    if (w.lu.info() != Eigen::Success) return false;
    const double alpha = newton_step_alpha(prob, res.x, dx, opts.ftb_factor);
    res.alpha_min = std::min(res.alpha_min, alpha);
    if (alpha < 1e-12) {
      res.alpha_underflow = true;
      return false;
    }
    res.x += alpha * dx;
    prob.residual(res.x, r);
    res.residual = r.lpNorm<Eigen::Infinity>();
    res.history.push_back(res.residual);
    ++res.iters;
    return true;
  };
  while (res.iters < opts.max_iters) {
    if (!take_step()) return res;
    if (res.residual <= opts.tol) {
      res.converged = true;
      break;
    }
  }
  if (!res.converged) return res;
  // a few extra iterations drive the residual toward the rounding floor,
  // which keeps conserved functionals of long runs tight
  for (int p = 0; p < opts.polish_iters; ++p) {
    Eigen::VectorXd x_keep = res.x;
    double r_keep = res.residual;
    if (!take_step() || res.residual >= r_keep) {
      res.x = x_keep;
      res.residual = r_keep;
      prob.residual(res.x, r);
      break;
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// scaling limiter: pull cell polynomials toward their (positive) average
// until the cell minimum is nonnegative; averages are preserved exactly.

namespace detail {

// roots of the derivative of the 1D polynomial with the given Legendre
// coefficients, inside [-1,1]; closed forms cover orders up to 3
inline void critical_points_1d(const std::vector<double>& alpha, int k,
                               std::vector<double>& out) {
  if (k < 2 || k > 3) return;
  const double a3 = k >= 3 ? alpha[3] : 0.0;
  const double C = 7.5 * a3;
  const double B = 3.0 * alpha[2];
  const double A = alpha[1] - 1.5 * a3;
  auto push = [&out](double x) {
    if (std::abs(x) <= 1.0) out.push_back(x);
  };
  if (std::abs(C) < 1e-300) {
    if (std::abs(B) > 1e-300) push(-A / B);
    return;
  }
  const double disc = B * B - 4.0 * C * A;
  if (disc < 0) return;
  const double s = std::sqrt(disc);
  push((-B + s) / (2 * C));
  push((-B - s) / (2 * C));
}

inline double eval_legendre_series(const std::vector<double>& alpha, double x) {
  double pm1 = 1.0, p = x, acc = alpha[0];
  if (alpha.size() > 1) acc += alpha[1] * x;
  for (std::size_t m = 1; m + 1 < alpha.size(); ++m) {
    double pp = ((2 * m + 1) * x * p - m * pm1) / (m + 1);
    acc += alpha[m + 1] * pp;
    pm1 = p;
    p = pp;
  }
  return acc;
}

// lower-bound estimate of the cell minimum: dense sampling plus the critical
// points of the sampled 1D restrictions
inline double cell_minimum(const NodalBasis& basis, int dim, const Eigen::VectorXd& local) {
  const int k = basis.order();
  const int n = k + 1;
  const int S = 4 * n;
  std::vector<double> samples(S);
  for (int s = 0; s < S; ++s) samples[s] = -1.0 + 2.0 * s / (S - 1);
  double lo = std::numeric_limits<double>::infinity();
  if (dim == 1) {
    std::vector<double> alpha(n);
    basis.legendre_coeffs(local.data(), alpha.data());
    std::vector<double> cand = samples;
    critical_points_1d(alpha, k, cand);
    for (double x : cand) lo = std::min(lo, eval_legendre_series(alpha, x));
    return lo;
  }
  std::vector<double> vline(n), alpha(n), lv(n);
  // restrictions along x at sampled y (and transposed)
  for (int dir = 0; dir < 2; ++dir) {
    for (int s = 0; s < S; ++s) {
      basis.eval_1d(samples[s], lv.data());
      for (int i = 0; i < n; ++i) {
        double v = 0;
        for (int j = 0; j < n; ++j) {
          const int loc = dir == 0 ? j * n + i : i * n + j;
          v += lv[j] * local[loc];
        }
        vline[i] = v;
      }
      basis.legendre_coeffs(vline.data(), alpha.data());
      std::vector<double> cand = samples;
      critical_points_1d(alpha, k, cand);
      for (double x : cand) lo = std::min(lo, eval_legendre_series(alpha, x));
    }
  }
  return lo;
}

}  // namespace detail

struct LimiterResult {
  Field field;
  std::vector<char> limited;  // per cell
  int cells_limited = 0;
};

inline LimiterResult apply_limiter(const Mesh& mesh, const NodalBasis& basis, const Field& c) {
  const DofLayout& layout = *c.layout;
  if (layout.mode != Continuity::cell_local)
    throw std::invalid_argument("apply_limiter: requires the cell-local layout");
  LimiterResult res;
  res.field = c;
  res.limited.assign(mesh.cells.size(), 0);
  Eigen::VectorXd local(layout.per_cell);
  for (int cell = 0; cell < static_cast<int>(mesh.cells.size()); ++cell) {
    gather_cell(c, cell, local);
    double avg = 0;
    for (int loc = 0; loc < layout.per_cell; ++loc)
      avg += node_weight(mesh, basis, cell, loc) * local[loc];
    avg /= mesh.cells[cell].measure;
    if (!(avg > 0.0)) throw std::runtime_error("apply_limiter: nonpositive cell average");
    const double lo = detail::cell_minimum(basis, mesh.dim(), local);
    if (lo >= 0.0) continue;  // cell untouched
    const double theta = std::min(1.0, avg / (avg - lo));
    for (int loc = 0; loc < layout.per_cell; ++loc) {
      const int g = layout.global_index(cell, loc);
      res.field.values[g] = avg + theta * (local[loc] - avg);
    }
    res.limited[cell] = 1;
    ++res.cells_limited;
  }
  return res;
}

// ---------------------------------------------------------------------------
// the coupled step

class Stepper {
 public:
  Stepper(const Mesh& mesh, const NodalBasis& basis, const DofLayout& layout,
          std::vector<SpeciesSpec> specs, SchemeConfig cfg)
      : mesh_(mesh), basis_(basis), layout_(layout), specs_(std::move(specs)), cfg_(std::move(cfg)) {
    detail::check_layout_method(layout_, cfg_.method);
    lumped_ = lumped_mass(mesh_, basis_, layout_);
    volume_ = mesh_.volume();
    FormConfig pcfg = poisson_config();
    phi_form_ = assemble_form(mesh_, basis_, layout_, Mobility(cfg_.epsilon * cfg_.epsilon), pcfg,
                              /*warn_unstable=*/true);
    strong_mask_.assign(layout_.total, 0);
    strong_value_.assign(layout_.total, 0.0);
    for (std::size_t i = 0; i < phi_form_.strong_rows.size(); ++i) {
      strong_mask_[phi_form_.strong_rows[i]] = 1;
      strong_value_[phi_form_.strong_rows[i]] = phi_form_.strong_values[static_cast<int>(i)];
    }
  }

  FormConfig transport_config() const {
    FormConfig t;
    t.method = cfg_.method;
    t.beta0 = cfg_.beta0;
    t.beta1 = cfg_.beta1;
    // zero-flux everywhere: the species flux c grad(p) carries no boundary term
    return t;
  }

  FormConfig poisson_config() const {
    FormConfig p;
    p.method = cfg_.method;
    p.beta0 = cfg_.beta0;
    p.beta1 = cfg_.beta1;
    p.bc = cfg_.phi_bc;
    return p;
  }

  const AssembledForm& poisson_form() const { return phi_form_; }
  const Eigen::VectorXd& lumped() const { return lumped_; }
  const SchemeConfig& config() const { return cfg_; }
  const std::vector<SpeciesSpec>& species() const { return specs_; }

  // Potential consistent with the given concentrations (used at start-up).
  Field solve_potential(const std::vector<Field>& c, const Sources* sources, double t) const {
    std::vector<const Field*> cp;
    std::vector<double> q;
    for (std::size_t i = 0; i < specs_.size(); ++i) {
      cp.push_back(&c[i]);
      q.push_back(specs_[i].valence);
    }
    SpaceFn src;
    if (sources && sources->poisson) {
      const SpaceTimeFn& f = sources->poisson;
      src = [&f, t](const std::array<double, 2>& x) { return f(t, x); };
    }
    return poisson_solve(mesh_, basis_, layout_, cp, q, src ? &src : nullptr, poisson_config(),
                         cfg_.epsilon);
  }

  // One step of the configured order. order 2 requires prev (the state one
  // level before `state`); the caller bootstraps with a first-order step.
  std::pair<SystemState, StepReport> step(const SystemState& state, const SystemState* prev,
                                          const Sources* sources) {
    const int ns = static_cast<int>(specs_.size());
    const int N = layout_.total;
    const double tau = cfg_.tau;
    const double t_new = state.t + tau;
    const bool second = cfg_.time_order == 2 && prev != nullptr;
    StepReport report;
    report.limiter_hit.assign(ns, 0);
    for (int i = 0; i < ns; ++i)
      if (state.c[i].values.minCoeff() <= 0.0) {
        report.converged = false;
        throw SolverFailure("step: initial concentrations must be positive at every node", report);
      }

    // frozen mobilities and their forms
    std::vector<AssembledForm> forms(ns);
    std::vector<Field> mobility(ns);
    const double coef_new = second ? 1.5 : 1.0;
    for (int i = 0; i < ns; ++i) {
      mobility[i] = Field(layout_);
      if (second)
        mobility[i].values = 2.0 * state.c[i].values - prev->c[i].values;
      else
        mobility[i].values = state.c[i].values;
      mobility[i].values *= specs_[i].diffusion;
      if (second) {
        for (int r = 0; r < N; ++r)
          if (mobility[i].values[r] < cfg_.mobility_floor) {
            mobility[i].values[r] = cfg_.mobility_floor;
            report.mobility_floored = true;
          }
      }
      forms[i] = assemble_form(mesh_, basis_, layout_, mobility[i], transport_config());
    }

    // history and source terms
    std::vector<Eigen::VectorXd> hist(ns), src(ns);
    for (int i = 0; i < ns; ++i) {
      if (second)
        hist[i] = -2.0 * state.c[i].values + 0.5 * prev->c[i].values;
      else
        hist[i] = -state.c[i].values;
      if (sources && i < static_cast<int>(sources->species.size()) && sources->species[i]) {
        const SpaceTimeFn& f = sources->species[i];
        src[i] = lumped_load(mesh_, basis_, layout_,
                             [&f, t_new](const std::array<double, 2>& x) { return f(t_new, x); });
      } else {
        src[i] = Eigen::VectorXd::Zero(N);
      }
    }
    Eigen::VectorXd src_phi = Eigen::VectorXd::Zero(N);
    if (sources && sources->poisson) {
      const SpaceTimeFn& f = sources->poisson;
      src_phi = lumped_load(mesh_, basis_, layout_,
                            [&f, t_new](const std::array<double, 2>& x) { return f(t_new, x); });
    }

    const bool mean_constrained = phi_form_.needs_mean_constraint;
    const int total = ns * N + N + (mean_constrained ? 1 : 0);

    NewtonProblem prob;
    prob.size = total;
    for (int i = 0; i < ns; ++i) prob.positive_ranges.emplace_back(i * N, (i + 1) * N);

    prob.residual = [&, ns, N, tau, coef_new](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
      r.resize(total);
      const auto phi = x.segment(ns * N, N);
      for (int i = 0; i < ns; ++i) {
        const auto ci = x.segment(i * N, N);
        Eigen::VectorXd pi =
            specs_[i].valence * phi + ci.array().log().matrix() + Eigen::VectorXd::Ones(N);
        Eigen::VectorXd flux = forms[i].matrix * pi - src[i];
        r.segment(i * N, N) = coef_new * ci + hist[i] +
                              tau * (flux.array() / lumped_.array()).matrix();
      }
      Eigen::VectorXd rphi = phi_form_.matrix * phi - src_phi - phi_form_.rhs_lift;
      rphi = (rphi.array() / lumped_.array()).matrix();
      for (int i = 0; i < ns; ++i) rphi -= specs_[i].valence * x.segment(i * N, N);
      if (mean_constrained) rphi.array() += x[ns * N + N];
      for (int g = 0; g < N; ++g)
        if (strong_mask_[g]) rphi[g] = phi[g] - strong_value_[g];
      r.segment(ns * N, N) = rphi;
      if (mean_constrained) r[ns * N + N] = lumped_.dot(phi) / volume_;
    };

    prob.jacobian = [&, ns, N, tau, coef_new](const Eigen::VectorXd& x,
                                              std::vector<Eigen::Triplet<double>>& trip) {
      for (int i = 0; i < ns; ++i) {
        const auto ci = x.segment(i * N, N);
        const int row0 = i * N;
        for (int col = 0; col < forms[i].matrix.outerSize(); ++col)
          for (Eigen::SparseMatrix<double>::InnerIterator it(forms[i].matrix, col); it; ++it) {
            const int r = static_cast<int>(it.row());
            const double v = tau / lumped_[r] * it.value();
            trip.emplace_back(row0 + r, row0 + col, v / ci[col]);
            trip.emplace_back(row0 + r, ns * N + col, v * specs_[i].valence);
          }
        for (int r = 0; r < N; ++r) trip.emplace_back(row0 + r, row0 + r, coef_new);
      }
      const int prow = ns * N;
      for (int col = 0; col < phi_form_.matrix.outerSize(); ++col)
        for (Eigen::SparseMatrix<double>::InnerIterator it(phi_form_.matrix, col); it; ++it) {
          const int r = static_cast<int>(it.row());
          if (strong_mask_[r])
            trip.emplace_back(prow + r, prow + col, it.value());  // identity row
          else
            trip.emplace_back(prow + r, prow + col, it.value() / lumped_[r]);
        }
      for (int r = 0; r < N; ++r) {
        if (strong_mask_[r]) continue;
        for (int i = 0; i < ns; ++i)
          trip.emplace_back(prow + r, i * N + r, -specs_[i].valence);
        if (mean_constrained) trip.emplace_back(prow + r, prow + N, 1.0);
      }
      if (mean_constrained)
        for (int g = 0; g < N; ++g)
          trip.emplace_back(prow + N, prow + g, lumped_[g] / volume_);
    };

    Eigen::VectorXd x0(total);
    for (int i = 0; i < ns; ++i) x0.segment(i * N, N) = state.c[i].values;
    x0.segment(ns * N, N) = state.phi.values;
    if (mean_constrained) x0[ns * N + N] = 0;

    NewtonOptions nopts;
    nopts.tol = cfg_.newton_tol;
    nopts.max_iters = cfg_.newton_max;
    nopts.ftb_factor = cfg_.ftb_factor;
    nopts.polish_iters = cfg_.polish_iters;
    NewtonResult sol = newton_solve(prob, x0, nopts, &newton_ws_);
    report.newton_iters = sol.iters;
    report.residual = sol.residual;
    report.alpha_min = sol.alpha_min;
    report.residual_history = sol.history;
    if (!sol.converged) {
      report.converged = false;
      report.recommended_tau = 0.5 * tau;
      throw SolverFailure(sol.alpha_underflow
                              ? "step: positivity safeguard exhausted (step fraction underflow)"
                              : "step: Newton iteration did not converge",
                          report);
    }

    SystemState out;
    out.t = t_new;
    out.step = state.step + 1;
    out.c.resize(ns);
    out.p.resize(ns);
    out.phi = Field(layout_);
    out.phi.values = sol.x.segment(ns * N, N);
    for (int i = 0; i < ns; ++i) {
      out.c[i] = Field(layout_);
      out.c[i].values = sol.x.segment(i * N, N);
      if (cfg_.limiter) {
        LimiterResult lim = apply_limiter(mesh_, basis_, out.c[i]);
        if (lim.cells_limited > 0) {
          out.c[i] = std::move(lim.field);
          report.limiter_hit[i] = 1;
        }
      }
    }
    report.min_c.resize(ns);
    report.dissipation = 0;
    for (int i = 0; i < ns; ++i) {
      out.p[i] = Field(layout_);
      out.p[i].values = specs_[i].valence * out.phi.values +
                        out.c[i].values.array().log().matrix() +
                        Eigen::VectorXd::Ones(N);
      report.min_c[i] = out.c[i].values.minCoeff();
      report.dissipation += out.p[i].values.dot(forms[i].matrix * out.p[i].values);
    }
    return {std::move(out), std::move(report)};
  }

 private:
  const Mesh& mesh_;
  const NodalBasis& basis_;
  const DofLayout& layout_;
  std::vector<SpeciesSpec> specs_;
  SchemeConfig cfg_;
  Eigen::VectorXd lumped_;
  double volume_ = 0;
  AssembledForm phi_form_;
  std::vector<char> strong_mask_;
  std::vector<double> strong_value_;
  NewtonWorkspace newton_ws_;
};

inline std::pair<SystemState, StepReport> step_first_order(
    const Mesh& mesh, const NodalBasis& basis, const DofLayout& layout, const SystemState& state,
    const std::vector<SpeciesSpec>& specs, const SchemeConfig& cfg,
    const Sources* sources = nullptr) {
  SchemeConfig c = cfg;
  c.time_order = 1;
  Stepper stepper(mesh, basis, layout, specs, c);
  return stepper.step(state, nullptr, sources);
}

inline std::pair<SystemState, StepReport> step_second_order(
    const Mesh& mesh, const NodalBasis& basis, const DofLayout& layout, const SystemState& state,
    const SystemState& state_prev, const std::vector<SpeciesSpec>& specs, const SchemeConfig& cfg,
    const Sources* sources = nullptr) {
  SchemeConfig c = cfg;
  c.time_order = 2;
  Stepper stepper(mesh, basis, layout, specs, c);
  return stepper.step(state, &state_prev, sources);
}

}  // namespace pnp
