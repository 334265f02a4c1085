// Run drivers: configuration, the single-run time loop with diagnostics,
// convergence sweeps over doubling resolutions, and output emission.
#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "pnp/csv.hpp"
#include "pnp/diagnostics.hpp"
#include "pnp/expression.hpp"
#include "pnp/problems.hpp"

namespace pnp {

struct DtRule {
  bool scaled = false;  // when true, tau = coeff * h^power with h the axis spacing
  double value = 1e-3;
  double coeff = 0.01;
  double power = 3.0;

  double nominal(double h) const { return scaled ? coeff * std::pow(h, power) : value; }
};

struct RunConfig {
  ProblemSpec problem;
  Method method = Method::ddg;
  int k = 1;
  double beta0 = 4.0;
  double beta1 = 0.0;
  bool beta1_auto = true;  // 1/(2k(k+1)) unless set explicitly
  std::array<int, 2> cells{8, 8};
  int time_order = 1;
  DtRule dt;
  double t_end = -1;  // <0: use the problem default
  bool limiter = false;
  double newton_tol = 1e-12;
  int newton_max = 50;
  double ftb_factor = 0.95;
  int polish_iters = 1;
  double init_clip = 1e-12;
  double mobility_floor = 1e-12;
  int diag_every = 1;
  double checkpoint_time = -1;  // >=0: snapshot the first state at or past this time
  std::uint64_t seed = 12345;
  std::string out_dir;
  bool dump_matrix = false;

  double beta1_effective() const {
    return beta1_auto ? 1.0 / (2.0 * k * (k + 1.0)) : beta1;
  }
};

struct ErrorEntry {
  std::string variable;
  std::string norm;
  double value;
};

struct RunResult {
  double tau = 0;
  long steps = 0;
  std::vector<DiagnosticsRecord> records;
  std::vector<ErrorEntry> errors;
  std::string log;
  double gamma = 0;
  bool stable = true;
  double max_energy_rise = 0;                  // max over steps of E_new - E_old (lumped)
  double max_dissipation_residual = -1e300;    // max of E_new - E_old + tau * dissipation
  double max_mass_drift_rel = 0;               // vs the initial masses
  std::vector<double> min_node_over_steps;     // per species, post-step states only
  std::vector<double> min_cellavg_over_steps;  // per species
  SystemState final_state;
  std::optional<SystemState> checkpoint_state;
  bool failed = false;
  std::string failure;
  StepReport fail_report;
};

inline double find_error(const RunResult& r, const std::string& variable, const std::string& norm) {
  for (const ErrorEntry& e : r.errors)
    if (e.variable == variable && e.norm == norm) return e.value;
  return std::numeric_limits<double>::quiet_NaN();
}

namespace detail {

inline SpaceFn at_time(const SpaceTimeFn& f, double t) {
  return [f, t](const std::array<double, 2>& x) { return f(t, x); };
}

inline const SpaceTimeFn zero_st = [](double, const std::array<double, 2>&) { return 0.0; };

}  // namespace detail

inline RunResult run_single(const RunConfig& cfg) {
  RunResult out;
  std::ostringstream log;
  const ProblemSpec& prob = cfg.problem;
  const int dim = prob.domain.dim;
  const int ns = static_cast<int>(prob.species.size());

  Mesh mesh = build_mesh(prob.domain, {cfg.cells[0], dim == 2 ? cfg.cells[1] : 1});
  NodalBasis basis(cfg.k);
  DofLayout layout =
      make_layout(mesh, cfg.k, cfg.method == Method::fem ? Continuity::continuous
                                                         : Continuity::cell_local);

  SchemeConfig scheme;
  scheme.time_order = cfg.time_order;
  scheme.method = cfg.method;
  scheme.beta0 = cfg.beta0;
  scheme.beta1 = cfg.beta1_effective();
  scheme.phi_bc = prob.phi_bc;
  scheme.epsilon = prob.epsilon;
  scheme.newton_tol = cfg.newton_tol;
  scheme.newton_max = cfg.newton_max;
  scheme.ftb_factor = cfg.ftb_factor;
  scheme.polish_iters = cfg.polish_iters;
  scheme.limiter = cfg.limiter;
  scheme.mobility_floor = cfg.mobility_floor;

  const double t_end = cfg.t_end >= 0 ? cfg.t_end : prob.default_t_end;
  const double h_rule = std::max(mesh.dx[0], dim == 2 ? mesh.dx[1] : 0.0);
  const double tau_nominal = cfg.dt.nominal(h_rule);
  const long nsteps = std::max<long>(1, static_cast<long>(std::ceil(t_end / tau_nominal - 1e-9)));
  scheme.tau = t_end / static_cast<double>(nsteps);
  out.tau = scheme.tau;
  out.steps = nsteps;

  std::vector<SpeciesSpec> specs(ns);
  Sources sources;
  bool any_source = false;
  for (int i = 0; i < ns; ++i) {
    specs[i].valence = prob.species[i].valence;
    specs[i].diffusion = prob.species[i].diffusion;
    specs[i].initial = prob.species[i].initial;
    sources.species.push_back(prob.species[i].source);
    if (prob.species[i].source) any_source = true;
  }
  sources.poisson = prob.phi_source;
  if (prob.phi_source) any_source = true;
  const Sources* src = any_source ? &sources : nullptr;

  Stepper stepper(mesh, basis, layout, specs, scheme);

  // run header
  log << "problem=" << prob.id << " method=" << (cfg.method == Method::fem ? "fem" : "ddg")
      << " k=" << cfg.k << " cells=" << cfg.cells[0];
  if (dim == 2) log << "x" << cfg.cells[1];
  out.gamma = gamma_of_beta1(cfg.k, scheme.beta1);
  log << "\nbeta0=" << cfg.beta0 << " beta1=" << scheme.beta1 << " gamma(beta1)=" << out.gamma;
  out.stable = cfg.beta0 >= out.gamma;  // unit mobility-bound verdict
  log << " stability(beta0>=gamma,unit bounds)=" << (out.stable ? "ok" : "violated");
  if (scheme.beta1 == 0.0)
    log << "\ninterface form: symmetric (beta1=0 hypotheses hold)";
  else if (std::abs(scheme.beta1 - 1.0 / (2.0 * cfg.k * (cfg.k + 1.0))) < 1e-14)
    log << "\ninterface form: order-dependent sharp choice beta1=1/(2k(k+1))";
  else
    log << "\ninterface form: custom beta1";
  log << "\ntau=" << format_double(scheme.tau) << " (rule "
      << (cfg.dt.scaled ? "coeff*h^power, h=max axis spacing" : "absolute") << ") steps=" << nsteps
      << " t_end=" << format_double(t_end);
  log << "\ntime_order=" << cfg.time_order << " limiter=" << (cfg.limiter ? "on" : "off")
      << " epsilon=" << prob.epsilon << " seed=" << cfg.seed;
  log << "\ngradient-metric conventions: cell count normalizes the averaged metric; "
         "per-cell tensor grid of k Gauss points per axis for the pointwise metric\n";

  if (prob.has_exact) {
    const double resid = manufactured_identity_residual(prob, static_cast<unsigned>(cfg.seed));
    log << "manufactured identity residual (20 samples): " << format_double(resid) << "\n";
    if (resid > 1e-8)
      throw std::runtime_error("problem '" + prob.id + "': stated sources do not balance the exact solution");
  }

  // initial data: collocation interpolants, clipped to the positivity floor
  SystemState state;
  state.c.resize(ns);
  state.p.resize(ns);
  state.t = 0;
  int clipped = 0;
  for (int i = 0; i < ns; ++i) {
    state.c[i] = interpolate(mesh, basis, layout, specs[i].initial);
    for (int g = 0; g < layout.total; ++g) {
      if (state.c[i].values[g] < -1e-12)
        throw std::runtime_error("initial concentration is negative at a collocation point");
      if (state.c[i].values[g] < cfg.init_clip) {
        state.c[i].values[g] = cfg.init_clip;
        ++clipped;
      }
    }
  }
  if (clipped > 0)
    log << "initial nodal values clipped to " << format_double(cfg.init_clip) << " at " << clipped
        << " collocation points\n";
  state.phi = stepper.solve_potential(state.c, src, 0.0);
  for (int i = 0; i < ns; ++i) {
    state.p[i] = Field(layout);
    state.p[i].values = specs[i].valence * state.phi.values +
                        state.c[i].values.array().log().matrix() +
                        Eigen::VectorXd::Ones(layout.total);
  }

  // energy operators: the potential quadratic form without strong-row
  // replacement (the natural assembly for the continuous method, the
  // weak-boundary bilinear form for the discontinuous one)
  AssembledForm energy_form;
  if (cfg.method == Method::fem) {
    FormConfig natural;
    natural.method = Method::fem;
    energy_form = assemble_form(mesh, basis, layout, Mobility(prob.epsilon * prob.epsilon), natural);
  } else {
    energy_form = stepper.poisson_form();
  }
  FormConfig exact_cfg = stepper.poisson_config();
  AssembledForm energy_form_exact =
      assemble_exact_form(mesh, basis, layout, Mobility(prob.epsilon * prob.epsilon),
                          cfg.method == Method::fem ? FormConfig{Method::fem} : exact_cfg);

  const Eigen::VectorXd& lumped = stepper.lumped();
  auto lumped_masses = [&](const SystemState& s) {
    std::vector<double> m(ns);
    for (int i = 0; i < ns; ++i) m[i] = lumped.dot(s.c[i].values);
    return m;
  };
  auto make_record = [&](const SystemState& s, const StepReport* rep) {
    DiagnosticsRecord rec;
    rec.t = s.t;
    rec.mass = lumped_masses(s);
    rec.energy_lumped = discrete_energy(mesh, basis, s, energy_form, lumped, prob.epsilon);
    rec.energy_exact = discrete_energy_exact(mesh, basis, s, energy_form_exact);
    PositivityReport pos = positivity_report(mesh, basis, s);
    rec.min_cell_avg = pos.min_cell_avg;
    rec.min_node = pos.min_node;
    if (rep) {
      rec.newton_iters = rep->newton_iters;
      rec.dissipation = rep->dissipation;
      for (char h : rep->limiter_hit) rec.limiter_hits += h;
    }
    return rec;
  };

  out.records.push_back(make_record(state, nullptr));
  const std::vector<double> mass0 = lumped_masses(state);
  double energy_prev = out.records.front().energy_lumped;
  out.min_node_over_steps.assign(ns, std::numeric_limits<double>::infinity());
  out.min_cellavg_over_steps.assign(ns, std::numeric_limits<double>::infinity());

  std::optional<SystemState> prev;
  long total_newton = 0;
  for (long m = 0; m < nsteps; ++m) {
    std::pair<SystemState, StepReport> res;
    try {
      res = stepper.step(state, prev ? &*prev : nullptr, src);
    } catch (const SolverFailure& f) {
      out.failed = true;
      out.failure = f.what();
      out.fail_report = f.report;
      log << "step " << m + 1 << " failed: " << f.what() << "\n";
      if (f.report.recommended_tau > 0)
        log << "recommended time step: " << format_double(f.report.recommended_tau) << "\n";
      break;
    }
    SystemState next = std::move(res.first);
    const StepReport& rep = res.second;
    total_newton += rep.newton_iters;

    // cheap per-step trackers (independent of the record stride)
    const std::vector<double> mass_now = lumped_masses(next);
    for (int i = 0; i < ns; ++i) {
      const double ref = std::max(std::abs(mass0[i]), 1e-30);
      out.max_mass_drift_rel = std::max(out.max_mass_drift_rel, std::abs(mass_now[i] - mass0[i]) / ref);
    }
    const double energy_now = discrete_energy(mesh, basis, next, energy_form, lumped, prob.epsilon);
    out.max_energy_rise = std::max(out.max_energy_rise, energy_now - energy_prev);
    out.max_dissipation_residual = std::max(
        out.max_dissipation_residual, energy_now - energy_prev + scheme.tau * rep.dissipation);
    energy_prev = energy_now;
    PositivityReport pos = positivity_report(mesh, basis, next);
    for (int i = 0; i < ns; ++i) {
      out.min_node_over_steps[i] = std::min(out.min_node_over_steps[i], pos.min_node[i]);
      out.min_cellavg_over_steps[i] = std::min(out.min_cellavg_over_steps[i], pos.min_cell_avg[i]);
    }
    if (rep.mobility_floored) log << "step " << m + 1 << ": extrapolated mobility floored\n";

    prev = std::move(state);
    state = std::move(next);
    if (cfg.checkpoint_time >= 0 && !out.checkpoint_state &&
        state.t >= cfg.checkpoint_time - 0.5 * scheme.tau)
      out.checkpoint_state = state;
    if ((m + 1) % cfg.diag_every == 0 || m + 1 == nsteps)
      out.records.push_back(make_record(state, &rep));
  }
  log << "newton iterations total=" << total_newton << "\n";

  if (!out.failed && prob.has_exact) {
    const double tf = state.t;
    auto add = [&](const std::string& var, const std::string& norm, double v) {
      out.errors.push_back({var, norm, v});
    };
    for (int i = 0; i < ns; ++i) {
      const std::string ci = "c" + std::to_string(i + 1);
      add(ci, "l2", error_l2(mesh, basis, state.c[i], detail::at_time(prob.species[i].exact, tf)));
      add("p" + std::to_string(i + 1), "l2",
          error_l2(mesh, basis, state.p[i], detail::at_time(prob.exact_p(i), tf)));
      add(ci, "eproj",
          error_energy_projection(mesh, basis, state.c[i],
                                  detail::at_time(prob.species[i].exact, tf)));
      if (prob.species[i].exact_dx) {
        SpaceFn gx = detail::at_time(prob.species[i].exact_dx, tf);
        SpaceFn gy = detail::at_time(
            prob.species[i].exact_dy ? prob.species[i].exact_dy : detail::zero_st, tf);
        add(ci, "eA", metric_eA(mesh, basis, state.c[i], gx, gy));
        add(ci, "eG", metric_eG(mesh, basis, state.c[i], gx, gy));
      }
    }
    add("phi", "l2", error_l2(mesh, basis, state.phi, detail::at_time(prob.phi_exact, tf)));
    add("phi", "eproj",
        error_energy_projection(mesh, basis, state.phi, detail::at_time(prob.phi_exact, tf)));
    if (prob.phi_exact_dx) {
      SpaceFn gx = detail::at_time(prob.phi_exact_dx, tf);
      SpaceFn gy = detail::at_time(prob.phi_exact_dy ? prob.phi_exact_dy : detail::zero_st, tf);
      add("phi", "eA", metric_eA(mesh, basis, state.phi, gx, gy));
      add("phi", "eG", metric_eG(mesh, basis, state.phi, gx, gy));
    }
  }

  out.final_state = std::move(state);
  out.log = log.str();
  return out;
}

// ---------------------------------------------------------------------------
// sweeps

struct SweepResult {
  std::vector<int> resolutions;
  std::vector<RunResult> runs;
  ConvergenceTable table;
  bool any_failed = false;
};

inline SweepResult run_sweep(const RunConfig& base, const std::vector<int>& resolutions) {
  for (std::size_t i = 1; i < resolutions.size(); ++i)
    if (resolutions[i] != 2 * resolutions[i - 1])
      throw std::invalid_argument("sweep: resolutions must double");
  SweepResult sweep;
  sweep.resolutions = resolutions;
  std::vector<std::string> metrics;
  std::vector<std::vector<double>> rows;
  for (int N : resolutions) {
    RunConfig cfg = base;
    cfg.cells = {N, N};
    RunResult r = run_single(cfg);
    if (r.failed) sweep.any_failed = true;
    if (metrics.empty())
      for (const ErrorEntry& e : r.errors) metrics.push_back(e.variable + ":" + e.norm);
    std::vector<double> row(metrics.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t m = 0; m < metrics.size(); ++m) {
      auto pos = metrics[m].find(':');
      row[m] = find_error(r, metrics[m].substr(0, pos), metrics[m].substr(pos + 1));
    }
    rows.push_back(std::move(row));
    sweep.runs.push_back(std::move(r));
  }
  sweep.table = rate_table(resolutions, metrics, rows);
  return sweep;
}

// ---------------------------------------------------------------------------
// output emission

inline void write_run_outputs(const RunResult& r, const std::string& dir, int n_species,
                              bool dump_matrix = false, const Eigen::SparseMatrix<double>* mat = nullptr) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream f(dir + "/diagnostics.csv");
    CsvWriter w(f);
    w.cell(std::string("t"));
    for (int i = 1; i <= n_species; ++i) w.cell("mass_" + std::to_string(i));
    w.cell(std::string("energy_lumped")).cell(std::string("energy_exact"));
    for (int i = 1; i <= n_species; ++i) w.cell("min_cellavg_" + std::to_string(i));
    for (int i = 1; i <= n_species; ++i) w.cell("min_node_" + std::to_string(i));
    w.cell(std::string("newton_iters")).cell(std::string("limiter_hits"));
    w.endrow();
    for (const DiagnosticsRecord& rec : r.records) {
      w.cell(rec.t);
      for (double m : rec.mass) w.cell(m);
      w.cell(rec.energy_lumped).cell(rec.energy_exact);
      for (double v : rec.min_cell_avg) w.cell(v);
      for (double v : rec.min_node) w.cell(v);
      w.cell(rec.newton_iters).cell(rec.limiter_hits);
      w.endrow();
    }
  }
  {
    std::ofstream f(dir + "/errors.csv");
    CsvWriter w(f);
    w.cell(std::string("variable")).cell(std::string("norm")).cell(std::string("value"));
    w.endrow();
    for (const ErrorEntry& e : r.errors) {
      w.cell(e.variable).cell(e.norm).cell(e.value);
      w.endrow();
    }
  }
  {
    std::ofstream f(dir + "/run_log.txt");
    f << r.log;
    if (r.failed) f << "RUN FAILED: " << r.failure << "\n";
  }
  if (dump_matrix && mat) {
    std::ofstream f(dir + "/operator.mtx.txt");
    write_matrix_coordinate(f, *mat);
  }
}

inline void write_sweep_csv(const SweepResult& s, const std::string& path) {
  std::ofstream f(path);
  CsvWriter w(f);
  w.cell(std::string("N"));
  for (const std::string& m : s.table.metrics) w.cell(m);
  for (const std::string& m : s.table.metrics) w.cell("R_" + m);
  w.endrow();
  for (std::size_t r = 0; r < s.table.errors.size(); ++r) {
    w.cell(s.table.resolutions[r]);
    for (double e : s.table.errors[r]) w.cell(e);
    for (double o : s.table.orders[r]) {
      if (std::isnan(o))
        w.cell(std::string(""));
      else
        w.cell(o);
    }
    w.endrow();
  }
}

}  // namespace pnp
