// Oracle-based property suites: quadrature moments, the sharp penalty
// constant against random maximization, dual-solve identities, limiter
// properties, coercivity sampling, step-fraction arithmetic, and the
// manufactured-solution balance of the bundled problems.
#pragma once

#include <random>
#include <sstream>

#include "pnp/csv.hpp"
#include "pnp/diagnostics.hpp"
#include "pnp/problems.hpp"

namespace pnp {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

namespace selfcheck {

inline double moment_error(const QuadRule& rule, int degree) {
  double worst = 0;
  for (int j = 0; j <= degree; ++j) {
    double turn = 0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i)
      turn += rule.weights[i] * std::pow(rule.nodes[i], j);
    const double exact = (j % 2 == 0) ? 2.0 / (j + 1) : 0.0;
    worst = std::max(worst, std::abs(turn - exact));
  }
  return worst;
}

inline CheckResult quadrature_moments() {
  double worst = 0;
  for (int n = 2; n <= 8; ++n) worst = std::max(worst, moment_error(gauss_lobatto_rule(n), 2 * n - 3));
  for (int n = 1; n <= 8; ++n) worst = std::max(worst, moment_error(gauss_rule(n), 2 * n - 1));
  CheckResult r{"quadrature moment exactness", worst <= 1e-13,
                "max moment error " + format_double(worst)};
  return r;
}

// random maximization of the rank-one quotient behind the penalty constant,
// with shrinking local refinement around the best draw
inline double gamma_sampled(int k, double beta1, std::mt19937_64& rng, int total_draws = 10000) {
  const int n = k;
  Eigen::MatrixXd M(n, n);
  Eigen::VectorXd b(n);
  for (int i = 0; i < n; ++i) {
    b[i] = 1.0 - 2.0 * beta1 * i;
    for (int j = 0; j < n; ++j) M(i, j) = ((i + j) % 2 == 0) ? 2.0 / (i + j + 1) : 0.0;
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto quotient = [&](const Eigen::VectorXd& x) {
    const double num = b.dot(x);
    const double den = x.dot(M * x);
    return den > 0 ? 2.0 * num * num / den : 0.0;
  };
  Eigen::VectorXd best = Eigen::VectorXd::Zero(n);
  double best_q = 0;
  const int global = total_draws / 2;
  Eigen::VectorXd x(n);
  for (int s = 0; s < global; ++s) {
    for (int i = 0; i < n; ++i) x[i] = gauss(rng);
    const double q = quotient(x);
    if (q > best_q) {
      best_q = q;
      best = x;
    }
  }
  int remaining = total_draws - global;
  double radius = 0.5;
  while (remaining > 0) {
    const int batch = std::min(remaining, 1000);
    for (int s = 0; s < batch; ++s) {
      for (int i = 0; i < n; ++i) x[i] = best[i] + radius * gauss(rng);
      const double q = quotient(x);
      if (q > best_q) {
        best_q = q;
        best = x;
      }
    }
    remaining -= batch;
    radius *= 0.4;
  }
  return best_q;
}

inline CheckResult gamma_against_sampling(std::uint64_t seed) {
  double worst = 0;
  std::ostringstream detail;
  for (int k = 1; k <= 3; ++k) {
    for (double beta1 : {0.0, 1.0 / (2.0 * k * (k + 1.0))}) {
      std::mt19937_64 rng(seed + 7 * k + static_cast<std::uint64_t>(beta1 * 1e6));
      const double closed = gamma_of_beta1(k, beta1);
      const double sampled = gamma_sampled(k, beta1, rng);
      const double rel = std::abs(closed - sampled) / closed;
      worst = std::max(worst, rel);
    }
  }
  detail << "max relative gap " << format_double(worst);
  return {"penalty constant: closed form vs sampled maximization", worst <= 1e-3, detail.str()};
}

struct DualSetup {
  Mesh mesh;
  NodalBasis basis;
  DofLayout layout;
  Field psi;
  FormConfig cfg;

  DualSetup(Method method, int k)
      : mesh(build_mesh(make_domain_1d(0, 1, true), {8, 1})),
        basis(k),
        layout(make_layout(mesh, k,
                           method == Method::fem ? Continuity::continuous : Continuity::cell_local)) {
    psi = interpolate(mesh, basis, layout,
                      [](const std::array<double, 2>& x) { return 1.0 + 0.5 * std::sin(2 * M_PI * x[0]); });
    cfg.method = method;
    cfg.beta0 = 6.0;
    cfg.beta1 = 0.0;
  }
};

inline CheckResult dual_solve_identities(std::uint64_t seed) {
  std::mt19937_64 rng(seed + 99);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double worst_resid = 0, worst_sym = 0, worst_fd = 0;
  for (Method method : {Method::ddg, Method::fem}) {
    DualSetup s(method, 2);
    Eigen::VectorXd m = lumped_mass(s.mesh, s.basis, s.layout);
    Eigen::SparseMatrix<double> Mx = assemble_exact_mass(s.mesh, s.basis, s.layout);
    AssembledForm form = assemble_form(s.mesh, s.basis, s.layout, s.psi, s.cfg);
    const double vol = s.mesh.volume();
    auto random_field = [&](bool mean_zero) {
      Field f(s.layout);
      for (int i = 0; i < s.layout.total; ++i) f.values[i] = gauss(rng);
      if (mean_zero) f.values.array() -= m.dot(f.values) / vol;
      return f;
    };
    Field f = random_field(false), g = random_field(true), v = random_field(true);
    Field Lf = solve_Lpsi(s.mesh, s.basis, s.layout, f, s.psi, s.cfg);
    // residual against every basis function
    Eigen::VectorXd exact_rhs = Mx * f.values;
    const double fbar = exact_rhs.sum() / vol;
    Eigen::VectorXd resid = form.matrix * Lf.values - (exact_rhs - fbar * m);
    worst_resid = std::max(worst_resid, resid.lpNorm<Eigen::Infinity>());
    // symmetry of the dual pairing
    Field Lg = solve_Lpsi(s.mesh, s.basis, s.layout, g, s.psi, s.cfg);
    const double s1 = (Mx * Lf.values).dot(g.values);
    const double s2 = (Mx * Lg.values).dot(f.values);
    worst_sym = std::max(worst_sym, std::abs(s1 - s2) /
                                        std::max({std::abs(s1), std::abs(s2), 1e-30}));
    // directional derivative of the squared dual norm (exactly quadratic in s)
    const double hs = 1e-4;
    auto norm_sq = [&](double step) {
      Field fs(s.layout);
      fs.values = f.values + step * v.values;
      return lpsi_norm_sq(s.mesh, s.basis, s.layout, fs, s.psi, s.cfg);
    };
    const double fd = (norm_sq(hs) - norm_sq(-hs)) / (2 * hs);
    const double direct = 2.0 * (Mx * Lf.values).dot(v.values);
    worst_fd = std::max(worst_fd, std::abs(fd - direct) /
                                      std::max(std::abs(direct), 1e-12));
  }
  std::ostringstream detail;
  detail << "residual " << format_double(worst_resid) << ", symmetry gap " << format_double(worst_sym)
         << ", derivative gap " << format_double(worst_fd);
  const bool pass = worst_resid <= 1e-11 && worst_sym <= 1e-11 && worst_fd <= 1e-6;
  return {"dual elliptic solve: residual, symmetry, derivative identity", pass, detail.str()};
}

inline CheckResult limiter_properties(std::uint64_t seed) {
  std::mt19937_64 rng(seed + 4242);
  std::uniform_real_distribution<double> uni(-0.4, 1.6);
  Mesh mesh = build_mesh(make_domain_2d({0, 0}, {1, 1}), {3, 3});
  double worst_mean = 0, worst_min = 0;
  for (int k = 1; k <= 3; ++k) {
    NodalBasis basis(k);
    DofLayout layout = make_layout(mesh, k, Continuity::cell_local);
    for (int trial = 0; trial < 20; ++trial) {
      Field c(layout);
      for (int cell = 0; cell < static_cast<int>(mesh.cells.size()); ++cell) {
        // random nodal values with a guaranteed-positive average
        double avg = 0;
        for (int loc = 0; loc < layout.per_cell; ++loc) {
          const double v = uni(rng);
          c.values[layout.global_index(cell, loc)] = v;
          avg += node_weight(mesh, basis, cell, loc) * v;
        }
        if (avg <= 0) {
          for (int loc = 0; loc < layout.per_cell; ++loc)
            c.values[layout.global_index(cell, loc)] += 1.0;
        }
      }
      LimiterResult lim = apply_limiter(mesh, basis, c);
      Eigen::VectorXd la(layout.per_cell), lb(layout.per_cell);
      for (int cell = 0; cell < static_cast<int>(mesh.cells.size()); ++cell) {
        gather_cell(c, cell, la);
        gather_cell(lim.field, cell, lb);
        double avg_before = 0, avg_after = 0;
        for (int loc = 0; loc < layout.per_cell; ++loc) {
          const double w = node_weight(mesh, basis, cell, loc);
          avg_before += w * la[loc];
          avg_after += w * lb[loc];
        }
        worst_mean = std::max(worst_mean, std::abs(avg_after - avg_before) / mesh.cells[cell].measure);
        const double lo = detail::cell_minimum(basis, mesh.dim(), lb);
        worst_min = std::max(worst_min, -lo);
      }
    }
  }
  std::ostringstream detail;
  detail << "mean drift " << format_double(worst_mean) << ", lowest post-limit value "
         << format_double(-worst_min);
  return {"limiter: exact mean preservation and nonnegative minima", worst_mean <= 1e-14 && worst_min <= 1e-12,
          detail.str()};
}

inline CheckResult coercivity_sampling(std::uint64_t seed) {
  std::mt19937_64 rng(seed + 515);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double worst_ratio = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= 2; ++k) {
    Mesh mesh = build_mesh(make_domain_1d(0, 1, true), {6, 1});
    NodalBasis basis(k);
    DofLayout layout = make_layout(mesh, k, Continuity::cell_local);
    Field psi = interpolate(mesh, basis, layout, [](const std::array<double, 2>& x) {
      return 1.2 + 0.5 * std::cos(2 * M_PI * x[0]);
    });
    FormConfig cfg;
    cfg.method = Method::ddg;
    cfg.beta0 = 2.0 * gamma_of_beta1(k, 0.0) * 1.7 / 0.7;  // comfortably stable for these bounds
    cfg.beta1 = 0.0;
    MobilityBounds bounds(0.7, 1.7);
    if (!check_stability(cfg.beta0, cfg.beta1, k, bounds)) return {"coercivity sampling", false, "setup"};
    AssembledForm form = assemble_form(mesh, basis, layout, psi, cfg);
    for (int trial = 0; trial < 100; ++trial) {
      Field v(layout);
      for (int i = 0; i < layout.total; ++i) v.values[i] = gauss(rng);
      const double en = energy_norm(mesh, basis, v);
      if (en < 1e-12) continue;
      worst_ratio = std::min(worst_ratio, v.values.dot(form.matrix * v.values) / (en * en));
    }
  }
  return {"coercivity sampling under the stability condition", worst_ratio > 0,
          "min quotient " + format_double(worst_ratio)};
}

inline CheckResult step_fraction_arithmetic() {
  Eigen::VectorXd c(3), dc(3);
  c << 0.1, 1.0, 0.5;
  dc << -0.6, 0.2, -0.1;
  const double alpha = fraction_to_boundary(c, dc, 0.95);
  const double expect = 0.95 * (0.1 / 0.6);
  bool pass = std::abs(alpha - expect) < 1e-15;
  // no negative move: full step
  dc << 0.1, 0.0, 0.2;
  pass = pass && fraction_to_boundary(c, dc, 0.95) == 1.0;
  // small negative move leaving plenty of room: full step
  dc << -0.01, 0.0, 0.0;
  pass = pass && fraction_to_boundary(c, dc, 0.95) == 1.0;
  return {"step-fraction arithmetic", pass, "damped fraction " + format_double(alpha)};
}

inline CheckResult manufactured_balance() {
  const double r1 = manufactured_identity_residual(mms_coupled_1d());
  const double r2 = manufactured_identity_residual(mms_coupled_2d());
  std::ostringstream detail;
  detail << "1d residual " << format_double(r1) << ", 2d residual " << format_double(r2);
  return {"manufactured sources balance the stated solutions", r1 < 1e-8 && r2 < 1e-8, detail.str()};
}

}  // namespace selfcheck

inline std::vector<CheckResult> run_property_checks(std::uint64_t seed = 12345) {
  std::vector<CheckResult> results;
  results.push_back(selfcheck::quadrature_moments());
  results.push_back(selfcheck::gamma_against_sampling(seed));
  results.push_back(selfcheck::dual_solve_identities(seed));
  results.push_back(selfcheck::limiter_properties(seed));
  results.push_back(selfcheck::coercivity_sampling(seed));
  results.push_back(selfcheck::step_fraction_arithmetic());
  results.push_back(selfcheck::manufactured_balance());
  return results;
}

}  // namespace pnp
