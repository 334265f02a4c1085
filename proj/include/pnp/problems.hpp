// Built-in problem definitions: two manufactured cases with closed-form
// solutions and sources (1D and 2D), and a source-free 2D relaxation case
// that decays to a uniform neutral state.
#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "pnp/integrator.hpp"

namespace pnp {

struct SpeciesProblem {
  double valence = 1.0;
  double diffusion = 1.0;
  SpaceFn initial;
  SpaceTimeFn exact;  // null when no closed-form solution is known
  SpaceTimeFn exact_dx, exact_dy;
  SpaceTimeFn source;
};

struct ProblemSpec {
  std::string id;
  Domain domain;
  std::vector<SpeciesProblem> species;
  VariableBc phi_bc;
  SpaceTimeFn phi_exact, phi_exact_dx, phi_exact_dy;
  SpaceTimeFn phi_source;
  double epsilon = 1.0;
  double default_t_end = 0.1;
  bool has_exact = false;

  SpaceTimeFn exact_p(std::size_t i) const {
    if (!has_exact) return nullptr;
    const double q = species[i].valence;
    const SpaceTimeFn c = species[i].exact;
    const SpaceTimeFn phi = phi_exact;
    return [q, c, phi](double t, const std::array<double, 2>& x) {
      return q * phi(t, x) + std::log(c(t, x)) + 1.0;
    };
  }
};

// 1D manufactured case on [0,1]: cosine profiles decaying like e^{-t},
// mixed Dirichlet/zero-flux potential boundary, zero-flux species.
inline ProblemSpec mms_coupled_1d() {
  constexpr double A = 1e-3;
  ProblemSpec spec;
  spec.id = "mms1d";
  spec.domain = make_domain_1d(0.0, 1.0);
  spec.default_t_end = 0.1;
  spec.has_exact = true;

  auto c1 = [](double t, const std::array<double, 2>& x) {
    return A * (std::cos(M_PI * x[0]) + 2.0) * std::exp(-t);
  };
  auto c2 = [](double t, const std::array<double, 2>& x) {
    return A * (std::cos(2 * M_PI * x[0]) + 1.5) * std::exp(-t);
  };
  auto phi = [](double t, const std::array<double, 2>& x) {
    return A * (std::cos(2 * M_PI * x[0]) - 1.0) * std::exp(-t);
  };

  SpeciesProblem s1;
  s1.valence = +1.0;
  s1.exact = c1;
  s1.exact_dx = [](double t, const std::array<double, 2>& x) {
    return -A * M_PI * std::sin(M_PI * x[0]) * std::exp(-t);
  };
  s1.initial = [c1](const std::array<double, 2>& x) { return c1(0.0, x); };
  s1.source = [](double t, const std::array<double, 2>& x) {
    const double E = std::exp(-t), E2 = E * E;
    const double cx = std::cos(M_PI * x[0]), sx = std::sin(M_PI * x[0]);
    const double c2x = std::cos(2 * M_PI * x[0]), s2x = std::sin(2 * M_PI * x[0]);
    return A * E * (M_PI * M_PI * cx - cx - 2.0) +
           2.0 * A * A * M_PI * M_PI * E2 * (2.0 * (cx + 2.0) * c2x - sx * s2x);
  };

  SpeciesProblem s2;
  s2.valence = -1.0;
  s2.exact = c2;
  s2.exact_dx = [](double t, const std::array<double, 2>& x) {
    return -2.0 * A * M_PI * std::sin(2 * M_PI * x[0]) * std::exp(-t);
  };
  s2.initial = [c2](const std::array<double, 2>& x) { return c2(0.0, x); };
  s2.source = [](double t, const std::array<double, 2>& x) {
    const double E = std::exp(-t), E2 = E * E;
    const double c2x = std::cos(2 * M_PI * x[0]), s2x = std::sin(2 * M_PI * x[0]);
    return -A * E * (c2x + 1.5) + 4.0 * A * M_PI * M_PI * E * c2x -
           4.0 * A * A * M_PI * M_PI * E2 * ((c2x + 1.5) * c2x - s2x * s2x);
  };

  spec.species = {s1, s2};
  spec.phi_exact = phi;
  spec.phi_exact_dx = [](double t, const std::array<double, 2>& x) {
    return -2.0 * A * M_PI * std::sin(2 * M_PI * x[0]) * std::exp(-t);
  };
  spec.phi_source = [](double t, const std::array<double, 2>& x) {
    const double E = std::exp(-t);
    const double cx = std::cos(M_PI * x[0]), c2x = std::cos(2 * M_PI * x[0]);
    return A * E * (4.0 * M_PI * M_PI * c2x - cx + c2x - 0.5);
  };
  spec.phi_bc.faces[face_xmin] = {BcType::dirichlet, nullptr};  // value 0
  spec.phi_bc.faces[face_xmax] = {BcType::zero_flux, nullptr};
  return spec;
}

// 2D manufactured case on [0,pi]^2 with identical species profiles (the net
// charge vanishes; the potential is driven by its own source). Zero-flux
// boundaries everywhere; the potential is normalized to zero mean.
inline ProblemSpec mms_coupled_2d() {
  constexpr double A = 1e-3;
  ProblemSpec spec;
  spec.id = "mms2d";
  spec.domain = make_domain_2d({0.0, 0.0}, {M_PI, M_PI});
  spec.default_t_end = 0.01;
  spec.has_exact = true;

  auto B = [](double t) { return std::exp(-1e-3 * t); };
  auto conc = [B](double t, const std::array<double, 2>& x) {
    return A * (B(t) * std::cos(x[0]) * std::cos(x[1]) + 1.0);
  };
  auto conc_dx = [B](double t, const std::array<double, 2>& x) {
    return -A * B(t) * std::sin(x[0]) * std::cos(x[1]);
  };
  auto conc_dy = [B](double t, const std::array<double, 2>& x) {
    return -A * B(t) * std::cos(x[0]) * std::sin(x[1]);
  };
  auto drift_S = [](const std::array<double, 2>& x) {
    const double sx = std::sin(x[0]), cx = std::cos(x[0]);
    const double sy = std::sin(x[1]), cy = std::cos(x[1]);
    return sx * sx * cy * cy + cx * cx * sy * sy - 2.0 * cx * cx * cy * cy;
  };

  SpeciesProblem s1;
  s1.valence = +1.0;
  s1.exact = conc;
  s1.exact_dx = conc_dx;
  s1.exact_dy = conc_dy;
  s1.initial = [conc](const std::array<double, 2>& x) { return conc(0.0, x); };
  s1.source = [B, drift_S](double t, const std::array<double, 2>& x) {
    const double b = B(t), cc = std::cos(x[0]) * std::cos(x[1]);
    return A * b * cc * (2.0 - 1e-3 + 2.0 * A) - A * A * b * b * drift_S(x);
  };

  SpeciesProblem s2 = s1;
  s2.valence = -1.0;
  s2.source = [B, drift_S](double t, const std::array<double, 2>& x) {
    const double b = B(t), cc = std::cos(x[0]) * std::cos(x[1]);
    return A * b * cc * (2.0 - 1e-3 - 2.0 * A) + A * A * b * b * drift_S(x);
  };

  spec.species = {s1, s2};
  spec.phi_exact = [B](double t, const std::array<double, 2>& x) {
    return A * B(t) * std::cos(x[0]) * std::cos(x[1]);
  };
  spec.phi_exact_dx = [B](double t, const std::array<double, 2>& x) {
    return -A * B(t) * std::sin(x[0]) * std::cos(x[1]);
  };
  spec.phi_exact_dy = [B](double t, const std::array<double, 2>& x) {
    return -A * B(t) * std::cos(x[0]) * std::sin(x[1]);
  };
  spec.phi_source = [B](double t, const std::array<double, 2>& x) {
    return 2.0 * A * B(t) * std::cos(x[0]) * std::cos(x[1]);
  };
  // zero-flux everywhere (the defaults)
  return spec;
}

// Source-free 2D relaxation on [0,1]^2: sine / squared-polynomial initial
// profiles with equal total mass 0.2, relaxing toward c1 = c2 = 0.2, phi = 0.
// The potential is grounded on the x faces and insulated on the y faces.
inline ProblemSpec relaxation_2d() {
  ProblemSpec spec;
  spec.id = "relax2d";
  spec.domain = make_domain_2d({0.0, 0.0}, {1.0, 1.0});
  spec.default_t_end = 1.0;
  spec.has_exact = false;

  SpeciesProblem s1;
  s1.valence = +1.0;
  s1.initial = [](const std::array<double, 2>& x) {
    return (M_PI / 20.0) * (std::sin(M_PI * x[0]) + std::sin(M_PI * x[1]));
  };
  SpeciesProblem s2;
  s2.valence = -1.0;
  s2.initial = [](const std::array<double, 2>& x) {
    const double u = x[0] * (1.0 - x[0]), v = x[1] * (1.0 - x[1]);
    return 3.0 * (u * u + v * v);
  };
  spec.species = {s1, s2};
  spec.phi_bc.faces[face_xmin] = {BcType::dirichlet, nullptr};
  spec.phi_bc.faces[face_xmax] = {BcType::dirichlet, nullptr};
  return spec;
}

inline ProblemSpec builtin_problem(const std::string& id) {
  if (id == "mms1d") return mms_coupled_1d();
  if (id == "mms2d") return mms_coupled_2d();
  if (id == "relax2d") return relaxation_2d();
  throw std::invalid_argument("unknown problem id '" + id + "'");
}

// ---------------------------------------------------------------------------
// finite-difference verification that the stated sources balance the stated
// exact solution; returns the largest residual over random samples

inline double manufactured_identity_residual(const ProblemSpec& spec, unsigned seed = 20240901,
                                             int samples = 20) {
  if (!spec.has_exact) return 0.0;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double h1 = 1e-6;  // first derivatives
  const double h2 = 1e-4;  // second derivatives
  double worst = 0.0;
  const int dim = spec.domain.dim;
  for (int s = 0; s < samples; ++s) {
    const double t = uni(rng) * std::max(spec.default_t_end, 1e-2);
    std::array<double, 2> x{0, 0};
    for (int a = 0; a < dim; ++a)
      x[a] = spec.domain.lower[a] + uni(rng) * (spec.domain.upper[a] - spec.domain.lower[a]);
    auto d1 = [&](const SpaceTimeFn& f, int axis) {
      std::array<double, 2> xp = x, xm = x;
      xp[axis] += h1;
      xm[axis] -= h1;
      return (f(t, xp) - f(t, xm)) / (2 * h1);
    };
    auto d2 = [&](const SpaceTimeFn& f, int axis) {
      std::array<double, 2> xp = x, xm = x;
      xp[axis] += h2;
      xm[axis] -= h2;
      return (f(t, xp) - 2.0 * f(t, x) + f(t, xm)) / (h2 * h2);
    };
    auto dt = [&](const SpaceTimeFn& f) { return (f(t + h1, x) - f(t - h1, x)) / (2 * h1); };

    double charge = 0.0;
    for (const SpeciesProblem& sp : spec.species) {
      const double q = sp.valence, D = sp.diffusion;
      double lap_c = 0, adv = 0, lap_phi = 0;
      for (int a = 0; a < dim; ++a) {
        lap_c += d2(sp.exact, a);
        lap_phi += d2(spec.phi_exact, a);
        adv += d1(sp.exact, a) * d1(spec.phi_exact, a);
      }
      const double cval = sp.exact(t, x);
      const double rhs = D * (lap_c + q * (adv + cval * lap_phi));
      const double src = sp.source ? sp.source(t, x) : 0.0;
      const double resid = src - (dt(sp.exact) - rhs);
      worst = std::max(worst, std::abs(resid));
      charge += q * cval;
    }
    double lap_phi = 0;
    for (int a = 0; a < dim; ++a) lap_phi += d2(spec.phi_exact, a);
    const double eps2 = spec.epsilon * spec.epsilon;
    const double phi_src = spec.phi_source ? spec.phi_source(t, x) : 0.0;
    const double resid = phi_src - (-eps2 * lap_phi - charge);
    worst = std::max(worst, std::abs(resid));
  }
  return worst;
}

}  // namespace pnp
