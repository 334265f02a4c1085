// Gauss-Legendre and Gauss-Lobatto rules on the reference interval [-1,1].
#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace pnp {

struct QuadRule {
  std::vector<double> nodes;    // strictly increasing in [-1,1]
  std::vector<double> weights;  // positive, sum to 2
  int exactness = 0;            // highest polynomial degree integrated exactly
};

// Legendre P_n and P_n' by the three-term recurrence.
inline std::pair<double, double> legendre(int n, double x) {
  if (n == 0) return {1.0, 0.0};
  double pm1 = 1.0, p = x, dpm1 = 0.0, dp = 1.0;
  for (int m = 1; m < n; ++m) {
    double pp = ((2 * m + 1) * x * p - m * pm1) / (m + 1);
    double dpp = dpm1 + (2 * m + 1) * p;
    pm1 = p;
    p = pp;
    dpm1 = dp;
    dp = dpp;
  }
  return {p, dp};
}

// Interior points of the (n)-point Gauss-Lobatto rule are the roots of P_{n-1}'.
// Newton iteration on P_{n-1}' with Chebyshev-Lobatto seeds; the second
// derivative comes from the Legendre ODE (1-x^2)P'' = 2xP' - n(n+1)P.
inline QuadRule gauss_lobatto_rule(int n) {
  if (n < 2) throw std::invalid_argument("gauss_lobatto_rule: need at least 2 points");
  QuadRule rule;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);
  const int m = n - 1;
  rule.nodes[0] = -1.0;
  rule.nodes[m] = 1.0;
  for (int i = 1; i < m; ++i) {
    double x = -std::cos(M_PI * i / m);  // seed
    for (int it = 0; it < 100; ++it) {
      auto [p, dp] = legendre(m, x);
      double d2p = (2.0 * x * dp - m * (m + 1) * p) / (1.0 - x * x);
      double dx = dp / d2p;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    rule.nodes[i] = x;
  }
  // enforce symmetry exactly
  for (int i = 0; i < n / 2; ++i) {
    double s = 0.5 * (rule.nodes[n - 1 - i] - rule.nodes[i]);
    rule.nodes[i] = -s;
    rule.nodes[n - 1 - i] = s;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  for (int i = 0; i < n; ++i) {
    double p = legendre(m, rule.nodes[i]).first;
    rule.weights[i] = 2.0 / (m * (m + 1) * p * p);
  }
  rule.exactness = 2 * n - 3;
  return rule;
}

inline QuadRule gauss_rule(int n) {
  if (n < 1) throw std::invalid_argument("gauss_rule: need at least 1 point");
  QuadRule rule;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double x = -std::cos(M_PI * (4.0 * i + 3.0) / (4.0 * n + 2.0));  // seed
    for (int it = 0; it < 100; ++it) {
      auto [p, dp] = legendre(n, x);
      double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    rule.nodes[i] = x;
  }
  for (int i = 0; i < n / 2; ++i) {
    double s = 0.5 * (rule.nodes[n - 1 - i] - rule.nodes[i]);
    rule.nodes[i] = -s;
    rule.nodes[n - 1 - i] = s;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  for (int i = 0; i < n; ++i) {
    auto [p, dp] = legendre(n, rule.nodes[i]);
    (void)p;
    double x = rule.nodes[i];
    rule.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  rule.exactness = 2 * n - 1;
  return rule;
}

}  // namespace pnp
