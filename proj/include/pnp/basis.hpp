// Nodal Lagrange basis at Gauss-Lobatto points, tensorized per axis.
//
// One-dimensional basis data (nodes, weights, differentiation matrices) is
// precomputed; arbitrary-point evaluation goes through a Legendre expansion
// of each Lagrange function, which is stable for every derivative order we
// need (values, first and pure second derivatives).
#pragma once

#include <Eigen/Dense>
#include <array>
#include <stdexcept>
#include <vector>

#include "pnp/quadrature.hpp"

namespace pnp {

class NodalBasis {
 public:
  explicit NodalBasis(int order) : k_(order) {
    if (order < 1) throw std::invalid_argument("NodalBasis: order must be >= 1");
    QuadRule gl = gauss_lobatto_rule(order + 1);
    nodes_ = gl.nodes;
    weights_ = gl.weights;
    const int n = order + 1;

    // barycentric weights
    bary_.assign(n, 1.0);
    for (int j = 0; j < n; ++j) {
      for (int m = 0; m < n; ++m)
        if (m != j) bary_[j] /= (nodes_[j] - nodes_[m]);
    }

    // differentiation matrix D(i,j) = l_j'(g_i); rows sum to zero by construction
    diff_ = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      double diag = 0.0;
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        diff_(i, j) = (bary_[j] / bary_[i]) / (nodes_[i] - nodes_[j]);
        diag -= diff_(i, j);
      }
      diff_(i, i) = diag;
    }
    diff2_ = diff_ * diff_;  // exact for polynomials of degree <= k

    // Legendre coefficients of each Lagrange function: l_j = sum_m leg_(j,m) P_m.
    // Projection integrals use an exact Gauss rule (degree 2k).
    leg_ = Eigen::MatrixXd::Zero(n, n);
    QuadRule gq = gauss_rule(n);
    for (int q = 0; q < n; ++q) {
      // P_m at the Gauss node
      std::vector<double> P(n);
      P[0] = 1.0;
      if (n > 1) P[1] = gq.nodes[q];
      for (int m = 1; m + 1 < n; ++m)
        P[m + 1] = ((2 * m + 1) * gq.nodes[q] * P[m] - m * P[m - 1]) / (m + 1);
      for (int j = 0; j < n; ++j) {
        double lj = value_bary(j, gq.nodes[q]);
        for (int m = 0; m < n; ++m)
          leg_(j, m) += (2.0 * m + 1.0) / 2.0 * gq.weights[q] * lj * P[m];
      }
    }
  }

  int order() const { return k_; }
  int num_nodes() const { return k_ + 1; }
  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }
  const Eigen::MatrixXd& diff() const { return diff_; }
  const Eigen::MatrixXd& diff2() const { return diff2_; }

  // Values / first / second derivatives of all 1D basis functions at xi.
  void eval_1d(double xi, double* val, double* der = nullptr, double* der2 = nullptr) const {
    const int n = k_ + 1;
    std::vector<double> P(n), dP(n), d2P(n);
    P[0] = 1.0;
    dP[0] = 0.0;
    d2P[0] = 0.0;
    if (n > 1) {
      P[1] = xi;
      dP[1] = 1.0;
      d2P[1] = 0.0;
    }
    for (int m = 1; m + 1 < n; ++m) {
      P[m + 1] = ((2 * m + 1) * xi * P[m] - m * P[m - 1]) / (m + 1);
      dP[m + 1] = dP[m - 1] + (2 * m + 1) * P[m];
      d2P[m + 1] = d2P[m - 1] + (2 * m + 1) * dP[m];
    }
    for (int j = 0; j < n; ++j) {
      double v = 0, d = 0, d2 = 0;
      for (int m = 0; m < n; ++m) {
        v += leg_(j, m) * P[m];
        d += leg_(j, m) * dP[m];
        d2 += leg_(j, m) * d2P[m];
      }
      if (val) val[j] = v;
      if (der) der[j] = d;
      if (der2) der2[j] = d2;
    }
  }

  // Legendre coefficients of the polynomial with the given nodal values.
  void legendre_coeffs(const double* nodal, double* coeffs) const {
    const int n = k_ + 1;
    for (int m = 0; m < n; ++m) {
      double c = 0;
      for (int j = 0; j < n; ++j) c += nodal[j] * leg_(j, m);
      coeffs[m] = c;
    }
  }

 private:
  double value_bary(int j, double x) const {
    // plain barycentric evaluation, exact-node guarded; used only at setup
    const int n = k_ + 1;
    for (int m = 0; m < n; ++m)
      if (x == nodes_[m]) return m == j ? 1.0 : 0.0;
    double num = bary_[j] / (x - nodes_[j]);
    double den = 0.0;
    for (int m = 0; m < n; ++m) den += bary_[m] / (x - nodes_[m]);
    return num / den;
  }

  int k_;
  std::vector<double> nodes_, weights_, bary_;
  Eigen::MatrixXd diff_, diff2_, leg_;
};

// Tensor-product evaluation of all (k+1)^dim basis functions at a reference
// point. Local node ordering is lexicographic with the x index fastest.
struct TensorEval {
  std::vector<double> value;             // size (k+1)^dim
  std::array<std::vector<double>, 2> grad;   // d/dxi_a, reference derivatives
  std::array<std::vector<double>, 2> grad2;  // pure second reference derivatives
};

inline TensorEval basis_eval(const NodalBasis& basis, int dim, const std::array<double, 2>& ref,
                             bool with_second = false) {
  const int n = basis.num_nodes();
  for (int a = 0; a < dim; ++a)
    if (std::abs(ref[a]) > 1.0 + 1e-12)
      throw std::invalid_argument("basis_eval: reference point outside cell");
  TensorEval out;
  std::array<std::vector<double>, 2> v, d, d2;
  for (int a = 0; a < dim; ++a) {
    v[a].resize(n);
    d[a].resize(n);
    d2[a].resize(n);
    basis.eval_1d(ref[a], v[a].data(), d[a].data(), with_second ? d2[a].data() : nullptr);
  }
  if (dim == 1) {
    out.value = v[0];
    out.grad[0] = d[0];
    if (with_second) out.grad2[0] = d2[0];
    return out;
  }
  const int nn = n * n;
  out.value.resize(nn);
  out.grad[0].resize(nn);
  out.grad[1].resize(nn);
  if (with_second) {
    out.grad2[0].resize(nn);
    out.grad2[1].resize(nn);
  }
  for (int b = 0; b < n; ++b)
    for (int a = 0; a < n; ++a) {
      int loc = b * n + a;
      out.value[loc] = v[0][a] * v[1][b];
      out.grad[0][loc] = d[0][a] * v[1][b];
      out.grad[1][loc] = v[0][a] * d[1][b];
      if (with_second) {
        out.grad2[0][loc] = d2[0][a] * v[1][b];
        out.grad2[1][loc] = v[0][a] * d2[1][b];
      }
    }
  return out;
}

}  // namespace pnp
