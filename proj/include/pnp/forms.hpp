// Lumped inner products, the FEM/DDG diffusion forms with mobility weight,
// interface flux machinery, sparse assembly, and the elliptic solves built
// on them.
//
// Volume terms of the collocated forms use the Gauss-Lobatto nodes as
// quadrature points; interface terms use the Gauss-Lobatto trace points of
// the face. The exact-integration variants (used by diagnostics) replace
// both with Gauss rules of sufficient degree.
#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <cmath>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <stdexcept>
#include <variant>
#include <vector>

#include "pnp/field.hpp"

namespace pnp {

enum class Method { fem, ddg };

struct FormConfig {
  Method method = Method::ddg;
  double beta0 = 4.0;
  double beta1 = 0.0;  // used by DDG only
  VariableBc bc;       // boundary condition of the variable the form acts on
};

// Mobility coefficient: either a constant or a nodal field.
class Mobility {
 public:
  Mobility(double c) : constant_(c) {}  // NOLINT: implicit by design
  Mobility(const Field& f) : field_(&f) {}

  bool is_field() const { return field_ != nullptr; }

  double at_node(const DofLayout& layout, int cell, int loc) const {
    return field_ ? field_->values[layout.global_index(cell, loc)] : constant_;
  }

  double at_ref(const Mesh& mesh, const NodalBasis& basis, int cell,
                const std::array<double, 2>& ref) const {
    if (!field_) return constant_;
    return eval_field(mesh, basis, *field_, cell, ref);
  }

  std::pair<double, double> bounds(const DofLayout& layout) const {
    if (!field_) return {constant_, constant_};
    double lo = field_->values.minCoeff(), hi = field_->values.maxCoeff();
    (void)layout;
    return {lo, hi};
  }

 private:
  double constant_ = 1.0;
  const Field* field_ = nullptr;
};

struct MobilityBounds {
  double psi0 = 1.0;  // positive lower bound
  double psi1 = 1.0;  // upper bound

  MobilityBounds(double lo, double hi) : psi0(lo), psi1(hi) {
    if (!(0 < lo && lo <= hi)) throw std::invalid_argument("MobilityBounds: need 0 < psi0 <= psi1");
  }
};

// ---------------------------------------------------------------------------
// lumped products

inline Eigen::VectorXd lumped_mass(const Mesh& mesh, const NodalBasis& basis,
                                   const DofLayout& layout) {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(layout.total);
  for (int cell = 0; cell < static_cast<int>(mesh.cells.size()); ++cell)
    for (int loc = 0; loc < layout.per_cell; ++loc)
      m[layout.global_index(cell, loc)] += node_weight(mesh, basis, cell, loc);
  return m;
}

inline double lumped_inner(const Field& f, const Field& v, const Mesh& mesh,
                           const NodalBasis& basis) {
  check_same_layout(f, v);
  Eigen::VectorXd m = lumped_mass(mesh, basis, *f.layout);
  return (m.array() * f.values.array() * v.values.array()).sum();
}

inline double lumped_inner(const SpaceFn& f, const Field& v, const Mesh& mesh,
                           const NodalBasis& basis) {
  const DofLayout& layout = *v.layout;
  double s = 0;
  for (int cell = 0; cell < static_cast<int>(mesh.cells.size()); ++cell)
    for (int loc = 0; loc < layout.per_cell; ++loc)
      s += f(node_position(mesh, basis, cell, loc)) *
           v.values[layout.global_index(cell, loc)] * node_weight(mesh, basis, cell, loc);
  return s;
}

// Lumped load vector <f, l_g> for a point function.
inline Eigen::VectorXd lumped_load(const Mesh& mesh, const NodalBasis& basis,
                                   const DofLayout& layout, const SpaceFn& f) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(layout.total);
  for (int cell = 0; cell < static_cast<int>(mesh.cells.size()); ++cell)
    for (int loc = 0; loc < layout.per_cell; ++loc)
      b[layout.global_index(cell, loc)] +=
          f(node_position(mesh, basis, cell, loc)) * node_weight(mesh, basis, cell, loc);
  return b;
}

// ---------------------------------------------------------------------------
// face trace functionals

// Per face quadrature point: coefficient vectors over the cell-local nodes
// expressing the trace value, the normal derivative and the pure second
// normal derivative (both in physical units, along the +axis direction).
struct FaceFunctionals {
  int nq = 0;
  std::vector<double> w;                 // physical face weights
  std::vector<std::array<double, 2>> x;  // physical positions
  std::vector<Eigen::VectorXd> value, dn, dn2;
};

// tangential_nodes: reference points along the face (ignored in 1D).
// tangential weights are scaled by the tangent cell extent; 1D faces carry
// weight 1 (a point evaluation).
inline FaceFunctionals face_functionals(const Mesh& mesh, const NodalBasis& basis, int cell,
                                        int axis, int side,
                                        const std::vector<double>& tangential_nodes,
                                        const std::vector<double>& tangential_weights) {
  const Cell& c = mesh.cells[cell];
  const int dim = mesh.dim();
  const int per_cell = dim == 2 ? basis.num_nodes() * basis.num_nodes() : basis.num_nodes();
  FaceFunctionals out;
  out.nq = dim == 2 ? static_cast<int>(tangential_nodes.size()) : 1;
  out.w.resize(out.nq);
  out.x.resize(out.nq);
  out.value.assign(out.nq, Eigen::VectorXd::Zero(per_cell));
  out.dn.assign(out.nq, Eigen::VectorXd::Zero(per_cell));
  out.dn2.assign(out.nq, Eigen::VectorXd::Zero(per_cell));
  const int tangent = 1 - axis;
  const double sref = side > 0 ? 1.0 : -1.0;
  const double scale1 = 2.0 / mesh.dx[axis];
  const double scale2 = scale1 * scale1;
  for (int q = 0; q < out.nq; ++q) {
    std::array<double, 2> ref{0, 0};
    ref[axis] = sref;
    if (dim == 2) ref[tangent] = tangential_nodes[q];
    TensorEval te = basis_eval(basis, dim, ref, /*with_second=*/true);
    for (int loc = 0; loc < per_cell; ++loc) {
      out.value[q][loc] = te.value[loc];
      out.dn[q][loc] = te.grad[axis][loc] * scale1;
      out.dn2[q][loc] = te.grad2[axis][loc] * scale2;
    }
    out.w[q] = dim == 2 ? 0.5 * mesh.dx[tangent] * tangential_weights[q] : 1.0;
    std::array<double, 2> pos{0, 0};
    pos[axis] = side > 0 ? c.hi[axis] : c.lo[axis];
    if (dim == 2) pos[tangent] = c.lo[tangent] + 0.5 * (ref[tangent] + 1.0) * mesh.dx[tangent];
    out.x[q] = pos;
  }
  return out;
}

// ---------------------------------------------------------------------------
// stability constant

// Sharp constant of the interface penalty condition: the supremum over
// polynomials of degree k-1 on [-1,1] of 2 (v(1) - 2 beta1 v'(1))^2 / ||v||^2,
// computed exactly as a rank-one Rayleigh quotient in the monomial basis.
inline double gamma_of_beta1(int k, double beta1) {
  if (k < 1) throw std::invalid_argument("gamma_of_beta1: k must be >= 1");
  const int n = k;  // dim of P_{k-1}
  Eigen::MatrixXd M(n, n);
  Eigen::VectorXd b(n);
  for (int i = 0; i < n; ++i) {
    b[i] = 1.0 - 2.0 * beta1 * i;
    for (int j = 0; j < n; ++j) M(i, j) = ((i + j) % 2 == 0) ? 2.0 / (i + j + 1) : 0.0;
  }
  Eigen::VectorXd y = M.ldlt().solve(b);
  return 2.0 * b.dot(y);
}

inline bool check_stability(double beta0, double beta1, int k, const MobilityBounds& bounds) {
  return bounds.psi0 * beta0 >= bounds.psi1 * gamma_of_beta1(k, beta1);
}

// ---------------------------------------------------------------------------
// assembled operator

struct AssembledForm {
  Eigen::SparseMatrix<double> matrix;
  Eigen::VectorXd rhs_lift;       // Dirichlet data contribution to the load
  std::vector<int> strong_rows;   // eliminated rows/cols (continuous method)
  Eigen::VectorXd strong_values;  // prescribed values, aligned with strong_rows
  bool needs_mean_constraint = false;
  bool stability_ok = true;
  double gamma_beta1 = 0;
  double psi_min = 0, psi_max = 0;

  double apply_quadratic(const Eigen::VectorXd& u) const { return u.dot(matrix * u); }
};

inline double relative_asymmetry(const Eigen::SparseMatrix<double>& A) {
  Eigen::SparseMatrix<double> D = Eigen::SparseMatrix<double>(A.transpose()) - A;
  double na = 0, nd = 0;
  for (int k = 0; k < A.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it)
      na = std::max(na, std::abs(it.value()));
  for (int k = 0; k < D.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(D, k); it; ++it)
      nd = std::max(nd, std::abs(it.value()));
  return na > 0 ? nd / na : 0.0;
}

namespace detail {

inline void check_layout_method(const DofLayout& layout, Method method) {
  if (method == Method::fem && layout.mode != Continuity::continuous)
    throw std::invalid_argument("the continuous method requires the continuous DoF layout");
  if (method == Method::ddg && layout.mode != Continuity::cell_local)
    throw std::invalid_argument("the discontinuous method requires the cell-local DoF layout");
}

// volume part of the collocated form: sum_q psi(g_q) w_q grad(u).grad(v)(g_q)
inline void add_lumped_volume(const Mesh& mesh, const NodalBasis& basis, const DofLayout& layout,
                              const Mobility& psi, std::vector<Eigen::Triplet<double>>& trip) {
  const int n = basis.num_nodes();
  const int dim = mesh.dim();
  const Eigen::MatrixXd& D = basis.diff();
  for (int cell = 0; cell < static_cast<int>(mesh.cells.size()); ++cell) {
    for (int axis = 0; axis < dim; ++axis) {
      const double gscale = 2.0 / mesh.dx[axis];
      const int n_t = dim == 2 ? n : 1;
      for (int t = 0; t < n_t; ++t) {
        for (int i = 0; i < n; ++i) {
          int loc_q = axis == 0 ? t * n + i : i * n + t;
          if (dim == 1) loc_q = i;
          const double wq = node_weight(mesh, basis, cell, loc_q);
          const double pq = psi.at_node(layout, cell, loc_q);
          if (pq == 0.0) continue;
          const double fac = pq * wq * gscale * gscale;
          for (int a = 0; a < n; ++a) {
            int loc_a = axis == 0 ? t * n + a : a * n + t;
            if (dim == 1) loc_a = a;
            const int ga = layout.global_index(cell, loc_a);
            const double Dia = D(i, a);
            if (Dia == 0.0) continue;
            for (int b = 0; b < n; ++b) {
              int loc_b = axis == 0 ? t * n + b : b * n + t;
              if (dim == 1) loc_b = b;
              trip.emplace_back(ga, layout.global_index(cell, loc_b), fac * Dia * D(i, b));
            }
          }
        }
      }
    }
  }
}

// volume part with an exact Gauss rule
inline void add_exact_volume(const Mesh& mesh, const NodalBasis& basis, const DofLayout& layout,
                             const Mobility& psi, int n_gauss,
                             std::vector<Eigen::Triplet<double>>& trip) {
  const int dim = mesh.dim();
  QuadRule gq = gauss_rule(n_gauss);
  const int nq1 = n_gauss;
  const int nq = dim == 2 ? nq1 * nq1 : nq1;
  for (int cell = 0; cell < static_cast<int>(mesh.cells.size()); ++cell) {
    for (int q = 0; q < nq; ++q) {
      const int qa = q % nq1, qb = q / nq1;
      std::array<double, 2> ref{gq.nodes[qa], dim == 2 ? gq.nodes[qb] : 0.0};
      double w = 0.5 * mesh.dx[0] * gq.weights[qa];
      if (dim == 2) w *= 0.5 * mesh.dx[1] * gq.weights[qb];
      TensorEval te = basis_eval(basis, dim, ref);
      const double pq = psi.at_ref(mesh, basis, cell, ref);
      for (int la = 0; la < layout.per_cell; ++la) {
        const int ga = layout.global_index(cell, la);
        for (int lb = 0; lb < layout.per_cell; ++lb) {
          double s = 0;
          for (int axis = 0; axis < dim; ++axis) {
            const double gs = 2.0 / mesh.dx[axis];
            s += te.grad[axis][la] * gs * te.grad[axis][lb] * gs;
          }
          if (s != 0.0) trip.emplace_back(ga, layout.global_index(cell, lb), pq * w * s);
        }
      }
    }
  }
}

struct EdgeQuadChoice {
  std::vector<double> nodes, weights;  // tangential reference rule
};

inline EdgeQuadChoice edge_rule_lumped(const NodalBasis& basis) {
  return {basis.nodes(), basis.weights()};
}

inline EdgeQuadChoice edge_rule_exact(int k) {
  QuadRule g = gauss_rule(k + 1);
  return {g.nodes, g.weights};
}

// interface and boundary terms of the discontinuous form
inline void add_ddg_edges(const Mesh& mesh, const NodalBasis& basis, const DofLayout& layout,
                          const Mobility& psi, const FormConfig& cfg, const EdgeQuadChoice& rule,
                          std::vector<Eigen::Triplet<double>>& trip, Eigen::VectorXd& lift) {
  const int pc = layout.per_cell;
  auto scatter = [&](int cell_v, const Eigen::VectorXd& test, int cell_u,
                     const Eigen::VectorXd& trial, double coef) {
    if (coef == 0.0) return;
    for (int lv = 0; lv < pc; ++lv) {
      if (test[lv] == 0.0) continue;
      const int gv = layout.global_index(cell_v, lv);
      for (int lu = 0; lu < pc; ++lu) {
        if (trial[lu] == 0.0) continue;
        trip.emplace_back(gv, layout.global_index(cell_u, lu), coef * test[lv] * trial[lu]);
      }
    }
  };
  for (const Edge& e : mesh.edges) {
    if (e.kind == EdgeKind::interior) {
      FaceFunctionals f1 =
          face_functionals(mesh, basis, e.k1, e.axis, +1, rule.nodes, rule.weights);
      FaceFunctionals f2 =
          face_functionals(mesh, basis, e.k2, e.axis, -1, rule.nodes, rule.weights);
      for (int q = 0; q < f1.nq; ++q) {
        // two-sided mobility trace average
        std::array<double, 2> ref1{0, 0}, ref2{0, 0};
        ref1[e.axis] = 1.0;
        ref2[e.axis] = -1.0;
        if (mesh.dim() == 2) {
          ref1[1 - e.axis] = rule.nodes[q];
          ref2[1 - e.axis] = rule.nodes[q];
        }
        const double pa = 0.5 * (psi.at_ref(mesh, basis, e.k1, ref1) +
                                 psi.at_ref(mesh, basis, e.k2, ref2));
        const double w = f1.w[q] * pa;
        // jump/average functionals: [u] = u2 - u1, {du} = (du1+du2)/2, [d2u] = d2u2 - d2u1
        // flux F = beta0 [u]/h + {du} + beta1 h [d2u]; edge term F [v] + [u] {dv}
        const double b0h = cfg.beta0 / e.h_e;
        const double b1h = cfg.beta1 * e.h_e;
        // trial pieces against test jump [v]
        // F coefficients on side1: -b0h*value1 + 0.5*dn1 - b1h*dn2_1 ; side2: +b0h*value2 + 0.5*dn2 + b1h*dn2_2
        Eigen::VectorXd Fu1 = -b0h * f1.value[q] + 0.5 * f1.dn[q] - b1h * f1.dn2[q];
        Eigen::VectorXd Fu2 = b0h * f2.value[q] + 0.5 * f2.dn[q] + b1h * f2.dn2[q];
        // [v]: -value1 / +value2 ; {dv}: 0.5 dn1 / 0.5 dn2 ; [u]: -value1 / +value2
        scatter(e.k1, -f1.value[q], e.k1, Fu1, w);
        scatter(e.k1, -f1.value[q], e.k2, Fu2, w);
        scatter(e.k2, f2.value[q], e.k1, Fu1, w);
        scatter(e.k2, f2.value[q], e.k2, Fu2, w);
        scatter(e.k1, 0.5 * f1.dn[q], e.k1, -f1.value[q], w);
        scatter(e.k1, 0.5 * f1.dn[q], e.k2, f2.value[q], w);
        scatter(e.k2, 0.5 * f2.dn[q], e.k1, -f1.value[q], w);
        scatter(e.k2, 0.5 * f2.dn[q], e.k2, f2.value[q], w);
      }
    } else {
      const FaceBc& bc = cfg.bc.faces[e.boundary_face];
      if (bc.type == BcType::zero_flux) continue;  // natural: no interface term
      if (bc.type == BcType::periodic)
        throw std::invalid_argument("boundary edge carries a periodic tag; periodic axes have none");
      const int side = (e.boundary_face % 2 == 0) ? -1 : +1;
      FaceFunctionals f1 =
          face_functionals(mesh, basis, e.k1, e.axis, side, rule.nodes, rule.weights);
      const double sigma = side;  // outward normal sign along +axis
      for (int q = 0; q < f1.nq; ++q) {
        std::array<double, 2> ref{0, 0};
        ref[e.axis] = sigma;
        if (mesh.dim() == 2) ref[1 - e.axis] = rule.nodes[q];
        const double p1 = psi.at_ref(mesh, basis, e.k1, ref);
        const double w = f1.w[q] * p1;
        const double g = bc.value ? bc.value(f1.x[q]) : 0.0;
        Eigen::VectorXd dnu = sigma * f1.dn[q];  // outward normal derivative
        const double b0h = cfg.beta0 / e.h_e;
        // bilinear: b0h u v - (dn u) v - u (dn v); data: b0h g v - g (dn v)
        scatter(e.k1, f1.value[q], e.k1, b0h * f1.value[q] - dnu, w);
        scatter(e.k1, dnu, e.k1, -f1.value[q], w);
        for (int lv = 0; lv < pc; ++lv) {
          double tv = b0h * f1.value[q][lv] - dnu[lv];
          if (tv != 0.0) lift[layout.global_index(e.k1, lv)] += w * g * tv;
        }
      }
    }
  }
}

// strong Dirichlet elimination for the continuous method (symmetric, with
// the column contribution lifted to the load vector)
inline void apply_strong_dirichlet(const Mesh& mesh, const NodalBasis& basis,
                                   const DofLayout& layout, const FormConfig& cfg,
                                   std::vector<Eigen::Triplet<double>>& trip,
                                   AssembledForm& form) {
  std::vector<char> is_dirichlet(layout.total, 0);
  std::vector<double> value(layout.total, 0.0);
  const int n = basis.num_nodes();
  for (const Edge& e : mesh.edges) {
    if (e.kind != EdgeKind::boundary) continue;
    const FaceBc& bc = cfg.bc.faces[e.boundary_face];
    if (bc.type != BcType::dirichlet) continue;
    const int side_row = (e.boundary_face % 2 == 0) ? 0 : n - 1;
    const int n_t = mesh.dim() == 2 ? n : 1;
    for (int t = 0; t < n_t; ++t) {
      int loc = e.axis == 0 ? t * n + side_row : side_row * n + t;
      if (mesh.dim() == 1) loc = side_row;
      const int g = layout.global_index(e.k1, loc);
      is_dirichlet[g] = 1;
      value[g] = bc.value ? bc.value(node_position(mesh, basis, e.k1, loc)) : 0.0;
    }
  }
  std::vector<Eigen::Triplet<double>> kept;
  kept.reserve(trip.size());
  for (const auto& t : trip) {
    const bool rd = is_dirichlet[t.row()], cd = is_dirichlet[t.col()];
    if (!rd && !cd) {
      kept.push_back(t);
    } else if (!rd && cd) {
      form.rhs_lift[t.row()] -= t.value() * value[t.col()];
    }
  }
  for (int g = 0; g < layout.total; ++g)
    if (is_dirichlet[g]) {
      kept.emplace_back(g, g, 1.0);
      form.strong_rows.push_back(g);
    }
  form.strong_values.resize(static_cast<int>(form.strong_rows.size()));
  for (std::size_t i = 0; i < form.strong_rows.size(); ++i)
    form.strong_values[static_cast<int>(i)] = value[form.strong_rows[i]];
  trip.swap(kept);
}

inline bool natural_everywhere(const Mesh& mesh, const VariableBc& bc) {
  for (const Edge& e : mesh.edges)
    if (e.kind == EdgeKind::boundary && bc.faces[e.boundary_face].type != BcType::zero_flux)
      return false;
  return true;
}

inline AssembledForm assemble_impl(const Mesh& mesh, const NodalBasis& basis,
                                   const DofLayout& layout, const Mobility& psi,
                                   const FormConfig& cfg, bool exact, bool warn_unstable) {
  check_layout_method(layout, cfg.method);
  AssembledForm form;
  auto [plo, phi] = psi.bounds(layout);
  form.psi_min = plo;
  form.psi_max = phi;
  if (!(plo > 0.0))
    throw std::invalid_argument("assemble_form: mobility must be positive at every node");
  if (cfg.method == Method::ddg) {
    form.gamma_beta1 = gamma_of_beta1(layout.k, cfg.beta1);
    form.stability_ok = plo * cfg.beta0 >= phi * form.gamma_beta1;
    if (!form.stability_ok && warn_unstable)
      std::cerr << "warning: penalty pair (beta0=" << cfg.beta0 << ", beta1=" << cfg.beta1
                << ") below the stability threshold " << phi / plo * form.gamma_beta1 << "\n";
  }
  form.rhs_lift = Eigen::VectorXd::Zero(layout.total);
  std::vector<Eigen::Triplet<double>> trip;
  if (exact)
    add_exact_volume(mesh, basis, layout, psi, layout.k + 2, trip);
  else
    add_lumped_volume(mesh, basis, layout, psi, trip);
  if (cfg.method == Method::ddg) {
    EdgeQuadChoice rule = exact ? edge_rule_exact(layout.k) : edge_rule_lumped(basis);
    add_ddg_edges(mesh, basis, layout, psi, cfg, rule, trip, form.rhs_lift);
  } else {
    apply_strong_dirichlet(mesh, basis, layout, cfg, trip, form);
  }
  form.needs_mean_constraint = natural_everywhere(mesh, cfg.bc);
  form.matrix.resize(layout.total, layout.total);
  form.matrix.setFromTriplets(trip.begin(), trip.end());
  return form;
}

}  // namespace detail

inline AssembledForm assemble_form(const Mesh& mesh, const NodalBasis& basis,
                                   const DofLayout& layout, const Mobility& psi,
                                   const FormConfig& cfg, bool warn_unstable = false) {
  return detail::assemble_impl(mesh, basis, layout, psi, cfg, /*exact=*/false, warn_unstable);
}

inline AssembledForm assemble_exact_form(const Mesh& mesh, const NodalBasis& basis,
                                         const DofLayout& layout, const Mobility& psi,
                                         const FormConfig& cfg) {
  return detail::assemble_impl(mesh, basis, layout, psi, cfg, /*exact=*/true, false);
}

// Exact mass matrix (poly x poly products integrated with a Gauss rule).
inline Eigen::SparseMatrix<double> assemble_exact_mass(const Mesh& mesh, const NodalBasis& basis,
                                                       const DofLayout& layout) {
  const int dim = mesh.dim();
  QuadRule gq = gauss_rule(layout.k + 1);
  const int nq1 = layout.k + 1;
  const int nq = dim == 2 ? nq1 * nq1 : nq1;
  std::vector<Eigen::Triplet<double>> trip;
  for (int cell = 0; cell < static_cast<int>(mesh.cells.size()); ++cell) {
    for (int q = 0; q < nq; ++q) {
      const int qa = q % nq1, qb = q / nq1;
      std::array<double, 2> ref{gq.nodes[qa], dim == 2 ? gq.nodes[qb] : 0.0};
      double w = 0.5 * mesh.dx[0] * gq.weights[qa];
      if (dim == 2) w *= 0.5 * mesh.dx[1] * gq.weights[qb];
      TensorEval te = basis_eval(basis, dim, ref);
      for (int la = 0; la < layout.per_cell; ++la)
        for (int lb = 0; lb < layout.per_cell; ++lb)
          trip.emplace_back(layout.global_index(cell, la), layout.global_index(cell, lb),
                            w * te.value[la] * te.value[lb]);
    }
  }
  Eigen::SparseMatrix<double> M(layout.total, layout.total);
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

// ---------------------------------------------------------------------------
// direct solver with optional zero-mean augmentation

class EllipticSolver {
 public:
  void factorize(const Eigen::SparseMatrix<double>& A, bool mean_constraint,
                 const Eigen::VectorXd& int_weights) {
    n_ = static_cast<int>(A.rows());
    augmented_ = mean_constraint;
    Eigen::SparseMatrix<double> S;
    if (!augmented_) {
      S = A;
    } else {
      std::vector<Eigen::Triplet<double>> trip;
      trip.reserve(A.nonZeros() + 2 * n_);
      for (int k = 0; k < A.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it)
          trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
      for (int i = 0; i < n_; ++i) {
        trip.emplace_back(n_, i, int_weights[i]);
        trip.emplace_back(i, n_, int_weights[i]);
      }
      S.resize(n_ + 1, n_ + 1);
      S.setFromTriplets(trip.begin(), trip.end());
    }
    lu_.compute(S);
    if (lu_.info() != Eigen::Success)
      throw std::runtime_error("EllipticSolver: factorization failed (singular system?)");
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd b = rhs;
    if (augmented_) {
      b.conservativeResize(n_ + 1);
      b[n_] = 0.0;
    }
    Eigen::VectorXd x = lu_.solve(b);
    if (lu_.info() != Eigen::Success) throw std::runtime_error("EllipticSolver: solve failed");
    return x.head(n_);
  }

 private:
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
  int n_ = 0;
  bool augmented_ = false;
};

// ---------------------------------------------------------------------------
// elliptic solves

// Potential solve: a_{eps^2}(phi, w) = < sum_i q_i c_i + source, w >.
// With only natural/periodic boundaries the lumped total charge must vanish
// and the mean-zero representative is returned.
inline Field poisson_solve(const Mesh& mesh, const NodalBasis& basis, const DofLayout& layout,
                           const std::vector<const Field*>& concentrations,
                           const std::vector<double>& valences, const SpaceFn* source,
                           const FormConfig& cfg, double epsilon = 1.0) {
  if (concentrations.size() != valences.size())
    throw std::invalid_argument("poisson_solve: one valence per concentration field");
  AssembledForm form = assemble_form(mesh, basis, layout, Mobility(epsilon * epsilon), cfg);
  Eigen::VectorXd m = lumped_mass(mesh, basis, layout);
  Eigen::VectorXd rhs = form.rhs_lift;
  double charge_scale = 0.0;
  for (std::size_t i = 0; i < concentrations.size(); ++i) {
    check_same_layout(*concentrations[i], *concentrations[i]);
    rhs += valences[i] * (m.array() * concentrations[i]->values.array()).matrix();
    charge_scale += std::abs(valences[i]) *
                    (m.array() * concentrations[i]->values.array().abs()).sum();
  }
  if (source) {
    Eigen::VectorXd s = lumped_load(mesh, basis, layout, *source);
    rhs += s;
    charge_scale += s.lpNorm<1>();
  }
  if (form.needs_mean_constraint) {
    const double total = rhs.sum();
    const double scale = std::max(charge_scale, 1e-30);
    if (std::abs(total) > 1e-10 * std::max(scale, 1.0))
      throw std::runtime_error("poisson_solve: net charge incompatible with pure zero-flux boundaries");
  }
  for (std::size_t i = 0; i < form.strong_rows.size(); ++i)
    rhs[form.strong_rows[i]] = form.strong_values[static_cast<int>(i)];
  EllipticSolver solver;
  solver.factorize(form.matrix, form.needs_mean_constraint, m);
  Field phi(layout);
  phi.values = solver.solve(rhs);
  return phi;
}

// Inverse of the mobility-weighted elliptic operator on the zero-mean space:
// a_psi(u, v) = (f - fbar, v) with the exact L2 pairing on the right.
// Defined for the symmetric case (beta1 = 0).
inline Field solve_Lpsi(const Mesh& mesh, const NodalBasis& basis, const DofLayout& layout,
                        const Field& f, const Mobility& psi, const FormConfig& cfg) {
  if (cfg.method == Method::ddg && cfg.beta1 != 0.0)
    throw std::invalid_argument("solve_Lpsi: requires beta1 = 0");
  AssembledForm form = assemble_form(mesh, basis, layout, psi, cfg);
  if (!form.strong_rows.empty())
    throw std::invalid_argument("solve_Lpsi: defined for natural/periodic boundaries");
  Eigen::VectorXd m = lumped_mass(mesh, basis, layout);
  Eigen::SparseMatrix<double> Mx = assemble_exact_mass(mesh, basis, layout);
  Eigen::VectorXd rhs = Mx * f.values;
  EllipticSolver solver;
  solver.factorize(form.matrix, /*mean_constraint=*/true, m);
  Field u(layout);
  u.values = solver.solve(rhs);
  return u;
}

// (f, Lpsi f) with the exact pairing; the squared dual norm of f.
inline double lpsi_norm_sq(const Mesh& mesh, const NodalBasis& basis, const DofLayout& layout,
                           const Field& f, const Mobility& psi, const FormConfig& cfg) {
  Field u = solve_Lpsi(mesh, basis, layout, f, psi, cfg);
  Eigen::SparseMatrix<double> Mx = assemble_exact_mass(mesh, basis, layout);
  return f.values.dot(Mx * u.values);
}

// ---------------------------------------------------------------------------
// energy norm: broken gradient plus 1/h-weighted squared interior jumps

inline double energy_norm(const Mesh& mesh, const NodalBasis& basis, const Field& v) {
  const DofLayout& layout = *v.layout;
  const int dim = mesh.dim();
  QuadRule gq = gauss_rule(layout.k + 1);
  const int nq1 = layout.k + 1;
  const int nq = dim == 2 ? nq1 * nq1 : nq1;
  double acc = 0;
  for (int cell = 0; cell < static_cast<int>(mesh.cells.size()); ++cell) {
    for (int q = 0; q < nq; ++q) {
      const int qa = q % nq1, qb = q / nq1;
      std::array<double, 2> ref{gq.nodes[qa], dim == 2 ? gq.nodes[qb] : 0.0};
      double w = 0.5 * mesh.dx[0] * gq.weights[qa];
      if (dim == 2) w *= 0.5 * mesh.dx[1] * gq.weights[qb];
      std::array<double, 2> grad{0, 0};
      eval_field(mesh, basis, v, cell, ref, &grad);
      for (int a = 0; a < dim; ++a) acc += w * grad[a] * grad[a];
    }
  }
  if (layout.mode == Continuity::cell_local) {
    detail::EdgeQuadChoice rule = detail::edge_rule_exact(layout.k);
    for (const Edge& e : mesh.edges) {
      if (e.kind != EdgeKind::interior) continue;
      FaceFunctionals f1 =
          face_functionals(mesh, basis, e.k1, e.axis, +1, rule.nodes, rule.weights);
      FaceFunctionals f2 =
          face_functionals(mesh, basis, e.k2, e.axis, -1, rule.nodes, rule.weights);
      Eigen::VectorXd u1(layout.per_cell), u2(layout.per_cell);
      gather_cell(v, e.k1, u1);
      gather_cell(v, e.k2, u2);
      for (int q = 0; q < f1.nq; ++q) {
        const double jump = f2.value[q].dot(u2) - f1.value[q].dot(u1);
        acc += f1.w[q] / e.h_e * jump * jump;
      }
    }
  }
  return std::sqrt(acc);
}

// ---------------------------------------------------------------------------
// pointwise flux trace data on one edge (diagnostic view of the interface
// coupling used by the discontinuous form)

struct FluxSample {
  std::array<double, 2> x{0, 0};
  double weight = 0;
  double flux_hat = 0;  // beta0 [w]/h + {dn w} + beta1 h [dn2 w]
  double average = 0;
  double jump = 0;
  double dn1 = 0, dn2 = 0;  // one-sided normal derivatives along the edge normal
};

inline std::vector<FluxSample> ddg_flux_terms(const Mesh& mesh, const NodalBasis& basis,
                                              const Field& w, const Edge& edge,
                                              const FormConfig& cfg) {
  if (cfg.method != Method::ddg)
    throw std::invalid_argument("ddg_flux_terms: discontinuous method only");
  const DofLayout& layout = *w.layout;
  detail::EdgeQuadChoice rule = detail::edge_rule_lumped(basis);
  std::vector<FluxSample> out;
  Eigen::VectorXd u1(layout.per_cell), u2(layout.per_cell);
  if (edge.kind == EdgeKind::interior) {
    FaceFunctionals f1 =
        face_functionals(mesh, basis, edge.k1, edge.axis, +1, rule.nodes, rule.weights);
    FaceFunctionals f2 =
        face_functionals(mesh, basis, edge.k2, edge.axis, -1, rule.nodes, rule.weights);
    gather_cell(w, edge.k1, u1);
    gather_cell(w, edge.k2, u2);
    for (int q = 0; q < f1.nq; ++q) {
      FluxSample s;
      s.x = f1.x[q];
      s.weight = f1.w[q];
      const double v1 = f1.value[q].dot(u1), v2 = f2.value[q].dot(u2);
      s.jump = v2 - v1;
      s.average = 0.5 * (v1 + v2);
      s.dn1 = f1.dn[q].dot(u1);
      s.dn2 = f2.dn[q].dot(u2);
      const double d2 = f2.dn2[q].dot(u2) - f1.dn2[q].dot(u1);
      s.flux_hat = cfg.beta0 * s.jump / edge.h_e + 0.5 * (s.dn1 + s.dn2) + cfg.beta1 * edge.h_e * d2;
      out.push_back(s);
    }
  } else {
    const FaceBc& bc = cfg.bc.faces[edge.boundary_face];
    if (bc.type == BcType::periodic)
      throw std::invalid_argument("ddg_flux_terms: boundary edge carries no usable tag");
    const int side = (edge.boundary_face % 2 == 0) ? -1 : +1;
    FaceFunctionals f1 =
        face_functionals(mesh, basis, edge.k1, edge.axis, side, rule.nodes, rule.weights);
    gather_cell(w, edge.k1, u1);
    for (int q = 0; q < f1.nq; ++q) {
      FluxSample s;
      s.x = f1.x[q];
      s.weight = f1.w[q];
      const double v1 = f1.value[q].dot(u1);
      const double dn = side * f1.dn[q].dot(u1);
      if (bc.type == BcType::zero_flux) {
        s.jump = 0;
        s.average = v1;
        s.dn1 = s.dn2 = dn;
        s.flux_hat = 0;
      } else {
        const double g = bc.value ? bc.value(f1.x[q]) : 0.0;
        s.jump = g - v1;
        s.average = 0.5 * (g + v1);
        s.dn1 = s.dn2 = dn;
        s.flux_hat = cfg.beta0 * s.jump / edge.h_e + dn;
      }
      out.push_back(s);
    }
  }
  return out;
}

// coordinate-format text dump (row col value per line)
inline void write_matrix_coordinate(std::ostream& os, const Eigen::SparseMatrix<double>& A) {
  for (int k = 0; k < A.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it)
      os << it.row() << " " << it.col() << " " << it.value() << "\n";
}

}  // namespace pnp
