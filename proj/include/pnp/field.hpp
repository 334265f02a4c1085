// A scalar unknown: one coefficient per global DoF, holding the nodal value
// at the associated Gauss-Lobatto point.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "pnp/dof_layout.hpp"

namespace pnp {

struct Field {
  const DofLayout* layout = nullptr;
  Eigen::VectorXd values;

  Field() = default;
  explicit Field(const DofLayout& l) : layout(&l), values(Eigen::VectorXd::Zero(l.total)) {}
};

inline void check_same_layout(const Field& a, const Field& b) {
  if (a.layout == nullptr || b.layout == nullptr || a.layout->total != b.layout->total ||
      a.layout->mode != b.layout->mode || a.layout->mesh_id != b.layout->mesh_id)
    throw std::invalid_argument("fields use different DoF layouts");
}

// Extract the cell-local nodal values of a field.
inline void gather_cell(const Field& f, int cell, Eigen::VectorXd& out) {
  const DofLayout& l = *f.layout;
  out.resize(l.per_cell);
  for (int loc = 0; loc < l.per_cell; ++loc) out[loc] = f.values[l.global_index(cell, loc)];
}

// Evaluate a field (and optionally its physical gradient) inside a cell at a
// reference point.
inline double eval_field(const Mesh& mesh, const NodalBasis& basis, const Field& f, int cell,
                         const std::array<double, 2>& ref, std::array<double, 2>* grad = nullptr) {
  const DofLayout& l = *f.layout;
  TensorEval te = basis_eval(basis, mesh.dim(), ref);
  double v = 0;
  std::array<double, 2> g{0, 0};
  for (int loc = 0; loc < l.per_cell; ++loc) {
    double c = f.values[l.global_index(cell, loc)];
    v += c * te.value[loc];
    if (grad)
      for (int a = 0; a < mesh.dim(); ++a) g[a] += c * te.grad[a][loc];
  }
  if (grad) {
    for (int a = 0; a < mesh.dim(); ++a) (*grad)[a] = g[a] * 2.0 / mesh.dx[a];
  }
  return v;
}

// Gauss-Lobatto interpolation: sample f at every physical collocation point.
// Shared nodes of the continuous layout are sampled once.
inline Field interpolate(const Mesh& mesh, const NodalBasis& basis, const DofLayout& layout,
                         const SpaceFn& f) {
  Field out(layout);
  std::vector<char> seen(layout.total, 0);
  for (int cell = 0; cell < static_cast<int>(mesh.cells.size()); ++cell) {
    for (int loc = 0; loc < layout.per_cell; ++loc) {
      int g = layout.global_index(cell, loc);
      if (seen[g]) continue;
      seen[g] = 1;
      double v = f(node_position(mesh, basis, cell, loc));
      if (!std::isfinite(v)) throw std::runtime_error("interpolate: non-finite sample value");
      out.values[g] = v;
    }
  }
  return out;
}

}  // namespace pnp
