// Mapping from (cell, local node) to global degrees of freedom.
//
// continuous: Gauss-Lobatto nodes shared by neighboring cells (and periodic
//             images) collapse to one global index, giving the C^0 space.
// cell_local: every cell owns its nodes, giving the discontinuous space.
#pragma once

#include <array>
#include <stdexcept>

#include "pnp/basis.hpp"
#include "pnp/mesh.hpp"

namespace pnp {

enum class Continuity { continuous, cell_local };

struct DofLayout {
  Continuity mode = Continuity::cell_local;
  int dim = 1;
  int k = 1;
  std::array<int, 2> cells{1, 1};
  std::array<int, 2> nodes_per_axis{0, 0};  // continuous mode only
  std::array<bool, 2> periodic{false, false};
  int per_cell = 0;
  int total = 0;
  std::uint64_t mesh_id = 0;

  // loc is lexicographic with the x node index fastest
  int global_index(int cell, int loc) const {
    if (mode == Continuity::cell_local) return cell * per_cell + loc;
    const int n = k + 1;
    const int a = loc % n;
    const int cx = cell % cells[0];
    int ix = cx * k + a;
    if (periodic[0]) ix %= nodes_per_axis[0];
    if (dim == 1) return ix;
    const int b = loc / n;
    const int cy = cell / cells[0];
    int iy = cy * k + b;
    if (periodic[1]) iy %= nodes_per_axis[1];
    return iy * nodes_per_axis[0] + ix;
  }
};

inline DofLayout make_layout(const Mesh& mesh, int k, Continuity mode) {
  if (k < 1) throw std::invalid_argument("make_layout: order must be >= 1");
  DofLayout layout;
  layout.mode = mode;
  layout.dim = mesh.dim();
  layout.k = k;
  layout.cells = {mesh.counts[0], mesh.dim() == 2 ? mesh.counts[1] : 1};
  layout.periodic = mesh.domain.periodic;
  const int n = k + 1;
  layout.per_cell = mesh.dim() == 2 ? n * n : n;
  if (mode == Continuity::cell_local) {
    layout.total = static_cast<int>(mesh.cells.size()) * layout.per_cell;
  } else {
    for (int a = 0; a < mesh.dim(); ++a)
      layout.nodes_per_axis[a] = layout.cells[a] * k + (layout.periodic[a] ? 0 : 1);
    layout.total = layout.nodes_per_axis[0] * (mesh.dim() == 2 ? layout.nodes_per_axis[1] : 1);
  }
  layout.mesh_id = mesh.id;
  return layout;
}

// Physical coordinate of a cell-local collocation node.
inline std::array<double, 2> node_position(const Mesh& mesh, const NodalBasis& basis, int cell,
                                           int loc) {
  const Cell& c = mesh.cells[cell];
  const int n = basis.num_nodes();
  const int a = loc % n;
  std::array<double, 2> x{0, 0};
  x[0] = c.lo[0] + 0.5 * (basis.nodes()[a] + 1.0) * (c.hi[0] - c.lo[0]);
  if (mesh.dim() == 2) {
    const int b = loc / n;
    x[1] = c.lo[1] + 0.5 * (basis.nodes()[b] + 1.0) * (c.hi[1] - c.lo[1]);
  }
  return x;
}

// Lumped quadrature weight of a cell-local collocation node (physical scale).
inline double node_weight(const Mesh& mesh, const NodalBasis& basis, int cell, int loc) {
  const int n = basis.num_nodes();
  const int a = loc % n;
  double w = 0.5 * mesh.dx[0] * basis.weights()[a];
  if (mesh.dim() == 2) {
    const int b = loc / n;
    w *= 0.5 * mesh.dx[1] * basis.weights()[b];
  }
  return w;
}

}  // namespace pnp
