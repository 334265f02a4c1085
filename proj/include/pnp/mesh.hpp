// Uniform tensor-product meshes in 1D/2D with oriented edge topology.
//
// Periodic axes wrap the extreme faces into interior edges, so flux code
// never needs ghost cells. Edge normals are axis-aligned and oriented from
// cell K1 to cell K2; jumps are [w] = w|K2 - w|K1.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pnp {

struct Domain {
  int dim = 1;
  std::array<double, 2> lower{0.0, 0.0};
  std::array<double, 2> upper{1.0, 1.0};
  std::array<bool, 2> periodic{false, false};
};

inline Domain make_domain_1d(double lo, double hi, bool periodic = false) {
  Domain d;
  d.dim = 1;
  d.lower = {lo, 0.0};
  d.upper = {hi, 0.0};
  d.periodic = {periodic, false};
  return d;
}

inline Domain make_domain_2d(std::array<double, 2> lo, std::array<double, 2> hi,
                             std::array<bool, 2> periodic = {false, false}) {
  Domain d;
  d.dim = 2;
  d.lower = lo;
  d.upper = hi;
  d.periodic = periodic;
  return d;
}

struct Cell {
  std::array<int, 2> idx{0, 0};
  std::array<double, 2> lo{0, 0};
  std::array<double, 2> hi{0, 0};
  double measure = 0;
};

enum class EdgeKind { interior, boundary };

// Domain faces, used for boundary tagging: 2*axis + (1 if upper side).
enum Face : int { face_xmin = 0, face_xmax = 1, face_ymin = 2, face_ymax = 3 };

struct Edge {
  int index = -1;
  int axis = 0;  // normal direction
  EdgeKind kind = EdgeKind::interior;
  int k1 = -1, k2 = -1;    // k2 < 0 on boundary edges
  int boundary_face = -1;  // valid when kind == boundary
  double h_e = 0;          // cell extent along the normal axis
  // geometric location: the face lies at coord[axis] == pos; in 2D it spans
  // [tangent_lo, tangent_hi] along the other axis. For a periodic wrap edge
  // pos is the lower-boundary coordinate (the K2 side).
  double pos = 0;
  double tangent_lo = 0, tangent_hi = 0;
};

struct Mesh {
  Domain domain;
  std::array<int, 2> counts{1, 1};
  std::array<double, 2> dx{0, 0};
  std::vector<Cell> cells;
  std::vector<Edge> edges;
  double h = 0;  // mesh size: max cell diameter
  std::uint64_t id = 0;

  int dim() const { return domain.dim; }
  int cell_index(int ix, int iy = 0) const { return iy * counts[0] + ix; }
  double volume() const {
    double v = 1;
    for (int a = 0; a < domain.dim; ++a) v *= domain.upper[a] - domain.lower[a];
    return v;
  }
};

inline Mesh build_mesh(const Domain& domain, std::array<int, 2> counts) {
  if (domain.dim < 1 || domain.dim > 2) throw std::invalid_argument("build_mesh: dim must be 1 or 2");
  for (int a = 0; a < domain.dim; ++a) {
    if (!(domain.upper[a] > domain.lower[a]))
      throw std::invalid_argument("build_mesh: degenerate domain on axis " + std::to_string(a));
    if (counts[a] < 1)
      throw std::invalid_argument("build_mesh: cell count must be >= 1 on axis " + std::to_string(a));
  }
  Mesh mesh;
  mesh.domain = domain;
  mesh.counts = counts;
  if (domain.dim == 1) {
    mesh.counts[1] = 1;
    counts[1] = 1;
  }
  for (int a = 0; a < domain.dim; ++a)
    mesh.dx[a] = (domain.upper[a] - domain.lower[a]) / counts[a];

  static std::uint64_t next_id = 1;
  mesh.id = next_id++;

  const int nx = counts[0], ny = domain.dim == 2 ? counts[1] : 1;
  mesh.cells.reserve(static_cast<std::size_t>(nx) * ny);
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix) {
      Cell c;
      c.idx = {ix, iy};
      c.lo = {domain.lower[0] + ix * mesh.dx[0], domain.dim == 2 ? domain.lower[1] + iy * mesh.dx[1] : 0.0};
      c.hi = {c.lo[0] + mesh.dx[0], domain.dim == 2 ? c.lo[1] + mesh.dx[1] : 0.0};
      c.measure = mesh.dx[0] * (domain.dim == 2 ? mesh.dx[1] : 1.0);
      mesh.cells.push_back(c);
    }

  if (domain.dim == 1)
    mesh.h = mesh.dx[0];
  else
    mesh.h = std::sqrt(mesh.dx[0] * mesh.dx[0] + mesh.dx[1] * mesh.dx[1]);

  // Faces normal to each axis. Position p counts face planes along the axis.
  auto add_edge = [&mesh](Edge e) {
    e.index = static_cast<int>(mesh.edges.size());
    mesh.edges.push_back(e);
  };
  for (int axis = 0; axis < domain.dim; ++axis) {
    const int n_ax = counts[axis];
    const int tangent = 1 - axis;
    const int n_tan = domain.dim == 2 ? counts[tangent] : 1;
    const bool per = domain.periodic[axis];
    for (int p = 0; p <= (per ? n_ax - 1 : n_ax); ++p) {
      for (int t = 0; t < n_tan; ++t) {
        Edge e;
        e.axis = axis;
        e.h_e = mesh.dx[axis];
        e.pos = domain.lower[axis] + p * mesh.dx[axis];
        if (domain.dim == 2) {
          e.tangent_lo = domain.lower[tangent] + t * mesh.dx[tangent];
          e.tangent_hi = e.tangent_lo + mesh.dx[tangent];
        }
        auto cell_at = [&](int pos_ax) {
          int ix = axis == 0 ? pos_ax : t;
          int iy = axis == 0 ? t : pos_ax;
          return mesh.cell_index(ix, iy);
        };
        if (per && p == 0) {
          // wrap: K1 is the last cell's upper face, K2 the first cell's lower face
          e.kind = EdgeKind::interior;
          e.k1 = cell_at(n_ax - 1);
          e.k2 = cell_at(0);
        } else if (!per && p == 0) {
          e.kind = EdgeKind::boundary;
          e.k1 = cell_at(0);
          e.boundary_face = 2 * axis;
        } else if (!per && p == n_ax) {
          e.kind = EdgeKind::boundary;
          e.k1 = cell_at(n_ax - 1);
          e.boundary_face = 2 * axis + 1;
        } else {
          e.kind = EdgeKind::interior;
          e.k1 = cell_at(p - 1);
          e.k2 = cell_at(p);
        }
        add_edge(e);
      }
    }
  }
  return mesh;
}

// Which local face of each neighboring cell an edge is. side = +1 means the
// cell's upper face along the edge's normal axis. Side order matches the
// K1 -> K2 normal. On boundary edges only s1 is meaningful.
struct EdgeTrace {
  struct Side {
    int cell = -1;
    int axis = 0;
    int side = 0;  // +1 upper face, -1 lower face
  };
  Side s1, s2;
  bool boundary = false;
  int boundary_face = -1;
};

inline EdgeTrace edge_trace(const Mesh& mesh, const Edge& edge) {
  if (edge.index < 0 || edge.index >= static_cast<int>(mesh.edges.size()))
    throw std::invalid_argument("edge_trace: edge does not belong to this mesh");
  const Edge& own = mesh.edges[edge.index];
  if (own.axis != edge.axis || own.k1 != edge.k1 || own.k2 != edge.k2)
    throw std::invalid_argument("edge_trace: edge does not belong to this mesh");
  EdgeTrace tr;
  tr.s1 = {edge.k1, edge.axis, +1};
  if (edge.kind == EdgeKind::interior) {
    tr.s2 = {edge.k2, edge.axis, -1};
  } else {
    tr.boundary = true;
    tr.boundary_face = edge.boundary_face;
    tr.s1.side = (edge.boundary_face % 2 == 0) ? -1 : +1;
  }
  return tr;
}

// Boundary conditions, attached per variable and per domain face.
enum class BcType { zero_flux, dirichlet, periodic };

using SpaceFn = std::function<double(const std::array<double, 2>&)>;

struct FaceBc {
  BcType type = BcType::zero_flux;
  SpaceFn value;  // Dirichlet data; null means homogeneous
};

struct VariableBc {
  std::array<FaceBc, 4> faces{};

  bool any_dirichlet(int dim) const {
    for (int f = 0; f < 2 * dim; ++f)
      if (faces[f].type == BcType::dirichlet) return true;
    return false;
  }
};

}  // namespace pnp
