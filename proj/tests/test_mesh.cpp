#include <catch2/catch_amalgamated.hpp>

#include "pnp/forms.hpp"

using namespace pnp;

namespace {
int count_edges(const Mesh& m, EdgeKind kind) {
  int n = 0;
  for (const Edge& e : m.edges)
    if (e.kind == kind) ++n;
  return n;
}
}  // namespace

TEST_CASE("periodic interval: four cells, four interior edges", "[mesh]") {
  Mesh m = build_mesh(make_domain_1d(0, 1, true), {4, 1});
  REQUIRE(m.cells.size() == 4);
  REQUIRE(count_edges(m, EdgeKind::interior) == 4);
  REQUIRE(count_edges(m, EdgeKind::boundary) == 0);
}

TEST_CASE("2x2 square: four interior and eight boundary edges", "[mesh]") {
  Mesh m = build_mesh(make_domain_2d({0, 0}, {1, 1}), {2, 2});
  REQUIRE(m.cells.size() == 4);
  REQUIRE(count_edges(m, EdgeKind::interior) == 4);
  REQUIRE(count_edges(m, EdgeKind::boundary) == 8);
}

TEST_CASE("cell measures partition the domain", "[mesh]") {
  Mesh m = build_mesh(make_domain_2d({0, 0}, {M_PI, M_PI}), {5, 5});
  double sum = 0;
  for (const Cell& c : m.cells) sum += c.measure;
  REQUIRE(sum == Catch::Approx(M_PI * M_PI).epsilon(1e-14));
}

TEST_CASE("degenerate input is rejected", "[mesh]") {
  REQUIRE_THROWS_AS(build_mesh(make_domain_1d(0, 1), {0, 1}), std::invalid_argument);
  REQUIRE_THROWS_AS(build_mesh(make_domain_1d(1, 1), {4, 1}), std::invalid_argument);
  REQUIRE_THROWS_AS(build_mesh(make_domain_2d({0, 0}, {1, -1}), {2, 2}), std::invalid_argument);
}

TEST_CASE("interior edges reference two distinct cells; wrap follows the cell order", "[mesh]") {
  Mesh m = build_mesh(make_domain_1d(0, 1, true), {4, 1});
  for (const Edge& e : m.edges) {
    REQUIRE(e.k1 != e.k2);
    REQUIRE(e.k1 >= 0);
    REQUIRE(e.k2 >= 0);
  }
  // the wrap edge at x=0 joins the last cell's right face to the first cell's left face
  const Edge& wrap = m.edges[0];
  REQUIRE(wrap.pos == Catch::Approx(0.0));
  REQUIRE(wrap.k1 == 3);
  REQUIRE(wrap.k2 == 0);
  EdgeTrace tr = edge_trace(m, wrap);
  REQUIRE(tr.s1.side == +1);
  REQUIRE(tr.s2.side == -1);
}

TEST_CASE("vertical interior edge: east face of the left cell, west of the right", "[mesh]") {
  Mesh m = build_mesh(make_domain_2d({0, 0}, {1, 1}), {2, 2});
  for (const Edge& e : m.edges) {
    if (e.kind != EdgeKind::interior || e.axis != 0) continue;
    EdgeTrace tr = edge_trace(m, e);
    REQUIRE(tr.s1.cell == e.k1);
    REQUIRE(tr.s1.axis == 0);
    REQUIRE(tr.s1.side == +1);
    REQUIRE(tr.s2.cell == e.k2);
    REQUIRE(tr.s2.side == -1);
    REQUIRE(m.cells[e.k2].idx[0] == m.cells[e.k1].idx[0] + 1);
  }
}

TEST_CASE("boundary edges expose single-sided traces with a face tag", "[mesh]") {
  Mesh m = build_mesh(make_domain_1d(0, 1), {3, 1});
  int boundary_seen = 0;
  for (const Edge& e : m.edges) {
    if (e.kind != EdgeKind::boundary) continue;
    ++boundary_seen;
    EdgeTrace tr = edge_trace(m, e);
    REQUIRE(tr.boundary);
    REQUIRE(tr.boundary_face == e.boundary_face);
    REQUIRE((e.boundary_face == face_xmin || e.boundary_face == face_xmax));
  }
  REQUIRE(boundary_seen == 2);
}

TEST_CASE("foreign edges are rejected", "[mesh]") {
  Mesh a = build_mesh(make_domain_1d(0, 1), {3, 1});
  Mesh b = build_mesh(make_domain_1d(0, 1), {5, 1});
  Edge foreign = b.edges[4];
  REQUIRE_THROWS_AS(edge_trace(a, foreign), std::invalid_argument);
}

TEST_CASE("each cell boundary is covered exactly once by the edge set", "[mesh]") {
  Mesh m = build_mesh(make_domain_2d({0, 0}, {1, 1}, {true, false}), {3, 2});
  // every cell must appear with each of its 4 faces exactly once across edges
  std::vector<std::array<int, 4>> seen(m.cells.size(), {0, 0, 0, 0});
  for (const Edge& e : m.edges) {
    EdgeTrace tr = edge_trace(m, e);
    auto mark = [&](int cell, int axis, int side) { ++seen[cell][2 * axis + (side > 0 ? 1 : 0)]; };
    mark(tr.s1.cell, tr.s1.axis, tr.s1.side);
    if (e.kind == EdgeKind::interior) mark(tr.s2.cell, tr.s2.axis, tr.s2.side);
  }
  for (const auto& faces : seen)
    for (int f = 0; f < 4; ++f) REQUIRE(faces[f] == 1);
}

TEST_CASE("continuous fields have zero jump and matching average on every edge", "[mesh]") {
  Mesh m = build_mesh(make_domain_2d({0, 0}, {1, 1}, {true, true}), {3, 3});
  NodalBasis basis(2);
  DofLayout layout = make_layout(m, 2, Continuity::cell_local);
  // a globally smooth periodic function sampled per cell is continuous at faces
  Field w = interpolate(m, basis, layout, [](const std::array<double, 2>& x) {
    return std::sin(2 * M_PI * x[0]) * std::cos(2 * M_PI * x[1]);
  });
  FormConfig cfg;
  cfg.method = Method::ddg;
  for (const Edge& e : m.edges) {
    for (const FluxSample& s : ddg_flux_terms(m, basis, w, e, cfg)) {
      REQUIRE(s.jump == Catch::Approx(0.0).margin(1e-12));
      REQUIRE(s.flux_hat == Catch::Approx(0.5 * (s.dn1 + s.dn2)).margin(1e-12));
    }
  }
}
