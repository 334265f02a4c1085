// Run diagnostics: masses, discrete energy, positivity trackers, error
// norms and gradient superconvergence metrics, convergence-rate tables.
#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "pnp/forms.hpp"
#include "pnp/integrator.hpp"

namespace pnp {

struct DiagnosticsRecord {
  double t = 0;
  std::vector<double> mass;          // exact integral per species
  double energy_lumped = 0;
  double energy_exact = 0;
  std::vector<double> min_cell_avg;  // per species
  std::vector<double> min_node;      // per species
  int newton_iters = 0;
  int limiter_hits = 0;
  double dissipation = 0;            // step dissipation leading to this record
};

// Exact integral of a piecewise polynomial field.
inline double total_mass(const Mesh& mesh, const NodalBasis& basis, const Field& f) {
  const DofLayout& layout = *f.layout;
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
      acc += w * eval_field(mesh, basis, f, cell, ref);
    }
  }
  return acc;
}

// Entropy-plus-field energy of a state. The lumped variant pairs the nodal
// entropy with the collocation weights and uses the quadratic form of the
// potential operator; the exact variant integrates the polynomial field
// (entropy integrand clamped where the polynomial dips nonpositive between
// nodes, since it is a reporting quantity only).
inline double discrete_energy(const Mesh& mesh, const NodalBasis& basis, const SystemState& state,
                              const AssembledForm& phi_form, const Eigen::VectorXd& lumped,
                              double epsilon = 1.0) {
  double e = 0;
  for (const Field& c : state.c) {
    if (c.values.minCoeff() <= 0.0)
      throw std::runtime_error("discrete_energy: nonpositive nodal concentration");
    e += (lumped.array() * c.values.array() * c.values.array().log()).sum();
  }
  e += 0.5 * state.phi.values.dot(phi_form.matrix * state.phi.values);
  (void)epsilon;  // the dielectric is already folded into phi_form
  return e;
}

inline double discrete_energy_exact(const Mesh& mesh, const NodalBasis& basis,
                                    const SystemState& state,
                                    const AssembledForm& phi_form_exact) {
  const DofLayout& layout = *state.phi.layout;
  const int dim = mesh.dim();
  QuadRule gq = gauss_rule(layout.k + 2);
  const int nq1 = layout.k + 2;
  const int nq = dim == 2 ? nq1 * nq1 : nq1;
  double e = 0;
  for (const Field& c : state.c) {
    for (int cell = 0; cell < static_cast<int>(mesh.cells.size()); ++cell) {
      for (int q = 0; q < nq; ++q) {
        const int qa = q % nq1, qb = q / nq1;
        std::array<double, 2> ref{gq.nodes[qa], dim == 2 ? gq.nodes[qb] : 0.0};
        double w = 0.5 * mesh.dx[0] * gq.weights[qa];
        if (dim == 2) w *= 0.5 * mesh.dx[1] * gq.weights[qb];
        double v = eval_field(mesh, basis, c, cell, ref);
        if (v > 0) e += w * v * std::log(v);
      }
    }
  }
  e += 0.5 * state.phi.values.dot(phi_form_exact.matrix * state.phi.values);
  return e;
}

struct PositivityReport {
  std::vector<double> min_cell_avg;
  std::vector<double> min_node;
};

inline PositivityReport positivity_report(const Mesh& mesh, const NodalBasis& basis,
                                          const SystemState& state) {
  PositivityReport rep;
  for (const Field& c : state.c) {
    const DofLayout& layout = *c.layout;
    double mn = std::numeric_limits<double>::infinity();
    double mavg = std::numeric_limits<double>::infinity();
    for (int cell = 0; cell < static_cast<int>(mesh.cells.size()); ++cell) {
      double avg = 0;
      for (int loc = 0; loc < layout.per_cell; ++loc) {
        const double v = c.values[layout.global_index(cell, loc)];
        mn = std::min(mn, v);
        avg += node_weight(mesh, basis, cell, loc) * v;
      }
      mavg = std::min(mavg, avg / mesh.cells[cell].measure);
    }
    rep.min_node.push_back(mn);
    rep.min_cell_avg.push_back(mavg);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// error norms against a known solution

inline double error_l2(const Mesh& mesh, const NodalBasis& basis, const Field& vh,
                       const SpaceFn& v) {
  const DofLayout& layout = *vh.layout;
  const int dim = mesh.dim();
  QuadRule gq = gauss_rule(layout.k + 2);
  const int nq1 = layout.k + 2;
  const int nq = dim == 2 ? nq1 * nq1 : nq1;
  double acc = 0;
  for (int cell = 0; cell < static_cast<int>(mesh.cells.size()); ++cell) {
    const Cell& c = mesh.cells[cell];
    for (int q = 0; q < nq; ++q) {
      const int qa = q % nq1, qb = q / nq1;
      std::array<double, 2> ref{gq.nodes[qa], dim == 2 ? gq.nodes[qb] : 0.0};
      double w = 0.5 * mesh.dx[0] * gq.weights[qa];
      if (dim == 2) w *= 0.5 * mesh.dx[1] * gq.weights[qb];
      std::array<double, 2> x{c.lo[0] + 0.5 * (ref[0] + 1) * mesh.dx[0],
                              dim == 2 ? c.lo[1] + 0.5 * (ref[1] + 1) * mesh.dx[1] : 0.0};
      const double d = eval_field(mesh, basis, vh, cell, ref) - v(x);
      acc += w * d * d;
    }
  }
  return std::sqrt(acc);
}

// Energy-norm distance between the collocation interpolant of v and vh.
inline double error_energy_projection(const Mesh& mesh, const NodalBasis& basis, const Field& vh,
                                      const SpaceFn& v) {
  Field ih = interpolate(mesh, basis, *vh.layout, v);
  Field diff(*vh.layout);
  diff.values = ih.values - vh.values;
  return energy_norm(mesh, basis, diff);
}

// Cell-averaged gradient error: the Euclidean norm of each cell's vector of
// gradient-error integrals, averaged over cells.
inline double metric_eA(const Mesh& mesh, const NodalBasis& basis, const Field& vh,
                        const SpaceFn& grad_x, const SpaceFn& grad_y) {
  const DofLayout& layout = *vh.layout;
  const int dim = mesh.dim();
  QuadRule gq = gauss_rule(layout.k + 2);
  const int nq1 = layout.k + 2;
  const int nq = dim == 2 ? nq1 * nq1 : nq1;
  double acc = 0;
  for (int cell = 0; cell < static_cast<int>(mesh.cells.size()); ++cell) {
    const Cell& c = mesh.cells[cell];
    std::array<double, 2> cell_int{0, 0};
    for (int q = 0; q < nq; ++q) {
      const int qa = q % nq1, qb = q / nq1;
      std::array<double, 2> ref{gq.nodes[qa], dim == 2 ? gq.nodes[qb] : 0.0};
      double w = 0.5 * mesh.dx[0] * gq.weights[qa];
      if (dim == 2) w *= 0.5 * mesh.dx[1] * gq.weights[qb];
      std::array<double, 2> x{c.lo[0] + 0.5 * (ref[0] + 1) * mesh.dx[0],
                              dim == 2 ? c.lo[1] + 0.5 * (ref[1] + 1) * mesh.dx[1] : 0.0};
      std::array<double, 2> gh{0, 0};
      eval_field(mesh, basis, vh, cell, ref, &gh);
      cell_int[0] += w * (grad_x(x) - gh[0]);
      if (dim == 2) cell_int[1] += w * (grad_y(x) - gh[1]);
    }
    acc += cell_int[0] * cell_int[0] + cell_int[1] * cell_int[1];
  }
  return std::sqrt(acc / static_cast<double>(mesh.cells.size()));
}

// Pointwise gradient error sampled on the per-cell tensor grid of k Gauss
// points per axis, root-mean-squared over all sample points.
inline double metric_eG(const Mesh& mesh, const NodalBasis& basis, const Field& vh,
                        const SpaceFn& grad_x, const SpaceFn& grad_y) {
  const DofLayout& layout = *vh.layout;
  const int dim = mesh.dim();
  QuadRule gq = gauss_rule(layout.k);
  const int nq1 = layout.k;
  const int nq = dim == 2 ? nq1 * nq1 : nq1;
  double acc = 0;
  long count = 0;
  for (int cell = 0; cell < static_cast<int>(mesh.cells.size()); ++cell) {
    const Cell& c = mesh.cells[cell];
    for (int q = 0; q < nq; ++q) {
      const int qa = q % nq1, qb = q / nq1;
      std::array<double, 2> ref{gq.nodes[qa], dim == 2 ? gq.nodes[qb] : 0.0};
      std::array<double, 2> x{c.lo[0] + 0.5 * (ref[0] + 1) * mesh.dx[0],
                              dim == 2 ? c.lo[1] + 0.5 * (ref[1] + 1) * mesh.dx[1] : 0.0};
      std::array<double, 2> gh{0, 0};
      eval_field(mesh, basis, vh, cell, ref, &gh);
      double dx0 = grad_x(x) - gh[0];
      double dy0 = dim == 2 ? grad_y(x) - gh[1] : 0.0;
      acc += dx0 * dx0 + dy0 * dy0;
      ++count;
    }
  }
  return std::sqrt(acc / static_cast<double>(count));
}

// ---------------------------------------------------------------------------
// convergence tables

struct ConvergenceTable {
  std::vector<int> resolutions;
  std::vector<std::string> metrics;
  // errors[row][metric]
  std::vector<std::vector<double>> errors;
  // orders[row][metric] for rows >= 1: log2(e_{N}/e_{2N})
  std::vector<std::vector<double>> orders;

  double last_order(const std::string& metric) const {
    for (std::size_t m = 0; m < metrics.size(); ++m)
      if (metrics[m] == metric) {
        if (orders.size() < 2) return std::numeric_limits<double>::quiet_NaN();
        return orders.back()[m];
      }
    return std::numeric_limits<double>::quiet_NaN();
  }

  double error_at(int resolution, const std::string& metric) const {
    for (std::size_t r = 0; r < resolutions.size(); ++r)
      if (resolutions[r] == resolution)
        for (std::size_t m = 0; m < metrics.size(); ++m)
          if (metrics[m] == metric) return errors[r][m];
    return std::numeric_limits<double>::quiet_NaN();
  }
};

inline ConvergenceTable rate_table(const std::vector<int>& resolutions,
                                   const std::vector<std::string>& metrics,
                                   const std::vector<std::vector<double>>& errors) {
  for (std::size_t r = 1; r < resolutions.size(); ++r)
    if (resolutions[r] != 2 * resolutions[r - 1])
      throw std::invalid_argument("rate_table: resolutions must double between rows");
  ConvergenceTable table;
  table.resolutions = resolutions;
  table.metrics = metrics;
  table.errors = errors;
  table.orders.resize(errors.size());
  for (std::size_t r = 0; r < errors.size(); ++r) {
    table.orders[r].assign(metrics.size(), std::numeric_limits<double>::quiet_NaN());
    if (r == 0) continue;
    for (std::size_t m = 0; m < metrics.size(); ++m) {
      const double e0 = errors[r - 1][m], e1 = errors[r][m];
      if (e0 > 0 && e1 > 0)
        table.orders[r][m] = std::log2(e0 / e1);
      else if (e0 == 0 && e1 == 0)
        table.orders[r][m] = 0.0;
    }
  }
  return table;
}

}  // namespace pnp
