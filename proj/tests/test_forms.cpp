#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "pnp/diagnostics.hpp"
#include "pnp/problems.hpp"

using namespace pnp;

namespace {

Field random_field(const DofLayout& layout, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> uni(lo, hi);
  Field f(layout);
  for (int i = 0; i < layout.total; ++i) f.values[i] = uni(rng);
  return f;
}

}  // namespace

TEST_CASE("lumped product of ones gives the domain measure", "[forms]") {
  Mesh mesh = build_mesh(make_domain_2d({0, 0}, {2, 3}), {4, 3});
  NodalBasis basis(2);
  for (Continuity mode : {Continuity::cell_local, Continuity::continuous}) {
    DofLayout layout = make_layout(mesh, 2, mode);
    Field one(layout);
    one.values.setOnes();
    REQUIRE(lumped_inner(one, one, mesh, basis) == Catch::Approx(6.0).epsilon(1e-14));
  }
}

TEST_CASE("lumped product is positive definite on nodal values", "[forms]") {
  Mesh mesh = build_mesh(make_domain_1d(0, 1), {3, 1});
  NodalBasis basis(2);
  DofLayout layout = make_layout(mesh, 2, Continuity::cell_local);
  Field v(layout);
  v.values[4] = 0.3;
  REQUIRE(lumped_inner(v, v, mesh, basis) > 0.0);
}

TEST_CASE("lumped product integrates low-degree products exactly", "[forms]") {
  // order 2: products of per-axis degree <= 3 match the exact integral
  Mesh mesh = build_mesh(make_domain_1d(0, 1), {5, 1});
  NodalBasis basis(2);
  DofLayout layout = make_layout(mesh, 2, Continuity::cell_local);
  auto f = [](const std::array<double, 2>& x) { return 1.0 + 2.0 * x[0]; };          // degree 1
  auto g = [](const std::array<double, 2>& x) { return x[0] * x[0] - 0.25 * x[0]; }; // degree 2
  Field gh = interpolate(mesh, basis, layout, g);
  const double lumped = lumped_inner(f, gh, mesh, basis);
  // oracle: high-order Gauss quadrature of the product
  QuadRule gq = gauss_rule(8);
  double exact = 0;
  for (int cell = 0; cell < 5; ++cell)
    for (int q = 0; q < 8; ++q) {
      const double x = mesh.cells[cell].lo[0] + 0.5 * (gq.nodes[q] + 1) * mesh.dx[0];
      exact += 0.5 * mesh.dx[0] * gq.weights[q] * f({x, 0}) * g({x, 0});
    }
  REQUIRE(lumped == Catch::Approx(exact).margin(1e-13));
}

TEST_CASE("layout mismatch is rejected", "[forms]") {
  Mesh mesh = build_mesh(make_domain_1d(0, 1), {3, 1});
  NodalBasis basis(1);
  DofLayout a = make_layout(mesh, 1, Continuity::cell_local);
  DofLayout b = make_layout(mesh, 1, Continuity::continuous);
  Field fa(a), fb(b);
  REQUIRE_THROWS_AS(lumped_inner(fa, fb, mesh, basis), std::invalid_argument);
}

TEST_CASE("flux traces respond linearly to the jump penalty", "[forms]") {
  Mesh mesh = build_mesh(make_domain_1d(0, 1, true), {4, 1});
  NodalBasis basis(2);
  DofLayout layout = make_layout(mesh, 2, Continuity::cell_local);
  std::mt19937_64 rng(11);
  Field w = random_field(layout, rng);
  FormConfig cfg;
  cfg.method = Method::ddg;
  cfg.beta0 = 2.0;
  cfg.beta1 = 0.0;
  FormConfig cfg2 = cfg;
  cfg2.beta0 = 4.0;
  for (const Edge& e : mesh.edges) {
    auto s1 = ddg_flux_terms(mesh, basis, w, e, cfg);
    auto s2 = ddg_flux_terms(mesh, basis, w, e, cfg2);
    for (std::size_t q = 0; q < s1.size(); ++q) {
      const double pen1 = s1[q].flux_hat - 0.5 * (s1[q].dn1 + s1[q].dn2);
      const double pen2 = s2[q].flux_hat - 0.5 * (s2[q].dn1 + s2[q].dn2);
      REQUIRE(pen2 == Catch::Approx(2.0 * pen1).margin(1e-13));
    }
  }
}

TEST_CASE("order-1 fields carry no second-derivative flux term", "[forms]") {
  Mesh mesh = build_mesh(make_domain_2d({0, 0}, {1, 1}, {true, true}), {3, 3});
  NodalBasis basis(1);
  DofLayout layout = make_layout(mesh, 1, Continuity::cell_local);
  std::mt19937_64 rng(5);
  Field w = random_field(layout, rng);
  FormConfig a;
  a.method = Method::ddg;
  a.beta0 = 3.0;
  a.beta1 = 0.0;
  FormConfig b = a;
  b.beta1 = 10.0;
  for (const Edge& e : mesh.edges) {
    auto sa = ddg_flux_terms(mesh, basis, w, e, a);
    auto sb = ddg_flux_terms(mesh, basis, w, e, b);
    for (std::size_t q = 0; q < sa.size(); ++q)
      REQUIRE(sa[q].flux_hat == Catch::Approx(sb[q].flux_hat).margin(1e-13));
  }
}

TEST_CASE("assembled forms annihilate constants under natural/periodic boundaries", "[forms]") {
  for (Method method : {Method::ddg, Method::fem}) {
    Mesh mesh = build_mesh(make_domain_2d({0, 0}, {1, 1}, {true, true}), {3, 3});
    NodalBasis basis(2);
    DofLayout layout = make_layout(
        mesh, 2, method == Method::fem ? Continuity::continuous : Continuity::cell_local);
    FormConfig cfg;
    cfg.method = method;
    cfg.beta0 = 4.0;
    cfg.beta1 = 1.0 / 12.0;
    Field psi = interpolate(mesh, basis, layout, [](const std::array<double, 2>& x) {
      return 1.0 + 0.3 * std::sin(2 * M_PI * x[0]) * std::cos(2 * M_PI * x[1]);
    });
    AssembledForm form = assemble_form(mesh, basis, layout, psi, cfg);
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(layout.total);
    REQUIRE((form.matrix * ones).lpNorm<Eigen::Infinity>() < 1e-12);
    if (cfg.beta1 == 0.0)
      REQUIRE((form.matrix.transpose() * ones).lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("symmetric when the second-derivative penalty vanishes", "[forms]") {
  Mesh mesh = build_mesh(make_domain_1d(0, 1, true), {6, 1});
  NodalBasis basis(3);
  DofLayout layout = make_layout(mesh, 3, Continuity::cell_local);
  FormConfig cfg;
  cfg.method = Method::ddg;
  cfg.beta0 = 8.0;
  cfg.beta1 = 0.0;
  std::mt19937_64 rng(23);
  Field psi = random_field(layout, rng, 0.5, 2.0);
  AssembledForm form = assemble_form(mesh, basis, layout, psi, cfg);
  REQUIRE(relative_asymmetry(form.matrix) < 1e-12);
  cfg.beta1 = 1.0 / 24.0;
  AssembledForm skew = assemble_form(mesh, basis, layout, psi, cfg);
  REQUIRE(relative_asymmetry(skew.matrix) > 1e-8);
}

TEST_CASE("coercivity holds across random draws under the stability condition", "[forms]") {
  std::mt19937_64 rng(37);
  for (int k : {1, 2}) {
    Mesh mesh = build_mesh(make_domain_1d(0, 1, true), {5, 1});
    NodalBasis basis(k);
    DofLayout layout = make_layout(mesh, k, Continuity::cell_local);
    Field psi = interpolate(mesh, basis, layout, [](const std::array<double, 2>& x) {
      return 1.0 + 0.4 * std::cos(2 * M_PI * x[0]);
    });
    MobilityBounds bounds(0.6, 1.4);
    FormConfig cfg;
    cfg.method = Method::ddg;
    cfg.beta1 = 0.0;
    cfg.beta0 = 1.05 * bounds.psi1 / bounds.psi0 * gamma_of_beta1(k, 0.0);
    REQUIRE(check_stability(cfg.beta0, cfg.beta1, k, bounds));
    AssembledForm form = assemble_form(mesh, basis, layout, psi, cfg);
    double min_ratio = std::numeric_limits<double>::infinity();
    for (int s = 0; s < 100; ++s) {
      Field v = random_field(layout, rng);
      const double en = energy_norm(mesh, basis, v);
      if (en < 1e-12) continue;
      min_ratio = std::min(min_ratio, v.values.dot(form.matrix * v.values) / (en * en));
    }
    REQUIRE(min_ratio > 0.0);
  }
}

TEST_CASE("nonpositive mobility is rejected; unstable penalties only warn", "[forms]") {
  Mesh mesh = build_mesh(make_domain_1d(0, 1, true), {4, 1});
  NodalBasis basis(1);
  DofLayout layout = make_layout(mesh, 1, Continuity::cell_local);
  Field psi(layout);
  psi.values.setOnes();
  psi.values[3] = 0.0;
  FormConfig cfg;
  cfg.method = Method::ddg;
  REQUIRE_THROWS_AS(assemble_form(mesh, basis, layout, psi, cfg), std::invalid_argument);
  psi.values[3] = 1.0;
  cfg.beta0 = 0.1;  // below the threshold
  AssembledForm form = assemble_form(mesh, basis, layout, psi, cfg);
  REQUIRE_FALSE(form.stability_ok);
}

TEST_CASE("exact volume form matches the hand stiffness for hat functions", "[forms]") {
  // order 1 on [0,1] with two cells: interior-node stiffness 2/h, neighbors -1/h
  Mesh mesh = build_mesh(make_domain_1d(0, 1), {2, 1});
  NodalBasis basis(1);
  DofLayout layout = make_layout(mesh, 1, Continuity::continuous);
  FormConfig cfg;
  cfg.method = Method::fem;
  AssembledForm form = assemble_exact_form(mesh, basis, layout, 1.0, cfg);
  Eigen::MatrixXd A = Eigen::MatrixXd(form.matrix);
  const double h = 0.5;
  REQUIRE(A(0, 0) == Catch::Approx(1.0 / h).epsilon(1e-13));
  REQUIRE(A(1, 1) == Catch::Approx(2.0 / h).epsilon(1e-13));
  REQUIRE(A(0, 1) == Catch::Approx(-1.0 / h).epsilon(1e-13));
  REQUIRE(A(2, 1) == Catch::Approx(-1.0 / h).epsilon(1e-13));
}

TEST_CASE("constant fields give zero rows in both form variants", "[forms]") {
  Mesh mesh = build_mesh(make_domain_1d(0, 1, true), {4, 1});
  NodalBasis basis(2);
  DofLayout layout = make_layout(mesh, 2, Continuity::cell_local);
  FormConfig cfg;
  cfg.method = Method::ddg;
  cfg.beta0 = 4;
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(layout.total);
  for (bool exact : {false, true}) {
    AssembledForm f = exact ? assemble_exact_form(mesh, basis, layout, 1.0, cfg)
                            : assemble_form(mesh, basis, layout, 1.0, cfg);
    REQUIRE((f.matrix * ones).lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("collocated and exact forms converge together at one order past k", "[forms]") {
  // smooth mobility and data: |a(u,v) - a~(u,v)| should decay at >= k+1
  const int k = 2;
  std::vector<double> gaps;
  for (int N : {4, 8, 16}) {
    Mesh mesh = build_mesh(make_domain_1d(0, 1, true), {N, 1});
    NodalBasis basis(k);
    DofLayout layout = make_layout(mesh, k, Continuity::cell_local);
    FormConfig cfg;
    cfg.method = Method::ddg;
    cfg.beta0 = 4;
    cfg.beta1 = 1.0 / 12.0;
    Field psi = interpolate(mesh, basis, layout, [](const std::array<double, 2>& x) {
      return 2.0 + std::sin(2 * M_PI * x[0]);
    });
    Field u = interpolate(mesh, basis, layout,
                          [](const std::array<double, 2>& x) { return std::cos(2 * M_PI * x[0]); });
    Field v = interpolate(mesh, basis, layout,
                          [](const std::array<double, 2>& x) { return std::sin(4 * M_PI * x[0]); });
    AssembledForm lumped = assemble_form(mesh, basis, layout, psi, cfg);
    AssembledForm exact = assemble_exact_form(mesh, basis, layout, psi, cfg);
    const double en = energy_norm(mesh, basis, v);
    gaps.push_back(std::abs(v.values.dot(lumped.matrix * u.values) -
                            v.values.dot(exact.matrix * u.values)) /
                   en);
  }
  const double rate = std::log2(gaps[1] / gaps[2]);
  REQUIRE(rate >= k + 1 - 0.35);
}

TEST_CASE("potential solve: zero charge on a periodic mesh returns zero", "[forms]") {
  Mesh mesh = build_mesh(make_domain_1d(0, 1, true), {4, 1});
  NodalBasis basis(2);
  DofLayout layout = make_layout(mesh, 2, Continuity::cell_local);
  Field c1(layout), c2(layout);
  c1.values.setConstant(0.7);
  c2.values.setConstant(0.7);
  FormConfig cfg;
  cfg.method = Method::ddg;
  cfg.beta0 = 4;
  Field phi = poisson_solve(mesh, basis, layout, {&c1, &c2}, {1.0, -1.0}, nullptr, cfg);
  REQUIRE(phi.values.lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("potential solve reproduces the periodic sine solution", "[forms]") {
  Mesh mesh = build_mesh(make_domain_1d(0, 1, true), {16, 1});
  NodalBasis basis(3);
  DofLayout layout = make_layout(mesh, 3, Continuity::cell_local);
  Field rho = interpolate(mesh, basis, layout,
                          [](const std::array<double, 2>& x) { return std::sin(2 * M_PI * x[0]); });
  FormConfig cfg;
  cfg.method = Method::ddg;
  cfg.beta0 = 4;
  cfg.beta1 = 1.0 / 24.0;
  Field phi = poisson_solve(mesh, basis, layout, {&rho}, {1.0}, nullptr, cfg);
  const double err = error_l2(mesh, basis, phi, [](const std::array<double, 2>& x) {
    return std::sin(2 * M_PI * x[0]) / (4 * M_PI * M_PI);
  });
  REQUIRE(err < 1e-6);
}

TEST_CASE("incompatible charge under pure zero-flux boundaries is rejected", "[forms]") {
  Mesh mesh = build_mesh(make_domain_1d(0, 1, true), {4, 1});
  NodalBasis basis(1);
  DofLayout layout = make_layout(mesh, 1, Continuity::cell_local);
  Field c(layout);
  c.values.setConstant(1.0);
  FormConfig cfg;
  cfg.method = Method::ddg;
  REQUIRE_THROWS_AS(poisson_solve(mesh, basis, layout, {&c}, {1.0}, nullptr, cfg),
                    std::runtime_error);
}

TEST_CASE("second-order potential convergence on the 2D manufactured charge", "[forms]") {
  // static solve with the t=0 charge and source of the bundled 2D problem
  ProblemSpec prob = mms_coupled_2d();
  std::vector<double> errs;
  for (int N : {5, 10, 20}) {
    Mesh mesh = build_mesh(prob.domain, {N, N});
    NodalBasis basis(1);
    DofLayout layout = make_layout(mesh, 1, Continuity::continuous);
    Field c1 = interpolate(mesh, basis, layout, prob.species[0].initial);
    Field c2 = interpolate(mesh, basis, layout, prob.species[1].initial);
    SpaceFn src = [&prob](const std::array<double, 2>& x) { return prob.phi_source(0.0, x); };
    FormConfig cfg;
    cfg.method = Method::fem;
    Field phi = poisson_solve(mesh, basis, layout, {&c1, &c2}, {1.0, -1.0}, &src, cfg);
    errs.push_back(error_l2(mesh, basis, phi, [&prob](const std::array<double, 2>& x) {
      return prob.phi_exact(0.0, x);
    }));
  }
  REQUIRE(std::log2(errs[1] / errs[2]) == Catch::Approx(2.0).margin(0.1));
}

TEST_CASE("strong Dirichlet data is honored by the continuous method", "[forms]") {
  // -u'' = 0, u(0)=1, u(1)=3 -> u = 1 + 2x
  Mesh mesh = build_mesh(make_domain_1d(0, 1), {4, 1});
  NodalBasis basis(2);
  DofLayout layout = make_layout(mesh, 2, Continuity::continuous);
  FormConfig cfg;
  cfg.method = Method::fem;
  cfg.bc.faces[face_xmin] = {BcType::dirichlet, [](const std::array<double, 2>&) { return 1.0; }};
  cfg.bc.faces[face_xmax] = {BcType::dirichlet, [](const std::array<double, 2>&) { return 3.0; }};
  Field zero(layout);
  Field phi = poisson_solve(mesh, basis, layout, {&zero}, {1.0}, nullptr, cfg);
  const double err = error_l2(mesh, basis, phi,
                              [](const std::array<double, 2>& x) { return 1.0 + 2.0 * x[0]; });
  REQUIRE(err < 1e-12);
}

TEST_CASE("weak Dirichlet data is honored by the discontinuous method", "[forms]") {
  Mesh mesh = build_mesh(make_domain_1d(0, 1), {8, 1});
  NodalBasis basis(2);
  DofLayout layout = make_layout(mesh, 2, Continuity::cell_local);
  FormConfig cfg;
  cfg.method = Method::ddg;
  cfg.beta0 = 6.0;
  cfg.beta1 = 1.0 / 12.0;
  cfg.bc.faces[face_xmin] = {BcType::dirichlet, [](const std::array<double, 2>&) { return 1.0; }};
  cfg.bc.faces[face_xmax] = {BcType::dirichlet, [](const std::array<double, 2>&) { return 3.0; }};
  Field zero(layout);
  Field phi = poisson_solve(mesh, basis, layout, {&zero}, {1.0}, nullptr, cfg);
  const double err = error_l2(mesh, basis, phi,
                              [](const std::array<double, 2>& x) { return 1.0 + 2.0 * x[0]; });
  REQUIRE(err < 1e-10);
}

TEST_CASE("dual solve identities", "[forms]") {
  Mesh mesh = build_mesh(make_domain_1d(0, 1, true), {8, 1});
  NodalBasis basis(2);
  std::mt19937_64 rng(17);
  for (Method method : {Method::ddg, Method::fem}) {
    DofLayout layout = make_layout(
        mesh, 2, method == Method::fem ? Continuity::continuous : Continuity::cell_local);
    FormConfig cfg;
    cfg.method = method;
    cfg.beta0 = 6.0;
    cfg.beta1 = 0.0;
    Field psi = interpolate(mesh, basis, layout, [](const std::array<double, 2>& x) {
      return 1.5 + std::sin(2 * M_PI * x[0]) * 0.5;
    });
    Eigen::VectorXd m = lumped_mass(mesh, basis, layout);
    Eigen::SparseMatrix<double> Mx = assemble_exact_mass(mesh, basis, layout);

    SECTION(method == Method::fem ? "zero load (continuous)" : "zero load (discontinuous)") {
      Field zero(layout);
      Field u = solve_Lpsi(mesh, basis, layout, zero, psi, cfg);
      REQUIRE(u.values.lpNorm<Eigen::Infinity>() < 1e-13);
    }

    Field f = random_field(layout, rng);
    Field g = random_field(layout, rng);
    // mean-zero pair for the symmetry identity
    f.values.array() -= m.dot(f.values) / mesh.volume();
    g.values.array() -= m.dot(g.values) / mesh.volume();
    Field Lf = solve_Lpsi(mesh, basis, layout, f, psi, cfg);
    Field Lg = solve_Lpsi(mesh, basis, layout, g, psi, cfg);

    SECTION(method == Method::fem ? "solution has zero mean (continuous)"
                                  : "solution has zero mean (discontinuous)") {
      REQUIRE(std::abs(m.dot(Lf.values)) < 1e-11);
    }
    SECTION(method == Method::fem ? "pairing symmetry (continuous)"
                                  : "pairing symmetry (discontinuous)") {
      const double a = (Mx * Lf.values).dot(g.values);
      const double b = (Mx * Lg.values).dot(f.values);
      REQUIRE(a == Catch::Approx(b).margin(1e-11 * std::max(1.0, std::abs(a))));
    }
    SECTION(method == Method::fem ? "linearity (continuous)" : "linearity (discontinuous)") {
      Field combo(layout);
      combo.values = 2.5 * f.values + g.values;
      Field Lcombo = solve_Lpsi(mesh, basis, layout, combo, psi, cfg);
      REQUIRE((Lcombo.values - 2.5 * Lf.values - Lg.values).lpNorm<Eigen::Infinity>() < 1e-11);
    }
    SECTION(method == Method::fem ? "derivative of the squared dual norm (continuous)"
                                  : "derivative of the squared dual norm (discontinuous)") {
      Field v = random_field(layout, rng);
      v.values.array() -= m.dot(v.values) / mesh.volume();
      const double hs = 1e-4;
      auto norm_sq = [&](double s) {
        Field fs(layout);
        fs.values = f.values + s * v.values;
        return lpsi_norm_sq(mesh, basis, layout, fs, psi, cfg);
      };
      const double fd = (norm_sq(hs) - norm_sq(-hs)) / (2 * hs);
      const double direct = 2.0 * (Mx * Lf.values).dot(v.values);
      REQUIRE(fd == Catch::Approx(direct).margin(1e-6 * std::max(1.0, std::abs(direct))));
    }
  }
}

TEST_CASE("penalty constant closed forms", "[forms]") {
  REQUIRE(gamma_of_beta1(1, 0.0) == Catch::Approx(1.0).epsilon(1e-14));
  REQUIRE(gamma_of_beta1(1, 0.25) == Catch::Approx(1.0).epsilon(1e-14));
  REQUIRE(gamma_of_beta1(2, 0.0) == Catch::Approx(4.0).epsilon(1e-13));
  REQUIRE(gamma_of_beta1(2, 1.0 / 12.0) == Catch::Approx(37.0 / 12.0).epsilon(1e-13));
}

TEST_CASE("stability verdicts", "[forms]") {
  MobilityBounds unit(1.0, 1.0);
  REQUIRE(check_stability(4.0, 0.25, 1, unit));
  REQUIRE(check_stability(4.0, 1.0 / 12.0, 2, unit));
  REQUIRE_FALSE(check_stability(1.0, 0.0, 2, unit));
  REQUIRE_THROWS_AS(MobilityBounds(0.0, 1.0), std::invalid_argument);
}

TEST_CASE("energy norm of continuous fields reduces to the broken gradient", "[forms]") {
  Mesh mesh = build_mesh(make_domain_1d(0, 1), {6, 1});
  NodalBasis basis(2);
  DofLayout cont = make_layout(mesh, 2, Continuity::continuous);
  DofLayout disc = make_layout(mesh, 2, Continuity::cell_local);
  auto f = [](const std::array<double, 2>& x) { return std::sin(M_PI * x[0]) + 0.2 * x[0]; };
  Field fc = interpolate(mesh, basis, cont, f);
  Field fd = interpolate(mesh, basis, disc, f);
  // same underlying piecewise polynomial: jump terms contribute nothing
  REQUIRE(energy_norm(mesh, basis, fc) == Catch::Approx(energy_norm(mesh, basis, fd)).epsilon(1e-12));
}

TEST_CASE("matrix dump emits one coordinate triple per entry", "[forms]") {
  Mesh mesh = build_mesh(make_domain_1d(0, 1), {2, 1});
  NodalBasis basis(1);
  DofLayout layout = make_layout(mesh, 1, Continuity::continuous);
  FormConfig cfg;
  cfg.method = Method::fem;
  AssembledForm form = assemble_form(mesh, basis, layout, 1.0, cfg);
  std::ostringstream os;
  write_matrix_coordinate(os, form.matrix);
  std::istringstream is(os.str());
  std::string line;
  long lines = 0;
  while (std::getline(is, line)) ++lines;
  REQUIRE(lines == form.matrix.nonZeros());
}
