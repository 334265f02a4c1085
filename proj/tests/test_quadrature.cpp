#include <catch2/catch_amalgamated.hpp>

#include "pnp/quadrature.hpp"

using namespace pnp;

namespace {
double moment(const QuadRule& r, int j) {
  double s = 0;
  for (std::size_t i = 0; i < r.nodes.size(); ++i) s += r.weights[i] * std::pow(r.nodes[i], j);
  return s;
}
double exact_moment(int j) { return j % 2 == 0 ? 2.0 / (j + 1) : 0.0; }
}  // namespace

TEST_CASE("lobatto rule basics", "[quadrature]") {
  SECTION("two points") {
    QuadRule r = gauss_lobatto_rule(2);
    REQUIRE(r.nodes == std::vector<double>{-1.0, 1.0});
    REQUIRE(r.weights[0] == Catch::Approx(1.0));
    REQUIRE(r.weights[1] == Catch::Approx(1.0));
  }
  SECTION("three points from the moment equations") {
    QuadRule r = gauss_lobatto_rule(3);
    REQUIRE(r.nodes[1] == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(r.weights[0] == Catch::Approx(1.0 / 3.0).epsilon(1e-14));
    REQUIRE(r.weights[1] == Catch::Approx(4.0 / 3.0).epsilon(1e-14));
    for (int j = 0; j <= 3; ++j) REQUIRE(moment(r, j) == Catch::Approx(exact_moment(j)).margin(1e-14));
  }
  SECTION("four points: interior nodes at the degree-3 derivative roots") {
    QuadRule r = gauss_lobatto_rule(4);
    REQUIRE(r.nodes[1] == Catch::Approx(-1.0 / std::sqrt(5.0)).epsilon(1e-14));
    REQUIRE(r.nodes[2] == Catch::Approx(1.0 / std::sqrt(5.0)).epsilon(1e-14));
    REQUIRE(r.weights[0] == Catch::Approx(1.0 / 6.0).epsilon(1e-14));
    REQUIRE(r.weights[1] == Catch::Approx(5.0 / 6.0).epsilon(1e-14));
    for (int j = 0; j <= 5; ++j) REQUIRE(moment(r, j) == Catch::Approx(exact_moment(j)).margin(1e-13));
  }
  SECTION("rejects fewer than two points") {
    REQUIRE_THROWS_AS(gauss_lobatto_rule(1), std::invalid_argument);
  }
}

TEST_CASE("gauss rule basics", "[quadrature]") {
  SECTION("midpoint") {
    QuadRule r = gauss_rule(1);
    REQUIRE(r.nodes[0] == Catch::Approx(0.0).margin(1e-16));
    REQUIRE(r.weights[0] == Catch::Approx(2.0));
  }
  SECTION("two points") {
    QuadRule r = gauss_rule(2);
    REQUIRE(r.nodes[1] == Catch::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-14));
    REQUIRE(r.weights[0] == Catch::Approx(1.0).epsilon(1e-14));
    for (int j = 0; j <= 3; ++j) REQUIRE(moment(r, j) == Catch::Approx(exact_moment(j)).margin(1e-14));
  }
  SECTION("three points") {
    QuadRule r = gauss_rule(3);
    REQUIRE(r.nodes[0] == Catch::Approx(-std::sqrt(3.0 / 5.0)).epsilon(1e-14));
    REQUIRE(r.weights[0] == Catch::Approx(5.0 / 9.0).epsilon(1e-14));
    REQUIRE(r.weights[1] == Catch::Approx(8.0 / 9.0).epsilon(1e-14));
    for (int j = 0; j <= 5; ++j) REQUIRE(moment(r, j) == Catch::Approx(exact_moment(j)).margin(1e-14));
  }
  SECTION("rejects zero points") { REQUIRE_THROWS_AS(gauss_rule(0), std::invalid_argument); }
}

TEST_CASE("stated exactness holds and one degree beyond fails", "[quadrature]") {
  for (int n = 2; n <= 7; ++n) {
    QuadRule r = gauss_lobatto_rule(n);
    REQUIRE(r.exactness == 2 * n - 3);
    for (int j = 0; j <= r.exactness; ++j)
      REQUIRE(moment(r, j) == Catch::Approx(exact_moment(j)).margin(1e-13));
    // the next even degree is not integrated exactly
    const int j = r.exactness + 1;
    REQUIRE(std::abs(moment(r, j) - exact_moment(j)) > 1e-6);
  }
  for (int n = 1; n <= 7; ++n) {
    QuadRule r = gauss_rule(n);
    REQUIRE(r.exactness == 2 * n - 1);
    for (int j = 0; j <= r.exactness; ++j)
      REQUIRE(moment(r, j) == Catch::Approx(exact_moment(j)).margin(1e-13));
  }
}

TEST_CASE("weights positive, symmetric, summing to the interval length", "[quadrature]") {
  for (int n = 2; n <= 9; ++n) {
    for (QuadRule r : {gauss_lobatto_rule(n), gauss_rule(n)}) {
      double sum = 0;
      for (std::size_t i = 0; i < r.weights.size(); ++i) {
        REQUIRE(r.weights[i] > 0);
        sum += r.weights[i];
        REQUIRE(r.nodes[i] == Catch::Approx(-r.nodes[r.nodes.size() - 1 - i]).margin(1e-15));
        if (i > 0) REQUIRE(r.nodes[i] > r.nodes[i - 1]);
      }
      REQUIRE(sum == Catch::Approx(2.0).margin(1e-14));
    }
  }
}
