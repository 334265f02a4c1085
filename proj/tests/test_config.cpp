#include <catch2/catch_amalgamated.hpp>

#include "pnp/config.hpp"
#include "pnp/selfcheck.hpp"

using namespace pnp;
using nlohmann::json;

TEST_CASE("expression parser", "[config]") {
  Expression e = Expression::parse("sin(pi*x) + 2^3 - t/2 + exp(0)*y");
  REQUIRE(e(0.5, 0.5, 2.0) == Catch::Approx(std::sin(M_PI * 0.5) + 8.0 - 0.25 + 2.0));
  REQUIRE(Expression::parse("-x^2")(0, 3, 0) == Catch::Approx(-9.0));
  REQUIRE(Expression::parse("2^3^2")(0, 0, 0) == Catch::Approx(512.0));  // right-assoc
  REQUIRE(Expression::parse("(1+2)*(3-1)")(0, 0, 0) == Catch::Approx(6.0));
  REQUIRE_THROWS_AS(Expression::parse("foo(x)"), std::invalid_argument);
  REQUIRE_THROWS_AS(Expression::parse("1 + "), std::invalid_argument);
  REQUIRE_THROWS_AS(Expression::parse("sin x"), std::invalid_argument);
}

TEST_CASE("minimal config resolves defaults", "[config]") {
  RunConfig cfg = config_from_json(json{{"problem", "mms1d"}});
  REQUIRE(cfg.problem.id == "mms1d");
  REQUIRE(cfg.method == Method::ddg);
  REQUIRE(cfg.k == 1);
  REQUIRE(cfg.beta1_auto);
  REQUIRE(cfg.beta1_effective() == Catch::Approx(0.25));
}

TEST_CASE("the automatic penalty follows the order", "[config]") {
  json j{{"problem", "mms1d"}, {"k", 2}};
  REQUIRE(config_from_json(j).beta1_effective() == Catch::Approx(1.0 / 12.0));
  j["k"] = 3;
  REQUIRE(config_from_json(j).beta1_effective() == Catch::Approx(1.0 / 24.0));
  j["beta1"] = 0.0;
  REQUIRE(config_from_json(j).beta1_effective() == 0.0);
}

TEST_CASE("config errors name the offending field", "[config]") {
  using Catch::Matchers::ContainsSubstring;
  REQUIRE_THROWS_WITH(config_from_json(json{{"problem", "mms1d"}, {"cells", -4}}),
                      ContainsSubstring("cells"));
  REQUIRE_THROWS_WITH(config_from_json(json{{"problem", "mms1d"}, {"typo_key", 1}}),
                      ContainsSubstring("typo_key"));
  REQUIRE_THROWS_WITH(config_from_json(json{{"problem", "mms1d"}, {"time_order", 3}}),
                      ContainsSubstring("time_order"));
  REQUIRE_THROWS_WITH(config_from_json(json{{"problem", "nope"}}), ContainsSubstring("nope"));
  REQUIRE_THROWS_WITH(
      config_from_json(json{{"problem", "mms1d"}, {"newton", {{"ftb_factor", 1.5}}}}),
      ContainsSubstring("ftb_factor"));
  REQUIRE_THROWS_WITH(
      config_from_json(json{{"problem", "relax2d"}, {"method", "fem"}, {"limiter", true}}),
      ContainsSubstring("limiter"));
}

TEST_CASE("custom problems parse and run a few steps", "[config]") {
  json j = {
      {"problem",
       {{"name", "pair"},
        {"dim", 1},
        {"domain", {{"lower", {0.0}}, {"upper", {1.0}}, {"periodic", {true}}}},
        {"t_end", 0.01},
        {"species",
         json::array({{{"q", 1.0}, {"c0", "2 + cos(2*pi*x)"}},
                      {{"q", -1.0}, {"c0", "2 + sin(2*pi*x)"}}})}}},
      {"method", "ddg"},
      {"k", 2},
      {"cells", 8},
      {"dt", 1e-3}};
  RunConfig cfg = config_from_json(j);
  REQUIRE(cfg.problem.species.size() == 2);
  RunResult res = run_single(cfg);
  REQUIRE_FALSE(res.failed);
  REQUIRE(res.max_mass_drift_rel < 1e-11);
  REQUIRE(res.max_energy_rise <= 1e-12);
}

TEST_CASE("custom problems validate their pieces", "[config]") {
  using Catch::Matchers::ContainsSubstring;
  json base = {{"problem",
                {{"dim", 1},
                 {"domain", {{"lower", {0.0}}, {"upper", {1.0}}}},
                 {"species", json::array({{{"q", 1.0}, {"c0", "1"}}})}}}};
  REQUIRE_NOTHROW(config_from_json(base));
  json bad = base;
  bad["problem"]["species"][0].erase("c0");
  REQUIRE_THROWS_WITH(config_from_json(bad), ContainsSubstring("c0"));
  bad = base;
  bad["problem"]["species"][0]["c0"] = "wat(x)";
  REQUIRE_THROWS_AS(config_from_json(bad), ConfigError);
  bad = base;
  bad["problem"]["species"][0]["exact"] = "1";  // exact without the potential
  REQUIRE_THROWS_AS(config_from_json(bad), ConfigError);
  bad = base;
  bad["problem"]["domain"]["upper"] = {0.0};
  REQUIRE_THROWS_AS(config_from_json(bad), ConfigError);
}

TEST_CASE("identical configurations produce identical outputs", "[config]") {
  json j = {{"problem", "relax2d"}, {"method", "fem"}, {"k", 1}, {"cells", 6},
            {"dt", 1e-3},           {"t_end", 5e-3},   {"seed", 99}};
  auto run_once = [&]() {
    RunConfig cfg = config_from_json(j);
    RunResult res = run_single(cfg);
    std::ostringstream os;
    for (const DiagnosticsRecord& rec : res.records) {
      os << format_double(rec.t) << "|" << format_double(rec.energy_lumped);
      for (double m : rec.mass) os << "|" << format_double(m);
      for (double m : rec.min_node) os << "|" << format_double(m);
      os << "\n";
    }
    return os.str();
  };
  REQUIRE(run_once() == run_once());
}
