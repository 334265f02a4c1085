// JSON run configuration. Unknown keys are rejected so that typos cannot
// silently change an experiment.
#pragma once

#include <json.hpp>
#include <set>
#include <string>

#include "pnp/runner.hpp"

namespace pnp {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace cfgdetail {

using nlohmann::json;

inline void reject_unknown(const json& j, const std::set<std::string>& allowed,
                           const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw ConfigError("config: unknown key '" + where + it.key() + "'");
}

inline double need_number(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError("config: missing '" + where + key + "'");
  if (!j[key].is_number()) throw ConfigError("config: '" + where + key + "' must be a number");
  return j[key].get<double>();
}

inline SpaceTimeFn parse_expr_st(const std::string& text, const std::string& where) {
  try {
    Expression e = Expression::parse(text);
    return [e](double t, const std::array<double, 2>& x) { return e(t, x[0], x[1]); };
  } catch (const std::exception& ex) {
    throw ConfigError("config: '" + where + "': " + ex.what());
  }
}

inline ProblemSpec parse_custom_problem(const json& j) {
  reject_unknown(j, {"name", "dim", "domain", "epsilon", "t_end", "species", "phi"}, "problem.");
  ProblemSpec spec;
  spec.id = j.value("name", std::string("custom"));
  const int dim = j.value("dim", 1);
  if (dim < 1 || dim > 2) throw ConfigError("config: problem.dim must be 1 or 2");
  if (!j.contains("domain")) throw ConfigError("config: missing 'problem.domain'");
  const json& jd = j["domain"];
  reject_unknown(jd, {"lower", "upper", "periodic"}, "problem.domain.");
  Domain dom;
  dom.dim = dim;
  for (const char* key : {"lower", "upper"}) {
    if (!jd.contains(key) || !jd[key].is_array() || static_cast<int>(jd[key].size()) != dim)
      throw ConfigError(std::string("config: problem.domain.") + key + " must be an array of length dim");
  }
  for (int a = 0; a < dim; ++a) {
    dom.lower[a] = jd["lower"][a].get<double>();
    dom.upper[a] = jd["upper"][a].get<double>();
    if (!(dom.upper[a] > dom.lower[a]))
      throw ConfigError("config: problem.domain upper must exceed lower on axis " +
                        std::to_string(a));
  }
  if (jd.contains("periodic")) {
    if (!jd["periodic"].is_array() || static_cast<int>(jd["periodic"].size()) != dim)
      throw ConfigError("config: problem.domain.periodic must be an array of length dim");
    for (int a = 0; a < dim; ++a) dom.periodic[a] = jd["periodic"][a].get<bool>();
  }
  spec.domain = dom;
  spec.epsilon = j.value("epsilon", 1.0);
  spec.default_t_end = j.value("t_end", 0.1);

  if (!j.contains("species") || !j["species"].is_array() || j["species"].empty())
    throw ConfigError("config: problem.species must be a nonempty array");
  int with_exact = 0;
  for (const json& js : j["species"]) {
    reject_unknown(js, {"q", "D", "c0", "exact", "source"}, "problem.species[].");
    SpeciesProblem sp;
    sp.valence = need_number(js, "q", "problem.species[].");
    sp.diffusion = js.value("D", 1.0);
    if (!(sp.diffusion > 0)) throw ConfigError("config: species diffusion must be positive");
    if (!js.contains("c0")) throw ConfigError("config: missing 'problem.species[].c0'");
    SpaceTimeFn c0 = parse_expr_st(js["c0"].get<std::string>(), "problem.species[].c0");
    sp.initial = [c0](const std::array<double, 2>& x) { return c0(0.0, x); };
    if (js.contains("exact")) {
      sp.exact = parse_expr_st(js["exact"].get<std::string>(), "problem.species[].exact");
      ++with_exact;
    }
    if (js.contains("source"))
      sp.source = parse_expr_st(js["source"].get<std::string>(), "problem.species[].source");
    spec.species.push_back(std::move(sp));
  }

  if (j.contains("phi")) {
    const json& jp = j["phi"];
    reject_unknown(jp, {"exact", "source", "bc"}, "problem.phi.");
    if (jp.contains("exact"))
      spec.phi_exact = parse_expr_st(jp["exact"].get<std::string>(), "problem.phi.exact");
    if (jp.contains("source"))
      spec.phi_source = parse_expr_st(jp["source"].get<std::string>(), "problem.phi.source");
    if (jp.contains("bc")) {
      const json& jb = jp["bc"];
      reject_unknown(jb, {"xmin", "xmax", "ymin", "ymax"}, "problem.phi.bc.");
      const char* names[4] = {"xmin", "xmax", "ymin", "ymax"};
      for (int f = 0; f < 4; ++f) {
        if (!jb.contains(names[f])) continue;
        if (f >= 2 * dim) throw ConfigError("config: phi bc face outside the domain dimension");
        if (dom.periodic[f / 2])
          throw ConfigError(std::string("config: face ") + names[f] + " lies on a periodic axis");
        const json& jf = jb[names[f]];
        if (jf.is_string() && jf.get<std::string>() == "zero_flux") {
          spec.phi_bc.faces[f] = {BcType::zero_flux, nullptr};
        } else if (jf.is_string() && jf.get<std::string>() == "dirichlet") {
          spec.phi_bc.faces[f] = {BcType::dirichlet, nullptr};
        } else if (jf.is_object() && jf.contains("dirichlet")) {
          reject_unknown(jf, {"dirichlet"}, "problem.phi.bc.face.");
          SpaceTimeFn g = parse_expr_st(jf["dirichlet"].get<std::string>(), "problem.phi.bc");
          spec.phi_bc.faces[f] = {
              BcType::dirichlet, [g](const std::array<double, 2>& x) { return g(0.0, x); }};
        } else {
          throw ConfigError("config: phi bc must be 'zero_flux', 'dirichlet', or {\"dirichlet\": expr}");
        }
      }
    }
  }
  const bool all_exact = with_exact == static_cast<int>(spec.species.size()) && spec.phi_exact;
  if (with_exact > 0 && !all_exact)
    throw ConfigError("config: give exact solutions for every species and phi, or for none");
  spec.has_exact = all_exact;
  return spec;
}

}  // namespace cfgdetail

inline RunConfig config_from_json(const nlohmann::json& j) {
  using cfgdetail::reject_unknown;
  reject_unknown(j,
                 {"problem", "method", "k", "beta0", "beta1", "cells", "time_order", "dt", "t_end",
                  "limiter", "newton", "init_clip", "mobility_floor", "diag_every", "seed",
                  "out_dir", "dump_matrix"},
                 "");
  RunConfig cfg;
  if (!j.contains("problem")) throw ConfigError("config: missing 'problem'");
  if (j["problem"].is_string()) {
    try {
      cfg.problem = builtin_problem(j["problem"].get<std::string>());
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  } else if (j["problem"].is_object()) {
    cfg.problem = cfgdetail::parse_custom_problem(j["problem"]);
  } else {
    throw ConfigError("config: 'problem' must be an id string or an object");
  }

  const std::string method = j.value("method", std::string("ddg"));
  if (method == "fem")
    cfg.method = Method::fem;
  else if (method == "ddg")
    cfg.method = Method::ddg;
  else
    throw ConfigError("config: 'method' must be \"fem\" or \"ddg\"");

  cfg.k = j.value("k", 1);
  if (cfg.k < 1) throw ConfigError("config: 'k' must be >= 1");
  cfg.beta0 = j.value("beta0", 4.0);
  if (j.contains("beta1")) {
    if (j["beta1"].is_string()) {
      if (j["beta1"].get<std::string>() != "auto")
        throw ConfigError("config: 'beta1' must be a number or \"auto\"");
      cfg.beta1_auto = true;
    } else if (j["beta1"].is_number()) {
      cfg.beta1_auto = false;
      cfg.beta1 = j["beta1"].get<double>();
      if (cfg.beta1 < 0) throw ConfigError("config: 'beta1' must be >= 0");
    } else {
      throw ConfigError("config: 'beta1' must be a number or \"auto\"");
    }
  }

  if (j.contains("cells")) {
    const nlohmann::json& jc = j["cells"];
    if (jc.is_number_integer()) {
      const int n = jc.get<int>();
      if (n < 1) throw ConfigError("config: 'cells' must be >= 1");
      cfg.cells = {n, n};
    } else if (jc.is_array() && (jc.size() == 1 || jc.size() == 2)) {
      for (std::size_t a = 0; a < jc.size(); ++a) {
        const int n = jc[a].get<int>();
        if (n < 1) throw ConfigError("config: 'cells' entries must be >= 1");
        cfg.cells[a] = n;
      }
      if (jc.size() == 1) cfg.cells[1] = cfg.cells[0];
    } else {
      throw ConfigError("config: 'cells' must be an integer or a per-axis array");
    }
  }

  cfg.time_order = j.value("time_order", 1);
  if (cfg.time_order != 1 && cfg.time_order != 2)
    throw ConfigError("config: 'time_order' must be 1 or 2");

  if (j.contains("dt")) {
    const nlohmann::json& jd = j["dt"];
    if (jd.is_number()) {
      cfg.dt.scaled = false;
      cfg.dt.value = jd.get<double>();
      if (!(cfg.dt.value > 0)) throw ConfigError("config: 'dt' must be positive");
    } else if (jd.is_object()) {
      reject_unknown(jd, {"coeff", "power"}, "dt.");
      cfg.dt.scaled = true;
      cfg.dt.coeff = cfgdetail::need_number(jd, "coeff", "dt.");
      cfg.dt.power = cfgdetail::need_number(jd, "power", "dt.");
      if (!(cfg.dt.coeff > 0)) throw ConfigError("config: 'dt.coeff' must be positive");
    } else {
      throw ConfigError("config: 'dt' must be a number or {coeff, power}");
    }
  }

  if (j.contains("t_end")) {
    cfg.t_end = j["t_end"].get<double>();
    if (!(cfg.t_end > 0)) throw ConfigError("config: 't_end' must be positive");
  }
  cfg.limiter = j.value("limiter", false);
  if (cfg.limiter && cfg.method == Method::fem)
    throw ConfigError("config: the limiter requires the cell-local (ddg) discretization");

  if (j.contains("newton")) {
    const nlohmann::json& jn = j["newton"];
    reject_unknown(jn, {"tol", "max_iters", "ftb_factor", "polish_iters"}, "newton.");
    cfg.newton_tol = jn.value("tol", cfg.newton_tol);
    cfg.newton_max = jn.value("max_iters", cfg.newton_max);
    cfg.ftb_factor = jn.value("ftb_factor", cfg.ftb_factor);
    cfg.polish_iters = jn.value("polish_iters", cfg.polish_iters);
    if (!(cfg.newton_tol > 0)) throw ConfigError("config: 'newton.tol' must be positive");
    if (cfg.newton_max < 1) throw ConfigError("config: 'newton.max_iters' must be >= 1");
    if (!(cfg.ftb_factor > 0 && cfg.ftb_factor < 1))
      throw ConfigError("config: 'newton.ftb_factor' must lie in (0,1)");
  }
  cfg.init_clip = j.value("init_clip", cfg.init_clip);
  cfg.mobility_floor = j.value("mobility_floor", cfg.mobility_floor);
  cfg.diag_every = j.value("diag_every", 1);
  if (cfg.diag_every < 1) throw ConfigError("config: 'diag_every' must be >= 1");
  cfg.seed = j.value("seed", cfg.seed);
  cfg.out_dir = j.value("out_dir", std::string());
  cfg.dump_matrix = j.value("dump_matrix", false);
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw ConfigError("config: parse failure in '" + path + "': " + e.what());
  }
  return config_from_json(j);
}

}  // namespace pnp
