// Command-line driver: single runs, convergence sweeps over doubling
// resolutions, the interface penalty constant table, and the property-check
// battery. Exit codes: 0 ok, 2 configuration error, 3 solver failure,
// 4 property-check failure.
#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>

#include "pnp/config.hpp"
#include "pnp/selfcheck.hpp"

namespace {

std::string output_root() {
  const char* env = std::getenv("PNP_OUTPUT_ROOT");
  return env && *env ? std::string(env) : std::string("out");
}

std::string default_run_dir(const pnp::RunConfig& cfg) {
  std::string dir = output_root() + "/" + cfg.problem.id + "_" +
                    (cfg.method == pnp::Method::fem ? "fem" : "ddg") + "_k" +
                    std::to_string(cfg.k) + "_N" + std::to_string(cfg.cells[0]);
  if (cfg.problem.domain.dim == 2 && cfg.cells[1] != cfg.cells[0])
    dir += "x" + std::to_string(cfg.cells[1]);
  return dir;
}

int do_run(const std::string& config_path, const std::string& out_override) {
  pnp::RunConfig cfg = pnp::load_config(config_path);
  if (!out_override.empty()) cfg.out_dir = out_override;
  if (cfg.out_dir.empty()) cfg.out_dir = default_run_dir(cfg);
  pnp::RunResult result = pnp::run_single(cfg);

  std::optional<Eigen::SparseMatrix<double>> dumped;
  if (cfg.dump_matrix) {
    pnp::Mesh mesh = pnp::build_mesh(cfg.problem.domain,
                                     {cfg.cells[0], cfg.problem.domain.dim == 2 ? cfg.cells[1] : 1});
    pnp::NodalBasis basis(cfg.k);
    pnp::DofLayout layout = pnp::make_layout(
        mesh, cfg.k,
        cfg.method == pnp::Method::fem ? pnp::Continuity::continuous : pnp::Continuity::cell_local);
    pnp::FormConfig fc;
    fc.method = cfg.method;
    fc.beta0 = cfg.beta0;
    fc.beta1 = cfg.beta1_effective();
    fc.bc = cfg.problem.phi_bc;
    dumped = pnp::assemble_form(mesh, basis, layout,
                                pnp::Mobility(cfg.problem.epsilon * cfg.problem.epsilon), fc)
                 .matrix;
  }
  pnp::write_run_outputs(result, cfg.out_dir, static_cast<int>(cfg.problem.species.size()),
                         cfg.dump_matrix, dumped ? &*dumped : nullptr);
  std::cout << result.log;
  for (const pnp::ErrorEntry& e : result.errors)
    std::cout << e.variable << " " << e.norm << " " << pnp::format_double(e.value) << "\n";
  std::cout << "outputs written to " << cfg.out_dir << "\n";
  if (result.failed) {
    std::cerr << "solver failure: " << result.failure << "\n";
    return 3;
  }
  return 0;
}

int do_sweep(const std::string& config_path, const std::vector<int>& cells,
             const std::string& out_override) {
  pnp::RunConfig base = pnp::load_config(config_path);
  std::string dir = !out_override.empty()
                        ? out_override
                        : output_root() + "/sweep_" + base.problem.id + "_" +
                              (base.method == pnp::Method::fem ? "fem" : "ddg") + "_k" +
                              std::to_string(base.k);
  pnp::SweepResult sweep = pnp::run_sweep(base, cells);
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < sweep.runs.size(); ++i)
    pnp::write_run_outputs(sweep.runs[i], dir + "/N" + std::to_string(sweep.resolutions[i]),
                           static_cast<int>(base.problem.species.size()));
  pnp::write_sweep_csv(sweep, dir + "/sweep.csv");
  std::cout << "N";
  for (const std::string& m : sweep.table.metrics) std::cout << "," << m;
  std::cout << "\n";
  for (std::size_t r = 0; r < sweep.table.errors.size(); ++r) {
    std::cout << sweep.table.resolutions[r];
    for (double e : sweep.table.errors[r]) std::cout << "," << pnp::format_double(e);
    std::cout << "\n";
    if (r + 1 == sweep.table.errors.size()) {
      std::cout << "R";
      for (double o : sweep.table.orders[r])
        std::cout << "," << (std::isnan(o) ? std::string("-") : pnp::format_double(o));
      std::cout << "\n";
    }
  }
  std::cout << "sweep written to " << dir << "\n";
  if (sweep.any_failed) {
    std::cerr << "one or more sweep members failed; table contains markers\n";
    return 3;
  }
  return 0;
}

int do_gamma(int k, const std::vector<double>& beta1_list) {
  std::cout << "k,beta1,gamma,beta0_min\n";
  for (double b1 : beta1_list) {
    const double g = pnp::gamma_of_beta1(k, b1);
    std::cout << k << "," << pnp::format_double(b1) << "," << pnp::format_double(g) << ","
              << pnp::format_double(g) << "\n";
  }
  return 0;
}

int do_check(std::uint64_t seed) {
  std::vector<pnp::CheckResult> results = pnp::run_property_checks(seed);
  bool all = true;
  for (const pnp::CheckResult& r : results) {
    std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << " (" << r.detail << ")\n";
    all = all && r.pass;
  }
  return all ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collocation-based finite element / discontinuous Galerkin solver for "
               "multi-species drift-diffusion systems with a self-consistent potential"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::vector<int> cells;
  int k = 1;
  std::vector<double> beta1_list{0.0};
  std::uint64_t seed = 12345;

  CLI::App* run = app.add_subcommand("run", "execute a single configured run");
  run->add_option("--config", config_path, "JSON configuration file")->required();
  run->add_option("--out", out_dir, "output directory (overrides the config)");

  CLI::App* sweep = app.add_subcommand("sweep", "convergence sweep over doubling cell counts");
  sweep->add_option("--config", config_path, "JSON configuration file")->required();
  sweep->add_option("--cells", cells, "doubling resolutions, e.g. --cells 10 20 40")
      ->required()
      ->expected(-1);
  sweep->add_option("--out", out_dir, "output directory (overrides the default)");

  CLI::App* gamma = app.add_subcommand("gamma", "interface penalty constant table");
  gamma->add_option("-k,--order", k, "polynomial order")->required();
  gamma->add_option("--beta1", beta1_list, "beta1 values")->expected(-1);

  CLI::App* check = app.add_subcommand("check", "run the property-check battery");
  check->add_option("--seed", seed, "seed for sampled checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return do_run(config_path, out_dir);
    if (sweep->parsed()) return do_sweep(config_path, cells, out_dir);
    if (gamma->parsed()) return do_gamma(k, beta1_list);
    if (check->parsed()) return do_check(seed);
  } catch (const pnp::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const pnp::SolverFailure& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
