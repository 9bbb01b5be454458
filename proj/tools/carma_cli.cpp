// Command-line front end: validates configs, evaluates the closed-form
// benchmarks, solves the bidding equilibrium, and runs the finite-population
// simulation. Emits plot-ready CSV bundles with a schema sidecar.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "carma/benchmarks.hpp"
#include "carma/config.hpp"
#include "carma/io.hpp"
#include "carma/metrics.hpp"
#include "carma/montecarlo.hpp"
#include "carma/solver.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitNonConvergence = 2;
constexpr int kExitIo = 3;

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::string scheme_list;
  std::int64_t seed = -1;
  bool quiet = false;
};

std::string resolve_out_dir(const CommonArgs& args, const carma::ExperimentConfig& cfg) {
  if (!args.out_dir.empty()) return args.out_dir;
  if (const char* env = std::getenv("CARMA_OUT_DIR"); env && *env) return env;
  return cfg.out_dir;
}

int load_config(const CommonArgs& args, carma::ExperimentConfig& cfg) {
  try {
    cfg = carma::parse_config_file(args.config_path);
  } catch (const carma::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  }
  const std::vector<std::string> violations = carma::validate_config(cfg);
  if (!violations.empty()) {
    for (const auto& v : violations) std::cerr << "config error: " << v << "\n";
    return kExitValidation;
  }
  if (args.seed >= 0) {
    cfg.solver.seed = static_cast<std::uint64_t>(args.seed);
    cfg.montecarlo.seed = static_cast<std::uint64_t>(args.seed);
  }
  if (!args.scheme_list.empty()) {
    cfg.schemes.clear();
    std::string item;
    std::stringstream ss(args.scheme_list);
    while (std::getline(ss, item, ',')) {
      if (item == "NOM") {
        cfg.schemes.push_back(carma::Scheme::NOM);
      } else if (item == "TOLL") {
        cfg.schemes.push_back(carma::Scheme::TOLL);
      } else if (item == "CARMA") {
        cfg.schemes.push_back(carma::Scheme::CARMA);
      } else {
        std::cerr << "config error: --scheme: unknown scheme '" << item << "'\n";
        return kExitValidation;
      }
    }
  }
  if (args.quiet)
    cfg.solver.progress_every = 0;
  else if (cfg.solver.progress_every == 0)
    cfg.solver.progress_every = 500;
  return kExitOk;
}

bool wants(const carma::ExperimentConfig& cfg, carma::Scheme s) {
  for (carma::Scheme x : cfg.schemes)
    if (x == s) return true;
  return false;
}

int run_bundle(const CommonArgs& args, bool solve_only, bool benchmark_only) {
  carma::ExperimentConfig cfg;
  if (int rc = load_config(args, cfg); rc != kExitOk) return rc;
  const std::string dir = resolve_out_dir(args, cfg);

  try {
    const carma::Scenario sc = carma::scenario_from(cfg);
    const carma::VotDistribution pool = carma::pooled_vot(sc);
    const carma::NomEquilibrium nom = carma::nom_equilibrium(sc.bn, pool);
    const carma::SchemeMetrics nom_m = carma::nom_metrics(sc, nom);

    std::vector<std::string> files;
    std::vector<carma::SchemeMetrics> metrics;
    std::vector<carma::SchemeMetrics> against_nom;

    const bool do_nom = !solve_only && wants(cfg, carma::Scheme::NOM);
    const bool do_toll = !solve_only && wants(cfg, carma::Scheme::TOLL);
    const bool do_carma = !benchmark_only && wants(cfg, carma::Scheme::CARMA);

    if (do_nom) {
      files.push_back(carma::io::write_nom_csv(dir, pool, nom));
      files.push_back("nom_levels.csv");
      metrics.push_back(nom_m);
    }

    std::optional<carma::TollEquilibrium> toll;
    if (do_toll || do_carma) toll = carma::toll_equilibrium(sc.bn, pool);
    if (do_toll) {
      files.push_back(carma::io::write_toll_summary_csv(dir, pool, *toll));
      files.push_back("toll_levels.csv");
      files.push_back(carma::io::write_toll_profile_csv(dir, *toll));
      const carma::SchemeMetrics tm = carma::toll_metrics(sc, *toll, nom);
      metrics.push_back(tm);
      against_nom.push_back(tm);
    }

    bool solver_failed = false;
    if (do_carma) {
      const carma::SneSolution sol = carma::solve_sne(sc, cfg.solver);
      solver_failed = !sol.diagnostics.converged;
      if (solver_failed)
        std::cerr << "solver did not converge: stationarity="
                  << sol.diagnostics.stationarity_res
                  << " optimality_gap=" << sol.diagnostics.optimality_gap << "\n";
      if (sol.diagnostics.kmax_warning)
        std::cerr << "warning: stationary mass at k_max is "
                  << sol.diagnostics.clamp_mass_kmax
                  << " (> 1e-6); consider increasing karma.k_max\n";
      const auto carma_files =
          carma::io::write_carma_outputs(dir, sc, sol, toll ? &*toll : nullptr);
      files.insert(files.end(), carma_files.begin(), carma_files.end());
      carma::io::save_solution(dir + "/solution.json", cfg, sol);
      files.push_back("solution.json");
      const carma::SchemeMetrics cm = carma::carma_metrics(sc, sol);
      metrics.push_back(cm);
      against_nom.push_back(cm);

      if (!solve_only && cfg.mc_enabled) {
        const carma::SimulationResult res =
            carma::simulate(sc, sol.pi_star, sol.d_star, cfg.montecarlo);
        const auto mc_files = carma::io::write_mc_outputs(dir, sc, res, sol.d_star);
        files.insert(files.end(), mc_files.begin(), mc_files.end());
      }
    }

    if (!metrics.empty()) files.push_back(carma::io::write_metrics_csv(dir, sc, metrics));
    if (!against_nom.empty())
      files.push_back(
          carma::io::write_fairness_csv(dir, carma::fairness_report(sc, nom_m, against_nom)));
    carma::io::write_schema(dir, files);

    if (solver_failed) return kExitNonConvergence;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::runtime_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitOk;
}

int run_simulate(const CommonArgs& args, const std::string& solution_path) {
  try {
    const carma::io::SavedSolution saved = carma::io::load_solution(solution_path);
    carma::ExperimentConfig cfg = saved.config;
    const std::vector<std::string> violations = carma::validate_config(cfg);
    if (!violations.empty()) {
      for (const auto& v : violations) std::cerr << "config error: " << v << "\n";
      return kExitValidation;
    }
    if (!saved.converged)
      std::cerr << "warning: simulating from a solution flagged as non-converged\n";
    if (args.seed >= 0) cfg.montecarlo.seed = static_cast<std::uint64_t>(args.seed);
    const std::string dir = resolve_out_dir(args, cfg);
    const carma::Scenario sc = carma::scenario_from(cfg);
    carma::Policy pi;
    pi.pi = saved.pi_star.pi;
    carma::TypeStateDistribution d;
    d.d = saved.d_star.d;
    pi.validate(sc);
    const carma::SimulationResult res = carma::simulate(sc, pi, d, cfg.montecarlo);
    const auto files = carma::io::write_mc_outputs(dir, sc, res, d);
    carma::io::write_schema(dir, files);
  } catch (const std::runtime_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Karma-bidding bottleneck equilibria: closed-form benchmarks, equilibrium "
               "solver, and finite-population simulation"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string solution_path;

  auto add_common = [&args](CLI::App* cmd, bool needs_config) {
    auto* opt = cmd->add_option("--config", args.config_path, "experiment config (JSON)");
    if (needs_config) opt->required();
    cmd->add_option("--out", args.out_dir, "output directory (overrides config and env)");
    cmd->add_option("--seed", args.seed, "override solver and simulation seeds");
    cmd->add_option("--scheme", args.scheme_list, "comma-separated scheme subset");
    cmd->add_flag("--quiet", args.quiet, "suppress progress output");
  };

  CLI::App* validate = app.add_subcommand("validate", "check a config and exit");
  add_common(validate, true);
  CLI::App* run = app.add_subcommand("run", "compute all requested schemes and emit the bundle");
  add_common(run, true);
  CLI::App* solve = app.add_subcommand("solve", "solve the bidding equilibrium only");
  add_common(solve, true);
  CLI::App* bench = app.add_subcommand("benchmark", "closed-form benchmarks only");
  add_common(bench, true);
  CLI::App* sim = app.add_subcommand("simulate", "finite-population run from a saved solution");
  add_common(sim, false);
  sim->add_option("--solution", solution_path, "saved solution archive")->required();

  CLI11_PARSE(app, argc, argv);

  if (validate->parsed()) {
    carma::ExperimentConfig cfg;
    const int rc = load_config(args, cfg);
    if (rc == kExitOk) std::cout << "ok\n";
    return rc;
  }
  if (run->parsed()) return run_bundle(args, false, false);
  if (solve->parsed()) return run_bundle(args, true, false);
  if (bench->parsed()) return run_bundle(args, false, true);
  if (sim->parsed()) return run_simulate(args, solution_path);
  return kExitOk;
}
