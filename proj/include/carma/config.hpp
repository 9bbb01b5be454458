#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "carma/game.hpp"
#include "carma/metrics.hpp"
#include "carma/montecarlo.hpp"
#include "carma/solver.hpp"

namespace carma {

// Parse-time failure; the message names the offending field.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One experiment: scenario, solver and simulation settings, output layout.
// Every field except the type list has a default, so a minimal config
// specifies only `types`.
struct ExperimentConfig {
  BottleneckParams bottleneck;
  std::vector<CommuterType> types;
  KarmaGrid karma;
  double discount = 0.99;
  SolverConfig solver;
  std::vector<Scheme> schemes = {Scheme::NOM, Scheme::TOLL, Scheme::CARMA};
  bool mc_enabled = false;
  McConfig montecarlo;
  std::string out_dir = "out";
  std::vector<std::string> formats = {"csv"};
};

// Strict parse: unknown keys and type mismatches raise ConfigError with the
// field path.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig parse_config_file(const std::string& path);

nlohmann::json to_json(const ExperimentConfig& cfg);

// All invariant violations, each naming the field block; empty when valid.
std::vector<std::string> validate_config(const ExperimentConfig& cfg);

Scenario scenario_from(const ExperimentConfig& cfg);

}  // namespace carma
