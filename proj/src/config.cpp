#include "carma/config.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

namespace carma {

namespace {

using nlohmann::json;

void expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
}

void check_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key))
      throw ConfigError(path.empty() ? "unknown field '" + key + "'"
                                     : path + ": unknown field '" + key + "'");
}

template <typename T>
T get_field(const json& j, const char* key, const T& fallback, const std::string& path) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path + "." + key + ": wrong type");
  }
}

Scheme scheme_from_string(const std::string& s, const std::string& path) {
  if (s == "NOM") return Scheme::NOM;
  if (s == "TOLL") return Scheme::TOLL;
  if (s == "CARMA") return Scheme::CARMA;
  throw ConfigError(path + ": unknown scheme '" + s + "' (expected NOM, TOLL or CARMA)");
}

BottleneckParams parse_bottleneck(const json& j, const std::string& path) {
  expect_object(j, path);
  check_keys(j, path,
             {"n_commuters", "s_fast", "s_slow", "dt_min", "alpha", "beta", "gamma",
              "t_star_min", "n_intervals"});
  BottleneckParams bn;
  bn.n_commuters = get_field(j, "n_commuters", bn.n_commuters, path);
  bn.s_fast = get_field(j, "s_fast", bn.s_fast, path);
  bn.s_slow = get_field(j, "s_slow", bn.s_slow, path);
  bn.dt = get_field(j, "dt_min", bn.dt, path);
  bn.alpha = get_field(j, "alpha", bn.alpha, path);
  bn.beta = get_field(j, "beta", bn.beta, path);
  bn.gamma = get_field(j, "gamma", bn.gamma, path);
  bn.t_star = get_field(j, "t_star_min", bn.t_star, path);
  bn.n_intervals = get_field(j, "n_intervals", bn.n_intervals, path);
  return bn;
}

CommuterType parse_type(const json& j, const std::string& path, int index) {
  expect_object(j, path);
  check_keys(j, path, {"name", "share", "levels", "transition"});
  CommuterType ty;
  ty.name = get_field<std::string>(j, "name", "type" + std::to_string(index + 1), path);
  ty.share = get_field(j, "share", 1.0, path);
  if (!j.contains("levels")) throw ConfigError(path + ".levels: required");
  ty.urgency.levels = get_field<std::vector<double>>(j, "levels", {}, path);
  if (!j.contains("transition")) throw ConfigError(path + ".transition: required");
  std::vector<std::vector<double>> rows;
  try {
    rows = j.at("transition").get<std::vector<std::vector<double>>>();
  } catch (const json::exception&) {
    throw ConfigError(path + ".transition: wrong type");
  }
  const std::size_t n = ty.urgency.levels.size();
  if (rows.size() != n) throw ConfigError(path + ".transition: expected " + std::to_string(n) +
                                          " rows to match levels");
  for (const auto& row : rows) {
    if (row.size() != n)
      throw ConfigError(path + ".transition: ragged row (expected " + std::to_string(n) +
                        " entries)");
    ty.urgency.transition.insert(ty.urgency.transition.end(), row.begin(), row.end());
  }
  return ty;
}

SolverConfig parse_solver(const json& j, const std::string& path) {
  expect_object(j, path);
  check_keys(j, path,
             {"damping_policy", "damping_dist", "max_iters", "tol_stationarity",
              "tol_optimality", "epsilon", "anneal_epsilon", "anneal_start", "anneal_iters",
              "value_tol", "argmax_rel_tol", "seed", "threads", "progress_every"});
  SolverConfig sv;
  sv.damping_policy = get_field(j, "damping_policy", sv.damping_policy, path);
  sv.damping_dist = get_field(j, "damping_dist", sv.damping_dist, path);
  sv.max_iters = get_field(j, "max_iters", sv.max_iters, path);
  sv.tol_stationarity = get_field(j, "tol_stationarity", sv.tol_stationarity, path);
  sv.tol_optimality = get_field(j, "tol_optimality", sv.tol_optimality, path);
  sv.epsilon = get_field(j, "epsilon", sv.epsilon, path);
  sv.anneal_epsilon = get_field(j, "anneal_epsilon", sv.anneal_epsilon, path);
  sv.anneal_start = get_field(j, "anneal_start", sv.anneal_start, path);
  sv.anneal_iters = get_field(j, "anneal_iters", sv.anneal_iters, path);
  sv.value_tol = get_field(j, "value_tol", sv.value_tol, path);
  sv.argmax_rel_tol = get_field(j, "argmax_rel_tol", sv.argmax_rel_tol, path);
  sv.seed = get_field(j, "seed", sv.seed, path);
  sv.threads = get_field(j, "threads", sv.threads, path);
  sv.progress_every = get_field(j, "progress_every", sv.progress_every, path);
  return sv;
}

McConfig parse_mc(const json& j, const std::string& path, bool* enabled) {
  expect_object(j, path);
  check_keys(j, path, {"enabled", "n_agents", "days", "burn_in", "seed", "track_agents"});
  McConfig mc;
  *enabled = get_field(j, "enabled", false, path);
  mc.n_agents = get_field(j, "n_agents", mc.n_agents, path);
  mc.days = get_field(j, "days", mc.days, path);
  mc.burn_in = get_field(j, "burn_in", mc.burn_in, path);
  mc.seed = get_field(j, "seed", mc.seed, path);
  mc.track_agents = get_field(j, "track_agents", mc.track_agents, path);
  return mc;
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  expect_object(j, "");
  check_keys(j, "",
             {"bottleneck", "types", "karma", "discount", "solver", "schemes", "montecarlo",
              "output"});
  ExperimentConfig cfg;
  if (j.contains("bottleneck")) cfg.bottleneck = parse_bottleneck(j.at("bottleneck"), "bottleneck");
  if (!j.contains("types")) throw ConfigError("types: required");
  if (!j.at("types").is_array()) throw ConfigError("types: expected an array");
  int i = 0;
  for (const auto& tj : j.at("types")) {
    cfg.types.push_back(parse_type(tj, "types[" + std::to_string(i) + "]", i));
    ++i;
  }
  if (j.contains("karma")) {
    const json& kj = j.at("karma");
    expect_object(kj, "karma");
    check_keys(kj, "karma", {"k_bar", "k_max"});
    cfg.karma.k_bar = get_field(kj, "k_bar", cfg.karma.k_bar, "karma");
    cfg.karma.k_max = get_field(kj, "k_max", cfg.karma.k_max, "karma");
  }
  cfg.discount = get_field(j, "discount", cfg.discount, "");
  if (j.contains("solver")) cfg.solver = parse_solver(j.at("solver"), "solver");
  if (j.contains("schemes")) {
    if (!j.at("schemes").is_array()) throw ConfigError("schemes: expected an array");
    cfg.schemes.clear();
    for (const auto& sj : j.at("schemes"))
      cfg.schemes.push_back(scheme_from_string(sj.get<std::string>(), "schemes"));
  }
  if (j.contains("montecarlo"))
    cfg.montecarlo = parse_mc(j.at("montecarlo"), "montecarlo", &cfg.mc_enabled);
  if (j.contains("output")) {
    const json& oj = j.at("output");
    expect_object(oj, "output");
    check_keys(oj, "output", {"dir", "formats"});
    cfg.out_dir = get_field<std::string>(oj, "dir", cfg.out_dir, "output");
    cfg.formats = get_field(oj, "formats", cfg.formats, "output");
  }
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  return parse_config(j);
}

nlohmann::json to_json(const ExperimentConfig& cfg) {
  json j;
  j["bottleneck"] = {{"n_commuters", cfg.bottleneck.n_commuters},
                     {"s_fast", cfg.bottleneck.s_fast},
                     {"s_slow", cfg.bottleneck.s_slow},
                     {"dt_min", cfg.bottleneck.dt},
                     {"alpha", cfg.bottleneck.alpha},
                     {"beta", cfg.bottleneck.beta},
                     {"gamma", cfg.bottleneck.gamma},
                     {"t_star_min", cfg.bottleneck.t_star},
                     {"n_intervals", cfg.bottleneck.n_intervals}};
  j["types"] = json::array();
  for (const auto& ty : cfg.types) {
    json tj;
    tj["name"] = ty.name;
    tj["share"] = ty.share;
    tj["levels"] = ty.urgency.levels;
    json rows = json::array();
    const int n = ty.urgency.n_levels();
    for (int r = 0; r < n; ++r) {
      json row = json::array();
      for (int c = 0; c < n; ++c) row.push_back(ty.urgency.at(r, c));
      rows.push_back(row);
    }
    tj["transition"] = rows;
    j["types"].push_back(tj);
  }
  j["karma"] = {{"k_bar", cfg.karma.k_bar}, {"k_max", cfg.karma.k_max}};
  j["discount"] = cfg.discount;
  j["solver"] = {{"damping_policy", cfg.solver.damping_policy},
                 {"damping_dist", cfg.solver.damping_dist},
                 {"max_iters", cfg.solver.max_iters},
                 {"tol_stationarity", cfg.solver.tol_stationarity},
                 {"tol_optimality", cfg.solver.tol_optimality},
                 {"epsilon", cfg.solver.epsilon},
                 {"anneal_epsilon", cfg.solver.anneal_epsilon},
                 {"anneal_start", cfg.solver.anneal_start},
                 {"anneal_iters", cfg.solver.anneal_iters},
                 {"value_tol", cfg.solver.value_tol},
                 {"argmax_rel_tol", cfg.solver.argmax_rel_tol},
                 {"seed", cfg.solver.seed},
                 {"threads", cfg.solver.threads},
                 {"progress_every", cfg.solver.progress_every}};
  json schemes = json::array();
  for (Scheme s : cfg.schemes) schemes.push_back(scheme_name(s));
  j["schemes"] = schemes;
  j["montecarlo"] = {{"enabled", cfg.mc_enabled},
                     {"n_agents", cfg.montecarlo.n_agents},
                     {"days", cfg.montecarlo.days},
                     {"burn_in", cfg.montecarlo.burn_in},
                     {"seed", cfg.montecarlo.seed},
                     {"track_agents", cfg.montecarlo.track_agents}};
  j["output"] = {{"dir", cfg.out_dir}, {"formats", cfg.formats}};
  return j;
}

std::vector<std::string> validate_config(const ExperimentConfig& cfg) {
  std::vector<std::string> out;
  try {
    cfg.bottleneck.validate();
  } catch (const std::exception& e) {
    out.push_back(std::string("bottleneck: ") + e.what());
  }
  try {
    cfg.karma.validate();
  } catch (const std::exception& e) {
    out.push_back(std::string("karma: ") + e.what());
  }
  if (cfg.types.empty()) out.push_back("types: at least one commuter type is required");
  double share_sum = 0.0;
  for (std::size_t i = 0; i < cfg.types.size(); ++i) {
    const auto& ty = cfg.types[i];
    const std::string path = "types[" + std::to_string(i) + "]";
    if (ty.share < 0.0) out.push_back(path + ".share: must be >= 0");
    share_sum += ty.share;
    try {
      ty.urgency.validate();
    } catch (const std::exception& e) {
      out.push_back(path + ": " + e.what());
    }
  }
  if (!cfg.types.empty() && std::abs(share_sum - 1.0) > 1e-9)
    out.push_back("types: shares must sum to 1 (got " + std::to_string(share_sum) + ")");
  if (!(cfg.discount > 0.0 && cfg.discount < 1.0))
    out.push_back("discount: must lie in (0, 1)");
  try {
    cfg.solver.validate();
  } catch (const std::exception& e) {
    out.push_back(std::string("solver: ") + e.what());
  }
  try {
    cfg.montecarlo.validate();
  } catch (const std::exception& e) {
    out.push_back(std::string("montecarlo: ") + e.what());
  }
  if (cfg.schemes.empty()) out.push_back("schemes: at least one scheme is required");
  for (const auto& f : cfg.formats)
    if (f != "csv") out.push_back("output.formats: unsupported format '" + f + "'");
  return out;
}

Scenario scenario_from(const ExperimentConfig& cfg) {
  Scenario sc;
  sc.bn = cfg.bottleneck;
  sc.types = cfg.types;
  sc.grid = cfg.karma;
  sc.discount = cfg.discount;
  return sc;
}

}  // namespace carma
