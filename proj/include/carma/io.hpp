#pragma once

#include <optional>
#include <string>
#include <vector>

#include "carma/benchmarks.hpp"
#include "carma/config.hpp"
#include "carma/metrics.hpp"
#include "carma/montecarlo.hpp"
#include "carma/solver.hpp"

namespace carma::io {

// Canonical float formatting for all emitted tables: 12 significant digits.
std::string format_double(double v);

// Each writer emits one comma-separated table with a header row and returns
// the file name it wrote. Throws std::runtime_error on I/O failure.
std::string write_metrics_csv(const std::string& dir, const Scenario& sc,
                              const std::vector<SchemeMetrics>& metrics);
std::string write_fairness_csv(const std::string& dir, const FairnessReport& report);
std::string write_nom_csv(const std::string& dir, const VotDistribution& vot,
                          const NomEquilibrium& eq);
std::string write_toll_summary_csv(const std::string& dir, const VotDistribution& vot,
                                   const TollEquilibrium& te);
std::string write_toll_profile_csv(const std::string& dir, const TollEquilibrium& te);

std::vector<std::string> write_carma_outputs(const std::string& dir, const Scenario& sc,
                                             const SneSolution& sol,
                                             const TollEquilibrium* toll_overlay);
std::vector<std::string> write_mc_outputs(const std::string& dir, const Scenario& sc,
                                          const SimulationResult& res,
                                          const TypeStateDistribution& d_star);

// Sidecar describing every emitted table in the bundle.
std::string write_schema(const std::string& dir, const std::vector<std::string>& files);

// Versioned solution archive with the full config embedded.
void save_solution(const std::string& path, const ExperimentConfig& cfg, const SneSolution& sol);

struct SavedSolution {
  ExperimentConfig config;
  TypeStateDistribution d_star;
  Policy pi_star;
  std::vector<std::vector<double>> v;
  std::vector<int> b_star;
  bool converged = false;
};
SavedSolution load_solution(const std::string& path);

}  // namespace carma::io
