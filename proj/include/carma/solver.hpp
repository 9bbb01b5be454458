#pragma once

#include <cstdint>
#include <vector>

#include "carma/game.hpp"
#include "carma/mdp.hpp"

namespace carma {

struct SolverConfig {
  double damping_policy = 0.05;  // eta_pi
  double damping_dist = 0.2;     // eta_d
  int max_iters = 60000;
  double tol_stationarity = 1e-6;  // L1
  double tol_optimality = 1e-3;    // relative gap
  double epsilon = 1e-4;           // allocation smoothing
  bool anneal_epsilon = true;      // start at anneal_start and shrink
  double anneal_start = 1e-2;
  int anneal_iters = 800;
  double value_tol = 1e-9;       // sup-norm, final value accuracy
  double argmax_rel_tol = 1e-9;  // best-response tie tolerance
  std::uint64_t seed = 0;        // provenance; forwarded to simulation
  int threads = 0;               // 0 = default parallel, 1 = serial
  int progress_every = 0;        // stderr progress; 0 = silent

  void validate() const;
};

struct IterationRecord {
  int iteration = 0;
  double stationarity_res = 0.0;
  double optimality_gap = 0.0;
  double mean_karma = 0.0;
  double avg_payment = 0.0;
  double epsilon = 0.0;
  double eta_policy = 0.0;
  double eta_dist = 0.0;
  double clamp_flow = 0.0;  // population mass hitting the k_max clamp per day
};

struct SolverDiagnostics {
  bool converged = false;
  bool kmax_warning = false;  // stationary mass at k_max above 1e-6
  int iterations = 0;
  double stationarity_res = 0.0;
  double optimality_gap = 0.0;
  double mean_karma = 0.0;
  double karma_drift = 0.0;       // |mean karma - k_bar|
  double clamp_mass_kmax = 0.0;   // stationary mass at k = k_max
  double max_renorm_drift = 0.0;  // per-iteration population-mass drift
  std::vector<IterationRecord> trace;
};

struct SneSolution {
  TypeStateDistribution d_star;
  Policy pi_star;
  ValueFunctions values;
  std::vector<int> b_star_profile;
  SocialContext context;  // rebuilt at the final epsilon
  SolverDiagnostics diagnostics;
};

struct Residuals {
  double stationarity = 0.0;
  double optimality_gap = 0.0;
};

// Stationarity (L1 distance between d and its one-step pushforward) and the
// relative optimality gap over states carrying more than mass_floor of
// population mass.
Residuals residuals(const Scenario& sc, const TypeStateDistribution& d, const Policy& pi,
                    const SocialContext& ctx, double value_tol = 1e-9, double mass_floor = 1e-8);

// Damped best-response / distribution-pushforward iteration for the
// stationary equilibrium. Deterministic: fixed config yields bit-identical
// solutions regardless of thread count.
SneSolution solve_sne(const Scenario& sc, const SolverConfig& config);

}  // namespace carma
