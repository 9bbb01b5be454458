#pragma once

#include <vector>

#include "carma/game.hpp"
#include "carma/mdp.hpp"

// Straightforward enumeration implementations kept as test oracles for the
// optimized kernels. Not used by the solver.
namespace carma::reference {

// Triple sum in natural (tau, u, k, t, b) order.
ActionMass action_mass_naive(const Scenario& sc, const TypeStateDistribution& d, const Policy& pi);

// Scatter pushforward through the public per-state transition rows.
std::vector<double> pushforward_naive(const Scenario& sc, int tau,
                                      const std::vector<double>& d_tau, const Policy& pi,
                                      const SocialContext& ctx);

// Expected population mean karma after one step of (d, pi); equals the
// current mean whenever no transition clamps at k_max.
double mean_karma_after_step(const Scenario& sc, const TypeStateDistribution& d, const Policy& pi,
                             const SocialContext& ctx);

// Stationary distribution of the policy chain by repeated squaring of the
// transition matrix.
std::vector<double> stationary_by_squaring(const Scenario& sc, int tau, const Policy& pi,
                                           const SocialContext& ctx, double mass, int doublings);

// L1 distance between d and its one-step pushforward, per definition.
double stationarity_residual_naive(const Scenario& sc, const TypeStateDistribution& d,
                                   const Policy& pi, const SocialContext& ctx);

}  // namespace carma::reference
