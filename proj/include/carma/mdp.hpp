#pragma once

#include <vector>

#include "carma/game.hpp"

namespace carma {

// Value and state-action value functions of one commuter type.
struct ValueFunctions {
  std::vector<std::vector<double>> v;  // per type, [sidx]
  std::vector<std::vector<double>> q;  // per type, [sidx * n_actions + aidx]
};

// Expected one-day reward of a commuter with VOT u_val choosing (t, b).
double immediate_reward(double u_val, int t, int b, const SocialContext& ctx,
                        const BottleneckParams& params);

// Joint (urgency, karma) transition for one state-action pair; entries with
// zero probability are omitted.
struct StateTransition {
  std::vector<int> u_next;
  std::vector<int> k_next;
  std::vector<double> prob;
};
StateTransition state_transition_kernel(const Scenario& sc, int tau, int u, int k, int t, int b,
                                        const SocialContext& ctx);

// Policy-averaged reward R_tau[u,k].
double policy_reward(const Scenario& sc, int tau, int u, int k, const Policy& pi,
                     const SocialContext& ctx);

// Policy-averaged transition row over (u+, k+), dense [sidx].
std::vector<double> policy_transition(const Scenario& sc, int tau, int u, int k, const Policy& pi,
                                      const SocialContext& ctx);

// Fixed point of v = R + delta * P v by iterative application, to sup-norm
// successive change <= tol. `warm_start` seeds the iteration when non-empty.
std::vector<double> evaluate_value(const Scenario& sc, int tau, const Policy& pi,
                                   const SocialContext& ctx, double discount, double tol = 1e-9,
                                   std::vector<double> warm_start = {});

// Q_tau[u,k,t,b] = zeta + delta * sum rho * v.
double q_function(const Scenario& sc, int tau, int u, int k, int t, int b,
                  const std::vector<double>& v, const SocialContext& ctx, double discount);

// Uniform distribution over the argmax set of Q over feasible actions,
// with relative tolerance argmax_rel_tol for argmax membership.
std::vector<double> best_response(const Scenario& sc, int tau, int u, int k,
                                  const std::vector<double>& q_row, double argmax_rel_tol = 1e-9);

// Left fixed point of the policy transition restricted to type tau,
// normalized to total mass `mass`, by power iteration to L1 residual <= tol.
std::vector<double> stationary_distribution(const Scenario& sc, int tau, const Policy& pi,
                                            const SocialContext& ctx, double mass,
                                            double tol = 1e-10, int max_iters = 200000);

}  // namespace carma
