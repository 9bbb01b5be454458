#pragma once

#include <vector>

#include "carma/game.hpp"

// Data-parallel inner loops of the equilibrium computation. Every kernel
// takes a `parallel` switch that toggles the OpenMP path; each output element
// is written by exactly one thread and inner sums run in a fixed order, so
// serial and parallel execution produce bit-identical results.
namespace carma::kernels {

// Dense per-type MDP tables under a fixed policy and social context.
struct TypeTables {
  int n_states = 0;
  std::vector<double> reward;          // [n_states]
  std::vector<double> transition;      // [n_states][n_states], row = from-state
  std::vector<double> clamp_by_state;  // policy-weighted probability clamped at k_max

  double p(int from, int to) const {
    return transition[static_cast<std::size_t>(from) * n_states + to];
  }
};

// nu[t,b] = sum_{tau,u,k} d_tau[u,k] * pi_tau[t,b|u,k]; assumes a feasible
// policy (no weight on b > k).
void accumulate_action_mass(const Scenario& sc, const TypeStateDistribution& d, const Policy& pi,
                            ActionMass& out, bool parallel);

// Policy-averaged reward and state-transition matrix for one type.
void build_type_tables(const Scenario& sc, int tau, const Policy& pi, const SocialContext& ctx,
                       TypeTables& out, bool parallel);

// Jacobi iteration v <- reward + delta * P v until the sup-norm successive
// change falls to tol. Returns the number of sweeps performed.
int value_sweeps(const TypeTables& tables, double delta, double tol, int max_sweeps,
                 std::vector<double>& v, bool parallel);

// State-action values and the uniform-over-argmax best response for one type.
// Argmax membership uses a relative tolerance on the row maximum. Either
// output may be null.
void q_and_best_response(const Scenario& sc, int tau, const std::vector<double>& v,
                         const SocialContext& ctx, double argmax_rel_tol,
                         std::vector<double>* q_out, std::vector<double>* br_out, bool parallel);

// d_next[x'] = sum_x d[x] * P[x][x'].
void pushforward(const TypeTables& tables, const std::vector<double>& d_tau,
                 std::vector<double>& out, bool parallel);

}  // namespace carma::kernels
