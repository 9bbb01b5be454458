#pragma once

#include <string>
#include <vector>

#include "carma/bottleneck.hpp"
#include "carma/karma.hpp"

namespace carma {

// Exogenous Markov chain over per-day VOT multipliers.
struct UrgencyProcess {
  std::vector<double> levels;      // strictly ascending, > 0
  std::vector<double> transition;  // row-major n_u x n_u, row-stochastic

  int n_levels() const { return static_cast<int>(levels.size()); }
  double at(int u_from, int u_to) const {
    return transition[static_cast<std::size_t>(u_from) * levels.size() + u_to];
  }
  // Unique stationary distribution; requires exactly one closed
  // communicating class (validated).
  std::vector<double> stationary() const;
  void validate() const;  // throws std::invalid_argument
};

struct CommuterType {
  std::string name;
  double share = 1.0;  // g_tau
  UrgencyProcess urgency;
};

// The full game: bottleneck physics, commuter types, karma grid, discount.
struct Scenario {
  BottleneckParams bn;
  std::vector<CommuterType> types;
  KarmaGrid grid;
  double discount = 0.99;

  int n_types() const { return static_cast<int>(types.size()); }
  // Per-interval fast-lane capacity as population mass.
  double cap_frac() const {
    return bn.s_fast * bn.dt / static_cast<double>(bn.n_commuters);
  }
  void validate() const;
};

// Tensor shape for one commuter type: states (u, k), actions (t, b).
struct TypeShape {
  int n_u = 0, n_k = 0, n_t = 0, n_b = 0;

  int n_states() const { return n_u * n_k; }
  int n_actions() const { return n_t * n_b; }
  std::size_t policy_size() const {
    return static_cast<std::size_t>(n_states()) * n_actions();
  }
  int sidx(int u, int k) const { return u * n_k + k; }
  int aidx(int t, int b) const { return t * n_b + b; }
};

TypeShape shape_for(const Scenario& sc, int type_idx);

// Mass of each commuter type over (urgency, karma) states.
struct TypeStateDistribution {
  std::vector<std::vector<double>> d;  // per type, [sidx(u,k)]

  double type_mass(int tau) const;
  double total_mass() const;
  double mean_karma(const Scenario& sc) const;
};

// Per-type randomized map from (u, k) to joint actions (t, b), b <= k.
// Infeasible bids carry weight zero by construction.
struct Policy {
  std::vector<std::vector<double>> pi;  // per type, [sidx * n_actions + aidx]

  const double* row(const TypeShape& sh, int tau, int u, int k) const {
    return pi[tau].data() + static_cast<std::size_t>(sh.sidx(u, k)) * sh.n_actions();
  }
  double* row(const TypeShape& sh, int tau, int u, int k) {
    return pi[tau].data() + static_cast<std::size_t>(sh.sidx(u, k)) * sh.n_actions();
  }
  // Throws if any conditional row does not sum to 1 or weights b > k.
  void validate(const Scenario& sc) const;
};

// Frozen per-day outcome of a social state: action masses, allocation,
// redistribution amounts, slow-lane queue, and the VOT-independent cost
// base experienced at each action.
//
// `redistribution` is the per-capita amount handed back through the
// floor/ceil lottery. It equals the average payment plus the karma the k_max
// clamp would otherwise destroy, so total karma is preserved exactly on the
// truncated grid (the preservation assumption behind equilibrium existence).
struct SocialContext {
  ActionMass nu;
  AllocationOutcome alloc;
  QueueProfile queue;
  std::vector<double> base_cost;  // [t][b]: psi*c_fast + (1-psi)*c_slow at u=1
  double cap_frac = 0.0;
  double redistribution = 0.0;  // >= alloc.avg_payment
  double redistribution_frac_ceil = 0.0;
  double clamp_reflow = 0.0;  // karma per capita re-minted at the boundary

  double psi(int t, int b) const { return alloc.psi_at(t, b, nu.n_b); }
};

// Population mass over joint actions; rejects policies weighting b > k.
ActionMass action_mass(const Scenario& sc, const TypeStateDistribution& d, const Policy& pi);

// Builds the complete context for one day at the given smoothing (epsilon <= 0
// selects the exact allocation). `parallel` toggles the OpenMP paths.
SocialContext build_social_context(const Scenario& sc, const TypeStateDistribution& d,
                                   const Policy& pi, double epsilon, bool parallel = true);

// Canonical initial social state: stationary urgency marginals, karma
// concentrated at k_bar (floor/ceil split when fractional), uniform policy
// over feasible actions.
void init_social_state(const Scenario& sc, TypeStateDistribution& d, Policy& pi);

}  // namespace carma
