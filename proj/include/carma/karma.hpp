#pragma once

#include <array>
#include <vector>

namespace carma {

// Integer karma state space {0, ..., k_max} with target mean k_bar.
struct KarmaGrid {
  int k_max = 40;
  double k_bar = 10.0;

  int n_karma() const { return k_max + 1; }
  void validate() const;  // throws std::invalid_argument
};

// Population mass over joint actions (departure interval, bid).
struct ActionMass {
  int n_t = 0;
  int n_b = 0;
  std::vector<double> m;  // row-major [t][b], total mass 1

  ActionMass() = default;
  ActionMass(int t, int b) : n_t(t), n_b(b), m(static_cast<std::size_t>(t) * b, 0.0) {}
  double& at(int t, int b) { return m[static_cast<std::size_t>(t) * n_b + b]; }
  double at(int t, int b) const { return m[static_cast<std::size_t>(t) * n_b + b]; }
  double total() const;
};

// Auction outcome at fixed action mass: threshold bids, fast-lane entry
// probabilities, and the uniform redistribution amounts.
struct AllocationOutcome {
  std::vector<int> b_star;     // threshold bid per interval
  std::vector<double> psi;     // P[fast | t, b], row-major [t][b]
  double avg_payment = 0.0;    // karma units
  double frac_ceil = 0.0;      // mass receiving ceil(avg_payment)
  double epsilon = 0.0;        // smoothing used (0 = exact allocation)

  double psi_at(int t, int b, int n_b) const {
    return psi[static_cast<std::size_t>(t) * n_b + b];
  }
};

// Highest bid whose upper-tail mass at interval t still covers cap_frac.
// Returns 0 when even the full mass at t is below cap_frac (everyone enters).
int threshold_bid(const ActionMass& nu, int t, double cap_frac);

// Exact fast-lane entry probability: 1 above the threshold, 0 below, and a
// proportional draw on the remaining capacity at the threshold bid.
double outcome_prob_exact(const ActionMass& nu, int t, int b, double cap_frac);

// Continuous approximation of the entry probability; epsilon > 0. The middle
// branch is clamped to [0, 1].
double outcome_prob_smooth(const ActionMass& nu, int t, int b, double cap_frac, double epsilon);

// Karma paid by a commuter bidding b with the given outcome.
double payment(int b, bool fast);

// Mean karma collected per commuter under psi, and its fractional part.
struct AveragePayment {
  double p_bar = 0.0;
  double frac_ceil = 0.0;
};
AveragePayment average_payment(const ActionMass& nu, const std::vector<double>& psi_fast);

// One-step karma distribution for a commuter holding k and bidding b, given
// its fast-entry probability and the population redistribution amounts.
// Outcomes beyond k_max are clamped to k_max; `clamped` reports the
// probability mass that was moved by the clamp.
struct KarmaTransition {
  std::array<int, 4> k_next{};
  std::array<double, 4> prob{};
  int n = 0;
  double clamped = 0.0;
};
KarmaTransition karma_transition(int k, int b, double psi_fast, double p_bar, double frac_ceil,
                                 const KarmaGrid& grid);

// Allocation at every (t, b) of the action mass; epsilon <= 0 selects the
// exact rule, otherwise the smooth approximation.
AllocationOutcome allocate(const ActionMass& nu, double cap_frac, double epsilon);

}  // namespace carma
