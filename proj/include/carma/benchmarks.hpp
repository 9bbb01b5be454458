#pragma once

#include <vector>

#include "carma/bottleneck.hpp"

namespace carma {

// Population distribution over VOT multiplier levels, ascending in level.
struct VotDistribution {
  std::vector<double> levels;  // u_1 < ... < u_M, all > 0
  std::vector<double> probs;   // P[u_j], sums to 1

  double mean() const;
  void validate() const;  // throws std::invalid_argument
};

// Closed-form no-control equilibrium. c_star is in cost units (hour-based
// penalty rates applied to minute-valued delays divided by 60); times are
// minutes.
struct NomEquilibrium {
  double c_star = 0.0;
  double t_start = 0.0;
  double t_end = 0.0;
  double t_peak = 0.0;
  double mean_queue_delay = 0.0;        // min
  double mean_cost = 0.0;               // cost units
  std::vector<double> per_level_cost;   // cost units, per VOT level
};

// Closed-form optimally tolled fast lane. The profile is continuous,
// zero at the fast-lane window edges and maximal at t_star.
struct TollEquilibrium {
  int m_index = 0;    // marginal VOT group (index into levels)
  double r_m = 0.0;   // fraction of group m on the slow lane
  std::vector<std::pair<double, double>> toll_breakpoints;  // (time min, price)
  std::vector<double> per_level_queue_delay;  // min
  std::vector<double> per_level_cost;         // cost units
  std::vector<double> per_level_fast_frac;    // fraction of level on fast lane
  double system_queue_delay = 0.0;            // min
  double system_cost = 0.0;                   // cost units
  double peak_price = 0.0;
  double window_start = 0.0;  // min; fast-lane service window
  double window_end = 0.0;
};

NomEquilibrium nom_equilibrium(const BottleneckParams& params, const VotDistribution& vot);

// Requires s_fast < s_fast + s_slow (a slow lane exists); s_fast == 0
// degenerates to NOM on every measure.
TollEquilibrium toll_equilibrium(const BottleneckParams& params, const VotDistribution& vot);

// Piecewise-linear interpolation of the toll breakpoints; zero outside the
// fast-lane window.
double toll_price(const TollEquilibrium& te, double t);

}  // namespace carma
