#pragma once

#include <vector>

namespace carma {

// Physical and preference parameters of the commute on a discrete departure
// grid. Interval i in [0, n_intervals) corresponds to the departure instant
// t = i * dt minutes. Penalty rates are per hour, all times are minutes, so
// cost formulas divide minute-valued delays by 60.
struct BottleneckParams {
  int n_commuters = 9000;
  double s_fast = 12.0;   // fast-lane service rate, veh/min
  double s_slow = 48.0;   // slow-lane service rate, veh/min
  double dt = 15.0;       // interval length, min
  double alpha = 6.4;     // queuing penalty, cost/hour
  double beta = 4.0;      // early-arrival penalty, cost/hour
  double gamma = 16.0;    // late-arrival penalty, cost/hour
  double t_star = 120.0;  // desired arrival time, min
  int n_intervals = 11;

  double capacity() const { return s_fast + s_slow; }
  double horizon() const { return n_intervals * dt; }
  double interval_start(int i) const { return i * dt; }

  // Throws std::invalid_argument on the first violated invariant.
  void validate() const;
};

// Point-queue state of the slow lane, one entry per departure interval.
// queue_len[i] is the post-inflow, post-service queue of interval i;
// delay[i] = queue_len[i] / s_slow.
struct QueueProfile {
  std::vector<double> queue_len;  // veh
  std::vector<double> delay;      // min
};

struct ScheduleDelay {
  double early = 0.0;  // min
  double late = 0.0;   // min
};

// Travel cost (in cost units) of a fast-lane commuter with VOT multiplier u
// departing at instant t. Piecewise linear with a kink at t_star.
double fast_lane_cost(double u, double t, const BottleneckParams& p);

// Travel cost of a slow-lane commuter facing queue length queue_veh at its
// departure instant t. Continuous across the early/late branch boundary.
double slow_lane_cost(double u, double t, double queue_veh, const BottleneckParams& p);

// Point-queue recursion q[i] = max(0, q[i-1] + inflow[i] - s_slow*dt).
QueueProfile queue_profile(const std::vector<double>& slow_inflow_veh, const BottleneckParams& p);

// Early/late schedule delay for departure t with queuing delay t_q.
// At most one of the two components is positive.
ScheduleDelay schedule_delays(double t, double t_q, const BottleneckParams& p);

}  // namespace carma
