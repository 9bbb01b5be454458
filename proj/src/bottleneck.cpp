#include "carma/bottleneck.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace carma {

void BottleneckParams::validate() const {
  if (n_commuters < 0) throw std::invalid_argument("n_commuters must be >= 0");
  // s_fast == 0 is the degenerate no-fast-lane configuration used by the
  // benchmark comparisons.
  if (s_fast < 0.0) throw std::invalid_argument("s_fast must be >= 0");
  if (s_slow <= 0.0) throw std::invalid_argument("s_slow must be > 0");
  if (dt <= 0.0) throw std::invalid_argument("dt must be > 0");
  if (n_intervals <= 0) throw std::invalid_argument("n_intervals must be > 0");
  if (alpha <= 0.0 || beta <= 0.0 || gamma <= 0.0)
    throw std::invalid_argument("penalty rates must be > 0");
  if (!(beta < alpha && alpha < gamma))
    throw std::invalid_argument("penalty rates must satisfy beta < alpha < gamma");
  if (t_star < 0.0 || t_star >= horizon())
    throw std::invalid_argument("t_star must lie inside [0, n_intervals * dt)");
  if (n_intervals * capacity() * dt < static_cast<double>(n_commuters))
    throw std::invalid_argument("horizon capacity n_intervals * (s_fast + s_slow) * dt "
                                "is below n_commuters");
}

double fast_lane_cost(double u, double t, const BottleneckParams& p) {
  if (u <= 0.0) throw std::invalid_argument("fast_lane_cost: VOT multiplier must be > 0");
  if (t <= p.t_star) return u * p.beta * (p.t_star - t) / 60.0;
  return u * p.gamma * (t - p.t_star) / 60.0;
}

double slow_lane_cost(double u, double t, double queue_veh, const BottleneckParams& p) {
  if (u <= 0.0) throw std::invalid_argument("slow_lane_cost: VOT multiplier must be > 0");
  if (queue_veh < 0.0) throw std::invalid_argument("slow_lane_cost: queue length must be >= 0");
  const double t_q = queue_veh / p.s_slow;
  if (t + t_q <= p.t_star)
    return u * (p.alpha * t_q + p.beta * (p.t_star - t - t_q)) / 60.0;
  return u * (p.alpha * t_q + p.gamma * (t + t_q - p.t_star)) / 60.0;
}

QueueProfile queue_profile(const std::vector<double>& slow_inflow_veh, const BottleneckParams& p) {
  QueueProfile out;
  out.queue_len.resize(slow_inflow_veh.size());
  out.delay.resize(slow_inflow_veh.size());
  const double service = p.s_slow * p.dt;
  double q = 0.0;
  for (std::size_t i = 0; i < slow_inflow_veh.size(); ++i) {
    if (slow_inflow_veh[i] < 0.0)
      throw std::invalid_argument("queue_profile: inflow[" + std::to_string(i) + "] is negative");
    q = std::max(0.0, q + slow_inflow_veh[i] - service);
    out.queue_len[i] = q;
    out.delay[i] = q / p.s_slow;
  }
  return out;
}

ScheduleDelay schedule_delays(double t, double t_q, const BottleneckParams& p) {
  ScheduleDelay d;
  d.early = std::max(0.0, p.t_star - t - t_q);
  d.late = std::max(0.0, t + t_q - p.t_star);
  return d;
}

}  // namespace carma
