#include "carma/benchmarks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace carma {

namespace {
constexpr double kTieTol = 1e-12;
}

double VotDistribution::mean() const {
  double m = 0.0;
  for (std::size_t j = 0; j < levels.size(); ++j) m += probs[j] * levels[j];
  return m;
}

void VotDistribution::validate() const {
  if (levels.empty()) throw std::invalid_argument("VotDistribution: no levels");
  if (levels.size() != probs.size())
    throw std::invalid_argument("VotDistribution: levels/probs size mismatch");
  double sum = 0.0;
  for (std::size_t j = 0; j < levels.size(); ++j) {
    if (levels[j] <= 0.0) throw std::invalid_argument("VotDistribution: levels must be > 0");
    if (j > 0 && levels[j] <= levels[j - 1])
      throw std::invalid_argument("VotDistribution: levels must be strictly ascending");
    if (probs[j] < 0.0) throw std::invalid_argument("VotDistribution: probs must be >= 0");
    sum += probs[j];
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("VotDistribution: probs must sum to 1");
}

NomEquilibrium nom_equilibrium(const BottleneckParams& params, const VotDistribution& vot) {
  params.validate();
  vot.validate();
  NomEquilibrium eq;
  const double s = params.capacity();
  const double rush = static_cast<double>(params.n_commuters) / s;  // min
  eq.c_star = (params.beta * params.gamma / (params.beta + params.gamma)) * rush / 60.0;
  eq.t_start = params.t_star - 60.0 * eq.c_star / params.beta;
  eq.t_end = params.t_star + 60.0 * eq.c_star / params.gamma;
  eq.t_peak = params.t_star - 60.0 * eq.c_star / params.alpha;
  eq.mean_queue_delay = 60.0 * eq.c_star / (2.0 * params.alpha);
  eq.per_level_cost.resize(vot.levels.size());
  double mean_cost = 0.0;
  for (std::size_t j = 0; j < vot.levels.size(); ++j) {
    eq.per_level_cost[j] = vot.levels[j] * eq.c_star;
    mean_cost += vot.probs[j] * eq.per_level_cost[j];
  }
  eq.mean_cost = mean_cost;
  return eq;
}

TollEquilibrium toll_equilibrium(const BottleneckParams& params, const VotDistribution& vot) {
  params.validate();
  vot.validate();
  const double s = params.capacity();
  if (params.s_fast >= s)
    throw std::invalid_argument("toll_equilibrium: s_fast must be smaller than total capacity");

  const NomEquilibrium nom = nom_equilibrium(params, vot);
  const int n_levels = static_cast<int>(vot.levels.size());
  const double slow_share = params.s_slow / s;

  // Marginal group: smallest m with cumulative mass >= slow_share. When the
  // boundary lands exactly on a cumulative probability, the next group becomes
  // marginal with r_m = 0 (full fast-lane access for it).
  int m = n_levels - 1;
  double below = 0.0;  // cumulative mass of groups strictly below m
  {
    double cum = 0.0;
    for (int j = 0; j < n_levels; ++j) {
      const double prev = cum;
      cum += vot.probs[j];
      if (cum >= slow_share - kTieTol) {
        if (std::abs(cum - slow_share) <= kTieTol && j + 1 < n_levels) {
          m = j + 1;
          below = cum;
        } else {
          m = j;
          below = prev;
        }
        break;
      }
    }
  }

  TollEquilibrium te;
  te.m_index = m;
  double r = vot.probs[m] > 0.0
                 ? std::clamp((slow_share - below) / vot.probs[m], 0.0, 1.0)
                 : 0.0;
  if (r < kTieTol) r = 0.0;
  if (r > 1.0 - kTieTol) r = 1.0;
  te.r_m = r;

  te.per_level_queue_delay.resize(n_levels);
  te.per_level_cost.resize(n_levels);
  te.per_level_fast_frac.resize(n_levels);
  // half_ratio is infinite at s_fast == 0; every branch using it is gated on
  // a nonzero fast-lane share.
  const double half_ratio = 0.5 * s / params.s_fast;
  for (int j = 0; j < n_levels; ++j) {
    const double u = vot.levels[j];
    if (j < m) {
      te.per_level_queue_delay[j] = nom.mean_queue_delay;
      te.per_level_cost[j] = u * nom.c_star;
      te.per_level_fast_frac[j] = 0.0;
    } else if (j > m) {
      te.per_level_queue_delay[j] = 0.0;
      te.per_level_cost[j] = u * nom.c_star * (1.0 - half_ratio * vot.probs[j]);
      te.per_level_fast_frac[j] = 1.0;
    } else if (te.r_m == 1.0) {
      te.per_level_queue_delay[j] = nom.mean_queue_delay;
      te.per_level_cost[j] = u * nom.c_star;
      te.per_level_fast_frac[j] = 0.0;
    } else {
      te.per_level_queue_delay[j] = te.r_m * nom.mean_queue_delay;
      te.per_level_cost[j] =
          u * nom.c_star * (1.0 - (1.0 - te.r_m) * half_ratio * vot.probs[j]);
      te.per_level_fast_frac[j] = 1.0 - te.r_m;
    }
  }

  te.system_queue_delay = slow_share * nom.mean_queue_delay;
  double cost = 0.0;
  for (int j = 0; j < n_levels; ++j) cost += vot.probs[j] * te.per_level_cost[j];
  te.system_cost = cost;

  // Toll profile. Each fast group j occupies a service window of length
  // W_j = fast_mass_j * N / s_fast minutes, split gamma:beta between the
  // early and late side of t_star, with higher-VOT groups adjacent to
  // t_star. The price rises with slope u_j*beta/60 per minute on the early
  // side and falls with u_j*gamma/60 on the late side, is zero at the outer
  // window edges and peaks at t_star.
  struct FastGroup {
    double u;
    double early_len;
    double late_len;
  };
  std::vector<FastGroup> fast;  // ordered from marginal (outermost) inward
  const double early_frac = params.gamma / (params.beta + params.gamma);
  for (int j = m; j < n_levels; ++j) {
    const double mass = vot.probs[j] * te.per_level_fast_frac[j];
    if (mass <= 0.0) continue;
    const double window = mass * static_cast<double>(params.n_commuters) / params.s_fast;
    fast.push_back({vot.levels[j], early_frac * window, (1.0 - early_frac) * window});
  }

  if (!fast.empty()) {
    double t_early = params.t_star;
    double t_late = params.t_star;
    for (const auto& g : fast) {
      t_early -= g.early_len;
      t_late += g.late_len;
    }
    te.window_start = t_early;
    te.window_end = t_late;

    std::vector<std::pair<double, double>> early_pts, late_pts;
    double t = t_early, price = 0.0;
    early_pts.emplace_back(t, price);
    for (auto it = fast.rbegin(); it != fast.rend(); ++it) {  // outermost first
      price += it->u * params.beta * it->early_len / 60.0;
      t += it->early_len;
      early_pts.emplace_back(t, price);
    }
    te.peak_price = price;
    t = t_late;
    price = 0.0;
    late_pts.emplace_back(t, price);
    for (auto it = fast.rbegin(); it != fast.rend(); ++it) {
      price += it->u * params.gamma * it->late_len / 60.0;
      t -= it->late_len;
      late_pts.emplace_back(t, price);
    }
    te.toll_breakpoints = early_pts;
    // Late-side points were built outside-in; append inner-to-outer, skipping
    // the duplicated peak at t_star.
    for (auto it = late_pts.rbegin(); it != late_pts.rend(); ++it) {
      if (std::abs(it->first - params.t_star) < 1e-12) continue;
      te.toll_breakpoints.push_back(*it);
    }
  } else {
    te.window_start = params.t_star;
    te.window_end = params.t_star;
    te.peak_price = 0.0;
  }
  return te;
}

double toll_price(const TollEquilibrium& te, double t) {
  const auto& bp = te.toll_breakpoints;
  if (bp.size() < 2) return 0.0;
  if (t <= bp.front().first || t >= bp.back().first) return 0.0;
  auto hi = std::upper_bound(bp.begin(), bp.end(), t,
                             [](double x, const std::pair<double, double>& e) { return x < e.first; });
  auto lo = hi - 1;
  const double span = hi->first - lo->first;
  if (span <= 0.0) return lo->second;
  const double w = (t - lo->first) / span;
  return lo->second + w * (hi->second - lo->second);
}

}  // namespace carma
