#include "carma/game.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "carma/kernels.hpp"

namespace carma {

namespace {

// Communicating-class analysis on the support graph. A finite chain has a
// unique stationary distribution iff it has exactly one closed class.
int count_closed_classes(const UrgencyProcess& up) {
  const int n = up.n_levels();
  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  for (int i = 0; i < n; ++i) {
    reach[i][i] = true;
    for (int j = 0; j < n; ++j)
      if (up.at(i, j) > 0.0) reach[i][j] = true;
  }
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      if (reach[i][k])
        for (int j = 0; j < n; ++j)
          if (reach[k][j]) reach[i][j] = true;

  int closed = 0;
  std::vector<bool> seen(n, false);
  for (int i = 0; i < n; ++i) {
    if (seen[i]) continue;
    std::vector<int> members;
    for (int j = 0; j < n; ++j)
      if (reach[i][j] && reach[j][i]) members.push_back(j);
    for (int j : members) seen[j] = true;
    bool is_closed = true;
    for (int j : members)
      for (int l = 0; l < n; ++l)
        if (reach[j][l] && !(reach[i][l] && reach[l][i])) is_closed = false;
    if (is_closed) ++closed;
  }
  return closed;
}

}  // namespace

void UrgencyProcess::validate() const {
  const int n = n_levels();
  if (n == 0) throw std::invalid_argument("UrgencyProcess: no levels");
  if (transition.size() != static_cast<std::size_t>(n) * n)
    throw std::invalid_argument("UrgencyProcess: transition matrix size mismatch");
  for (int i = 0; i < n; ++i) {
    if (levels[i] <= 0.0) throw std::invalid_argument("UrgencyProcess: levels must be > 0");
    if (i > 0 && levels[i] <= levels[i - 1])
      throw std::invalid_argument("UrgencyProcess: levels must be strictly ascending");
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      if (at(i, j) < 0.0)
        throw std::invalid_argument("UrgencyProcess: transition entries must be >= 0");
      sum += at(i, j);
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw std::invalid_argument("UrgencyProcess: transition row " + std::to_string(i) +
                                  " does not sum to 1");
  }
  if (count_closed_classes(*this) != 1)
    throw std::invalid_argument("UrgencyProcess: chain must have a unique stationary "
                                "distribution (exactly one closed class)");
}

std::vector<double> UrgencyProcess::stationary() const {
  const int n = n_levels();
  std::vector<double> x(n, 1.0 / n), next(n, 0.0);
  // Damped power iteration on (I + P)/2; robust to periodic chains.
  for (int iter = 0; iter < 100000; ++iter) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += x[i] * at(i, j);
      next[j] = 0.5 * (x[j] + acc);
    }
    double diff = 0.0, sum = 0.0;
    for (int j = 0; j < n; ++j) {
      diff += std::abs(next[j] - x[j]);
      sum += next[j];
    }
    for (int j = 0; j < n; ++j) x[j] = next[j] / sum;
    if (diff < 1e-14) break;
  }
  return x;
}

void Scenario::validate() const {
  bn.validate();
  grid.validate();
  if (types.empty()) throw std::invalid_argument("Scenario: no commuter types");
  if (!(discount > 0.0 && discount < 1.0))
    throw std::invalid_argument("Scenario: discount must lie in (0, 1)");
  double total = 0.0;
  for (const auto& ty : types) {
    if (ty.share < 0.0) throw std::invalid_argument("Scenario: type share must be >= 0");
    ty.urgency.validate();
    total += ty.share;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("Scenario: type shares must sum to 1");
}

TypeShape shape_for(const Scenario& sc, int type_idx) {
  TypeShape sh;
  sh.n_u = sc.types[type_idx].urgency.n_levels();
  sh.n_k = sc.grid.n_karma();
  sh.n_t = sc.bn.n_intervals;
  sh.n_b = sc.grid.n_karma();
  return sh;
}

double TypeStateDistribution::type_mass(int tau) const {
  double s = 0.0;
  for (double v : d[tau]) s += v;
  return s;
}

double TypeStateDistribution::total_mass() const {
  double s = 0.0;
  for (std::size_t tau = 0; tau < d.size(); ++tau) s += type_mass(static_cast<int>(tau));
  return s;
}

double TypeStateDistribution::mean_karma(const Scenario& sc) const {
  double s = 0.0;
  for (int tau = 0; tau < sc.n_types(); ++tau) {
    const TypeShape sh = shape_for(sc, tau);
    for (int u = 0; u < sh.n_u; ++u)
      for (int k = 0; k < sh.n_k; ++k) s += d[tau][sh.sidx(u, k)] * k;
  }
  return s;
}

void Policy::validate(const Scenario& sc) const {
  if (static_cast<int>(pi.size()) != sc.n_types())
    throw std::invalid_argument("Policy: type count mismatch");
  for (int tau = 0; tau < sc.n_types(); ++tau) {
    const TypeShape sh = shape_for(sc, tau);
    if (pi[tau].size() != sh.policy_size())
      throw std::invalid_argument("Policy: tensor size mismatch for type " + std::to_string(tau));
    for (int u = 0; u < sh.n_u; ++u) {
      for (int k = 0; k < sh.n_k; ++k) {
        const double* r = row(sh, tau, u, k);
        double sum = 0.0;
        for (int t = 0; t < sh.n_t; ++t) {
          for (int b = 0; b < sh.n_b; ++b) {
            const double w = r[sh.aidx(t, b)];
            if (w < 0.0) throw std::invalid_argument("Policy: negative action weight");
            if (b > k && w > 0.0)
              throw std::invalid_argument("Policy: weight on infeasible bid b > k at k=" +
                                          std::to_string(k));
            sum += w;
          }
        }
        if (std::abs(sum - 1.0) > 1e-9)
          throw std::invalid_argument("Policy: conditional row does not sum to 1");
      }
    }
  }
}

ActionMass action_mass(const Scenario& sc, const TypeStateDistribution& d, const Policy& pi) {
  pi.validate(sc);
  ActionMass nu;
  kernels::accumulate_action_mass(sc, d, pi, nu, false);
  return nu;
}

namespace {

// Expected karma destroyed per capita by the k_max clamp when `redis` is
// handed back through the floor/ceil lottery. Only the top karma states can
// overflow, so the sweep is cheap.
double clamp_excess(const Scenario& sc, const TypeStateDistribution& d, const Policy& pi,
                    const SocialContext& ctx, double redis) {
  const int hi = static_cast<int>(std::ceil(redis));
  const int lo = static_cast<int>(std::floor(redis));
  const double f = redis - lo;
  const int k_max = sc.grid.k_max;
  if (hi <= 0) return 0.0;
  double excess = 0.0;
  for (int tau = 0; tau < sc.n_types(); ++tau) {
    const TypeShape sh = shape_for(sc, tau);
    for (int u = 0; u < sh.n_u; ++u) {
      for (int k = std::max(0, k_max - hi + 1); k < sh.n_k; ++k) {
        const double mass = d.d[tau][sh.sidx(u, k)];
        if (mass == 0.0) continue;
        const double* row = pi.row(sh, tau, u, k);
        for (int t = 0; t < sh.n_t; ++t)
          for (int b = 0; b <= k; ++b) {
            const double w = row[sh.aidx(t, b)];
            if (w == 0.0) continue;
            const double psi = ctx.psi(t, b);
            const double over_fast_hi = std::max(0, k - b + hi - k_max);
            const double over_fast_lo = std::max(0, k - b + lo - k_max);
            const double over_slow_hi = std::max(0, k + hi - k_max);
            const double over_slow_lo = std::max(0, k + lo - k_max);
            excess += mass * w *
                      (psi * (f * over_fast_hi + (1.0 - f) * over_fast_lo) +
                       (1.0 - psi) * (f * over_slow_hi + (1.0 - f) * over_slow_lo));
          }
      }
    }
  }
  return excess;
}

}  // namespace

SocialContext build_social_context(const Scenario& sc, const TypeStateDistribution& d,
                                   const Policy& pi, double epsilon, bool parallel) {
  SocialContext ctx;
  ctx.cap_frac = sc.cap_frac();
  kernels::accumulate_action_mass(sc, d, pi, ctx.nu, parallel);
  ctx.alloc = allocate(ctx.nu, ctx.cap_frac, epsilon);

  const int n_t = ctx.nu.n_t;
  const int n_b = ctx.nu.n_b;
  std::vector<double> slow_inflow(n_t, 0.0);
  for (int t = 0; t < n_t; ++t) {
    double mass = 0.0;
    for (int b = 0; b < n_b; ++b) mass += ctx.nu.at(t, b) * (1.0 - ctx.psi(t, b));
    slow_inflow[t] = mass * static_cast<double>(sc.bn.n_commuters);
  }
  ctx.queue = queue_profile(slow_inflow, sc.bn);

  ctx.base_cost.assign(static_cast<std::size_t>(n_t) * n_b, 0.0);
  for (int t = 0; t < n_t; ++t) {
    const double inst = sc.bn.interval_start(t);
    const double cf = fast_lane_cost(1.0, inst, sc.bn);
    const double cs = slow_lane_cost(1.0, inst, ctx.queue.queue_len[t], sc.bn);
    for (int b = 0; b < n_b; ++b) {
      const double p = ctx.psi(t, b);
      ctx.base_cost[static_cast<std::size_t>(t) * n_b + b] = p * cf + (1.0 - p) * cs;
    }
  }

  // Re-mint the karma the boundary clamp destroys into the redistribution
  // pool; the handed-back amount solves redis = p_bar + excess(redis).
  double redis = ctx.alloc.avg_payment;
  for (int pass = 0; pass < 8; ++pass) {
    const double next = ctx.alloc.avg_payment + clamp_excess(sc, d, pi, ctx, redis);
    if (next == redis) break;
    redis = next;
  }
  ctx.redistribution = redis;
  ctx.redistribution_frac_ceil = redis - std::floor(redis);
  ctx.clamp_reflow = redis - ctx.alloc.avg_payment;
  return ctx;
}

void init_social_state(const Scenario& sc, TypeStateDistribution& d, Policy& pi) {
  const int n_types = sc.n_types();
  d.d.assign(n_types, {});
  pi.pi.assign(n_types, {});
  for (int tau = 0; tau < n_types; ++tau) {
    const TypeShape sh = shape_for(sc, tau);
    const std::vector<double> urg = sc.types[tau].urgency.stationary();

    const int k_lo = static_cast<int>(std::floor(sc.grid.k_bar));
    const int k_hi = std::min(k_lo + 1, sc.grid.k_max);
    const double w_hi = sc.grid.k_bar - k_lo;

    d.d[tau].assign(sh.n_states(), 0.0);
    for (int u = 0; u < sh.n_u; ++u) {
      const double g = sc.types[tau].share * urg[u];
      d.d[tau][sh.sidx(u, k_lo)] += g * (1.0 - w_hi);
      d.d[tau][sh.sidx(u, k_hi)] += g * w_hi;
    }

    pi.pi[tau].assign(sh.policy_size(), 0.0);
    for (int u = 0; u < sh.n_u; ++u) {
      for (int k = 0; k < sh.n_k; ++k) {
        double* r = pi.row(sh, tau, u, k);
        const double w = 1.0 / (sh.n_t * (k + 1));
        for (int t = 0; t < sh.n_t; ++t)
          for (int b = 0; b <= k; ++b) r[sh.aidx(t, b)] = w;
      }
    }
  }
}

}  // namespace carma
