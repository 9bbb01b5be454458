#include "carma/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "carma/kernels.hpp"

namespace carma {

double immediate_reward(double u_val, int t, int b, const SocialContext& ctx,
                        const BottleneckParams& params) {
  if (u_val <= 0.0) throw std::invalid_argument("immediate_reward: VOT multiplier must be > 0");
  const double inst = params.interval_start(t);
  const double p = ctx.psi(t, b);
  const double cf = fast_lane_cost(1.0, inst, params);
  const double cs = slow_lane_cost(1.0, inst, ctx.queue.queue_len[t], params);
  return -u_val * (p * cf + (1.0 - p) * cs);
}

StateTransition state_transition_kernel(const Scenario& sc, int tau, int u, int k, int t, int b,
                                        const SocialContext& ctx) {
  const auto& urg = sc.types[tau].urgency;
  const KarmaTransition kt =
      karma_transition(k, b, ctx.psi(t, b), ctx.redistribution, ctx.redistribution_frac_ceil, sc.grid);
  StateTransition out;
  for (int un = 0; un < urg.n_levels(); ++un) {
    const double pu = urg.at(u, un);
    if (pu == 0.0) continue;
    for (int s = 0; s < kt.n; ++s) {
      if (kt.prob[s] == 0.0) continue;
      out.u_next.push_back(un);
      out.k_next.push_back(kt.k_next[s]);
      out.prob.push_back(pu * kt.prob[s]);
    }
  }
  return out;
}

double policy_reward(const Scenario& sc, int tau, int u, int k, const Policy& pi,
                     const SocialContext& ctx) {
  const TypeShape sh = shape_for(sc, tau);
  const double* row = pi.row(sh, tau, u, k);
  const double u_val = sc.types[tau].urgency.levels[u];
  double r = 0.0;
  for (int t = 0; t < sh.n_t; ++t)
    for (int b = 0; b <= k; ++b) {
      const double w = row[sh.aidx(t, b)];
      if (w > 0.0) r += w * immediate_reward(u_val, t, b, ctx, sc.bn);
    }
  return r;
}

std::vector<double> policy_transition(const Scenario& sc, int tau, int u, int k, const Policy& pi,
                                      const SocialContext& ctx) {
  const TypeShape sh = shape_for(sc, tau);
  const double* row = pi.row(sh, tau, u, k);
  std::vector<double> out(sh.n_states(), 0.0);
  for (int t = 0; t < sh.n_t; ++t)
    for (int b = 0; b <= k; ++b) {
      const double w = row[sh.aidx(t, b)];
      if (w <= 0.0) continue;
      const StateTransition st = state_transition_kernel(sc, tau, u, k, t, b, ctx);
      for (std::size_t i = 0; i < st.prob.size(); ++i)
        out[sh.sidx(st.u_next[i], st.k_next[i])] += w * st.prob[i];
    }
  return out;
}

std::vector<double> evaluate_value(const Scenario& sc, int tau, const Policy& pi,
                                   const SocialContext& ctx, double discount, double tol,
                                   std::vector<double> warm_start) {
  if (!(discount >= 0.0 && discount < 1.0))
    throw std::invalid_argument("evaluate_value: discount must lie in [0, 1)");
  kernels::TypeTables tables;
  kernels::build_type_tables(sc, tau, pi, ctx, tables, false);
  std::vector<double> v = std::move(warm_start);
  if (static_cast<int>(v.size()) != tables.n_states) v.assign(tables.n_states, 0.0);
  kernels::value_sweeps(tables, discount, tol, 10000000, v, false);
  return v;
}

double q_function(const Scenario& sc, int tau, int u, int k, int t, int b,
                  const std::vector<double>& v, const SocialContext& ctx, double discount) {
  const TypeShape sh = shape_for(sc, tau);
  const double u_val = sc.types[tau].urgency.levels[u];
  const StateTransition st = state_transition_kernel(sc, tau, u, k, t, b, ctx);
  double cont = 0.0;
  for (std::size_t i = 0; i < st.prob.size(); ++i)
    cont += st.prob[i] * v[sh.sidx(st.u_next[i], st.k_next[i])];
  return immediate_reward(u_val, t, b, ctx, sc.bn) + discount * cont;
}

std::vector<double> best_response(const Scenario& sc, int tau, [[maybe_unused]] int u, int k,
                                  const std::vector<double>& q_row, double argmax_rel_tol) {
  const TypeShape sh = shape_for(sc, tau);
  double q_max = -HUGE_VAL;
  for (int t = 0; t < sh.n_t; ++t)
    for (int b = 0; b <= k; ++b) q_max = std::max(q_max, q_row[sh.aidx(t, b)]);
  const double cutoff = q_max - argmax_rel_tol * std::max(1.0, std::abs(q_max));
  int hits = 0;
  for (int t = 0; t < sh.n_t; ++t)
    for (int b = 0; b <= k; ++b)
      if (q_row[sh.aidx(t, b)] >= cutoff) ++hits;
  std::vector<double> out(sh.n_actions(), 0.0);
  const double share = 1.0 / hits;
  for (int t = 0; t < sh.n_t; ++t)
    for (int b = 0; b <= k; ++b)
      if (q_row[sh.aidx(t, b)] >= cutoff) out[sh.aidx(t, b)] = share;
  return out;
}

std::vector<double> stationary_distribution(const Scenario& sc, int tau, const Policy& pi,
                                            const SocialContext& ctx, double mass, double tol,
                                            int max_iters) {
  kernels::TypeTables tables;
  kernels::build_type_tables(sc, tau, pi, ctx, tables, false);
  const int n = tables.n_states;
  std::vector<double> x(n, mass / n), next(n, 0.0);
  for (int iter = 0; iter < max_iters; ++iter) {
    kernels::pushforward(tables, x, next, false);
    double sum = 0.0;
    for (double v : next) sum += v;
    if (sum > 0.0) {
      const double scale = mass / sum;
      for (double& v : next) v *= scale;
    }
    double diff = 0.0;
    for (int i = 0; i < n; ++i) diff += std::abs(next[i] - x[i]);
    x.swap(next);
    if (diff <= tol) break;
  }
  return x;
}

}  // namespace carma
