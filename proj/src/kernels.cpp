#include "carma/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace carma::kernels {

void accumulate_action_mass(const Scenario& sc, const TypeStateDistribution& d, const Policy& pi,
                            ActionMass& out, bool parallel) {
  const int n_t = sc.bn.n_intervals;
  const int n_b = sc.grid.n_karma();
  out = ActionMass(n_t, n_b);
  const int n_actions = n_t * n_b;
  const int n_types = sc.n_types();

#pragma omp parallel for if (parallel) schedule(static)
  for (int a = 0; a < n_actions; ++a) {
    double acc = 0.0;
    for (int tau = 0; tau < n_types; ++tau) {
      const TypeShape sh = shape_for(sc, tau);
      const double* dd = d.d[tau].data();
      const double* pp = pi.pi[tau].data();
      const int n_states = sh.n_states();
      for (int x = 0; x < n_states; ++x)
        acc += dd[x] * pp[static_cast<std::size_t>(x) * n_actions + a];
    }
    out.m[a] = acc;
  }
}

void build_type_tables(const Scenario& sc, int tau, const Policy& pi, const SocialContext& ctx,
                       TypeTables& out, bool parallel) {
  const TypeShape sh = shape_for(sc, tau);
  const int n_states = sh.n_states();
  const int n_k = sh.n_k;
  const auto& urg = sc.types[tau].urgency;
  out.n_states = n_states;
  out.reward.assign(n_states, 0.0);
  out.transition.assign(static_cast<std::size_t>(n_states) * n_states, 0.0);
  out.clamp_by_state.assign(n_states, 0.0);

#pragma omp parallel for if (parallel) schedule(static)
  for (int x = 0; x < n_states; ++x) {
    const int u = x / n_k;
    const int k = x % n_k;
    const double u_val = urg.levels[u];
    const double* row = pi.pi[tau].data() + static_cast<std::size_t>(x) * sh.n_actions();
    double* trans = out.transition.data() + static_cast<std::size_t>(x) * n_states;
    double reward = 0.0;
    double clamped = 0.0;
    for (int t = 0; t < sh.n_t; ++t) {
      for (int b = 0; b <= k; ++b) {
        const double w = row[sh.aidx(t, b)];
        if (w <= 0.0) continue;
        reward += w * ctx.base_cost[static_cast<std::size_t>(t) * sh.n_b + b];
        const KarmaTransition tr =
            karma_transition(k, b, ctx.psi(t, b), ctx.redistribution, ctx.redistribution_frac_ceil, sc.grid);
        clamped += w * tr.clamped;
        for (int s = 0; s < tr.n; ++s) {
          const double wk = w * tr.prob[s];
          if (wk == 0.0) continue;
          const int kn = tr.k_next[s];
          for (int un = 0; un < sh.n_u; ++un)
            trans[un * n_k + kn] += wk * urg.at(u, un);
        }
      }
    }
    out.reward[x] = -u_val * reward;
    out.clamp_by_state[x] = clamped;
  }
}

int value_sweeps(const TypeTables& tables, double delta, double tol, int max_sweeps,
                 std::vector<double>& v, bool parallel) {
  const int n = tables.n_states;
  if (static_cast<int>(v.size()) != n) v.assign(n, 0.0);
  std::vector<double> next(n, 0.0);
  int sweeps = 0;
  for (; sweeps < max_sweeps; ++sweeps) {
#pragma omp parallel for if (parallel) schedule(static)
    for (int x = 0; x < n; ++x) {
      const double* row = tables.transition.data() + static_cast<std::size_t>(x) * n;
      double acc = 0.0;
      for (int y = 0; y < n; ++y) acc += row[y] * v[y];
      next[x] = tables.reward[x] + delta * acc;
    }
    double diff = 0.0;
    for (int x = 0; x < n; ++x) diff = std::max(diff, std::abs(next[x] - v[x]));
    v.swap(next);
    if (diff <= tol) {
      ++sweeps;
      break;
    }
  }
  return sweeps;
}

void q_and_best_response(const Scenario& sc, int tau, const std::vector<double>& v,
                         const SocialContext& ctx, double argmax_rel_tol,
                         std::vector<double>* q_out, std::vector<double>* br_out, bool parallel) {
  const TypeShape sh = shape_for(sc, tau);
  const int n_states = sh.n_states();
  const int n_actions = sh.n_actions();
  const int n_k = sh.n_k;
  const auto& urg = sc.types[tau].urgency;
  const double delta = sc.discount;
  if (q_out) q_out->assign(static_cast<std::size_t>(n_states) * n_actions, 0.0);
  if (br_out) br_out->assign(static_cast<std::size_t>(n_states) * n_actions, 0.0);

  // w[u][k+] = sum_{u+} phi[u+|u] * v[u+, k+]
  std::vector<double> w(static_cast<std::size_t>(sh.n_u) * n_k, 0.0);
  for (int u = 0; u < sh.n_u; ++u)
    for (int kn = 0; kn < n_k; ++kn) {
      double acc = 0.0;
      for (int un = 0; un < sh.n_u; ++un) acc += urg.at(u, un) * v[un * n_k + kn];
      w[static_cast<std::size_t>(u) * n_k + kn] = acc;
    }

#pragma omp parallel for if (parallel) schedule(static)
  for (int x = 0; x < n_states; ++x) {
    const int u = x / n_k;
    const int k = x % n_k;
    const double u_val = urg.levels[u];
    const double* wu = w.data() + static_cast<std::size_t>(u) * n_k;
    std::vector<double> q_row(n_actions, 0.0);
    double q_max = -HUGE_VAL;
    for (int t = 0; t < sh.n_t; ++t) {
      for (int b = 0; b <= k; ++b) {
        const KarmaTransition tr =
            karma_transition(k, b, ctx.psi(t, b), ctx.redistribution, ctx.redistribution_frac_ceil, sc.grid);
        double cont = 0.0;
        for (int s = 0; s < tr.n; ++s) cont += tr.prob[s] * wu[tr.k_next[s]];
        const double q =
            -u_val * ctx.base_cost[static_cast<std::size_t>(t) * sh.n_b + b] + delta * cont;
        q_row[sh.aidx(t, b)] = q;
        q_max = std::max(q_max, q);
      }
    }
    if (q_out)
      std::copy(q_row.begin(), q_row.end(),
                q_out->begin() + static_cast<std::size_t>(x) * n_actions);
    if (br_out) {
      const double cutoff = q_max - argmax_rel_tol * std::max(1.0, std::abs(q_max));
      int hits = 0;
      for (int t = 0; t < sh.n_t; ++t)
        for (int b = 0; b <= k; ++b)
          if (q_row[sh.aidx(t, b)] >= cutoff) ++hits;
      const double share = 1.0 / hits;
      double* br = br_out->data() + static_cast<std::size_t>(x) * n_actions;
      for (int t = 0; t < sh.n_t; ++t)
        for (int b = 0; b <= k; ++b)
          if (q_row[sh.aidx(t, b)] >= cutoff) br[sh.aidx(t, b)] = share;
    }
  }
}

void pushforward(const TypeTables& tables, const std::vector<double>& d_tau,
                 std::vector<double>& out, bool parallel) {
  const int n = tables.n_states;
  out.assign(n, 0.0);
#pragma omp parallel for if (parallel) schedule(static)
  for (int y = 0; y < n; ++y) {
    double acc = 0.0;
    for (int x = 0; x < n; ++x)
      acc += d_tau[x] * tables.transition[static_cast<std::size_t>(x) * n + y];
    out[y] = acc;
  }
}

}  // namespace carma::kernels
