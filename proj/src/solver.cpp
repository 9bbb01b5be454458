#include "carma/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "carma/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace carma {

namespace {

struct Evaluation {
  std::vector<kernels::TypeTables> tables;
  std::vector<std::vector<double>> q;
  std::vector<std::vector<double>> br;
  double stationarity = 0.0;
  double gap = 0.0;
  double clamp_flow = 0.0;
};

// Running element-wise average of social states over a trailing window; the
// center of a residual limit cycle is a better iterate than any point on it.
struct StateAverager {
  TypeStateDistribution d_sum;
  Policy pi_sum;
  int count = 0;

  void reset(const Scenario& sc) {
    d_sum.d.assign(sc.n_types(), {});
    pi_sum.pi.assign(sc.n_types(), {});
    for (int tau = 0; tau < sc.n_types(); ++tau) {
      const TypeShape sh = shape_for(sc, tau);
      d_sum.d[tau].assign(sh.n_states(), 0.0);
      pi_sum.pi[tau].assign(sh.policy_size(), 0.0);
    }
    count = 0;
  }
  void add(const TypeStateDistribution& d, const Policy& pi) {
    for (std::size_t tau = 0; tau < d_sum.d.size(); ++tau) {
      for (std::size_t i = 0; i < d_sum.d[tau].size(); ++i) d_sum.d[tau][i] += d.d[tau][i];
      for (std::size_t i = 0; i < pi_sum.pi[tau].size(); ++i)
        pi_sum.pi[tau][i] += pi.pi[tau][i];
    }
    ++count;
  }
  void mean(TypeStateDistribution& d, Policy& pi) const {
    const double inv = 1.0 / count;
    d = d_sum;
    pi = pi_sum;
    for (std::size_t tau = 0; tau < d.d.size(); ++tau) {
      for (double& v : d.d[tau]) v *= inv;
      for (double& v : pi.pi[tau]) v *= inv;
    }
  }
};

double epsilon_at(const SolverConfig& c, int iter) {
  if (!c.anneal_epsilon || c.anneal_iters <= 0 || iter >= c.anneal_iters ||
      c.anneal_start <= c.epsilon)
    return c.epsilon;
  const double frac = 1.0 - static_cast<double>(iter) / c.anneal_iters;
  return c.epsilon * std::pow(c.anneal_start / c.epsilon, frac);
}

// Builds tables, values, Q, best responses and both residuals at (d, pi).
// `values` serves as warm start and receives the refreshed solution.
void evaluate_social_state(const Scenario& sc, const TypeStateDistribution& d, const Policy& pi,
                           const SocialContext& ctx, double value_tol, double argmax_rel_tol,
                           double mass_floor, bool parallel,
                           std::vector<std::vector<double>>& values, Evaluation& ev) {
  const int n_types = sc.n_types();
  ev.tables.resize(n_types);
  ev.q.resize(n_types);
  ev.br.resize(n_types);
  if (static_cast<int>(values.size()) != n_types) values.assign(n_types, {});

  double stat = 0.0;
  double clamp_flow = 0.0;
  double worst_gap = 0.0;
  double scale = 1.0;
  std::vector<double> pushed;
  for (int tau = 0; tau < n_types; ++tau) {
    kernels::build_type_tables(sc, tau, pi, ctx, ev.tables[tau], parallel);
    kernels::value_sweeps(ev.tables[tau], sc.discount, value_tol, 10000000, values[tau], parallel);
    kernels::q_and_best_response(sc, tau, values[tau], ctx, argmax_rel_tol, &ev.q[tau],
                                 &ev.br[tau], parallel);

    kernels::pushforward(ev.tables[tau], d.d[tau], pushed, parallel);
    const TypeShape sh = shape_for(sc, tau);
    for (int x = 0; x < sh.n_states(); ++x) {
      stat += std::abs(d.d[tau][x] - pushed[x]);
      clamp_flow += d.d[tau][x] * ev.tables[tau].clamp_by_state[x];
      if (d.d[tau][x] <= mass_floor) continue;
      const int k = x % sh.n_k;
      const double* q_row = ev.q[tau].data() + static_cast<std::size_t>(x) * sh.n_actions();
      const double* pi_row = pi.pi[tau].data() + static_cast<std::size_t>(x) * sh.n_actions();
      double q_max = -std::numeric_limits<double>::infinity();
      double q_avg = 0.0;
      for (int t = 0; t < sh.n_t; ++t)
        for (int b = 0; b <= k; ++b) {
          const int a = sh.aidx(t, b);
          q_max = std::max(q_max, q_row[a]);
          q_avg += pi_row[a] * q_row[a];
        }
      worst_gap = std::max(worst_gap, q_max - q_avg);
      scale = std::max(scale, std::abs(values[tau][x]));
    }
  }
  ev.stationarity = stat;
  ev.gap = worst_gap / scale;
  ev.clamp_flow = clamp_flow;
}

}  // namespace

void SolverConfig::validate() const {
  if (!(damping_policy > 0.0 && damping_policy <= 1.0))
    throw std::invalid_argument("SolverConfig: damping_policy must lie in (0, 1]");
  if (!(damping_dist > 0.0 && damping_dist <= 1.0))
    throw std::invalid_argument("SolverConfig: damping_dist must lie in (0, 1]");
  if (max_iters <= 0) throw std::invalid_argument("SolverConfig: max_iters must be > 0");
  if (tol_stationarity <= 0.0)
    throw std::invalid_argument("SolverConfig: tol_stationarity must be > 0");
  if (tol_optimality <= 0.0)
    throw std::invalid_argument("SolverConfig: tol_optimality must be > 0");
  if (epsilon <= 0.0) throw std::invalid_argument("SolverConfig: epsilon must be > 0");
  if (value_tol <= 0.0) throw std::invalid_argument("SolverConfig: value_tol must be > 0");
  if (threads < 0) throw std::invalid_argument("SolverConfig: threads must be >= 0");
}

Residuals residuals(const Scenario& sc, const TypeStateDistribution& d, const Policy& pi,
                    const SocialContext& ctx, double value_tol, double mass_floor) {
  Evaluation ev;
  std::vector<std::vector<double>> values;
  evaluate_social_state(sc, d, pi, ctx, value_tol, 1e-9, mass_floor, false, values, ev);
  return {ev.stationarity, ev.gap};
}

SneSolution solve_sne(const Scenario& sc, const SolverConfig& config) {
  sc.validate();
  config.validate();
#ifdef _OPENMP
  if (config.threads > 1) omp_set_num_threads(config.threads);
#endif
  const bool parallel = config.threads != 1;
  const int n_types = sc.n_types();
  constexpr double kMassFloor = 1e-8;

  TypeStateDistribution d;
  Policy pi;
  init_social_state(sc, d, pi);

  SneSolution sol;
  auto& diag = sol.diagnostics;
  diag.trace.reserve(config.max_iters);

  std::vector<std::vector<double>> values;
  Evaluation ev;
  double eta_pi = config.damping_policy;
  const double eta_d = config.damping_dist;
  const double eta_pi_floor = config.damping_policy / 4096.0;
  double prev_stat = 1.0;

  TypeStateDistribution best_d = d;
  Policy best_pi = pi;
  double best_metric = std::numeric_limits<double>::infinity();
  StateAverager averager;
  averager.reset(sc);
  double window_sum = 0.0;
  int window_n = 0;
  double prev_window_mean = std::numeric_limits<double>::infinity();
  constexpr int kWindow = 500;

  std::vector<double> pushed;
  bool converged = false;
  int iter = 0;
  for (; iter < config.max_iters; ++iter) {
    const double eps = epsilon_at(config, iter);
    const SocialContext ctx = build_social_context(sc, d, pi, eps, parallel);
    // The value solve must be accurate enough that best-response tie sets do
    // not flicker from iteration noise.
    const double value_tol = std::max(config.value_tol, std::min(1e-3, 1e-4 * prev_stat));
    evaluate_social_state(sc, d, pi, ctx, value_tol, config.argmax_rel_tol, kMassFloor, parallel,
                          values, ev);

    diag.trace.push_back({iter, ev.stationarity, ev.gap, d.mean_karma(sc),
                          ctx.alloc.avg_payment, eps, eta_pi, eta_d, ev.clamp_flow});
    if (config.progress_every > 0 && iter % config.progress_every == 0)
      std::fprintf(stderr, "[solve] iter=%d eps=%.1e stat=%.3e gap=%.3e p_bar=%.4f\n", iter, eps,
                   ev.stationarity, ev.gap, ctx.alloc.avg_payment);

    const bool annealed = eps == config.epsilon;
    const double metric =
        std::max(ev.stationarity / config.tol_stationarity, ev.gap / config.tol_optimality);
    if (annealed && metric < 0.9 * best_metric) {
      best_metric = metric;
      best_d = d;
      best_pi = pi;
    }
    if (annealed && ev.stationarity <= config.tol_stationarity &&
        ev.gap <= config.tol_optimality) {
      converged = true;
      break;
    }

    // Residuals must keep falling on average. A stalled window signals a
    // policy-side limit cycle: slow the policy steps, and try two candidate
    // jumps -- the trailing window average (the cycle center) and the
    // stationary distribution of the current policy chain -- adopting
    // whichever evaluates best.
    if (annealed) {
      averager.add(d, pi);
      window_sum += metric;
      ++window_n;
      if (window_n == kWindow) {
        const double window_mean = window_sum / kWindow;
        const bool stalled = window_mean >= 0.9 * prev_window_mean;
        prev_window_mean = window_mean;
        window_sum = 0.0;
        window_n = 0;
        if (stalled) {
          eta_pi = std::max(eta_pi_floor, eta_pi * 0.5);

          TypeStateDistribution d_avg;
          Policy pi_avg;
          averager.mean(d_avg, pi_avg);
          averager.reset(sc);

          // Candidate 2: relax the distribution to the fixed policy's
          // stationary state with full steps, rebuilding the context each
          // step so redistribution stays self-consistent and the mean karma
          // is preserved exactly.
          TypeStateDistribution d_stat = d;
          std::vector<double> next;
          for (int sweep = 0; sweep < 400; ++sweep) {
            const SocialContext ctx_s =
                build_social_context(sc, d_stat, pi, config.epsilon, parallel);
            double diff = 0.0;
            for (int tau = 0; tau < n_types; ++tau) {
              kernels::TypeTables tb;
              kernels::build_type_tables(sc, tau, pi, ctx_s, tb, parallel);
              kernels::pushforward(tb, d_stat.d[tau], next, parallel);
              auto& x = d_stat.d[tau];
              for (std::size_t i = 0; i < x.size(); ++i) diff += std::abs(next[i] - x[i]);
              x.swap(next);
              const double g = sc.types[tau].share;
              double sum = 0.0;
              for (double v : x) sum += v;
              if (sum > 0.0)
                for (double& v : x) v *= g / sum;
            }
            if (diff <= 1e-13) break;
          }

          double best_cand = metric;
          int pick = -1;
          Evaluation ev_cand;
          std::vector<std::vector<double>> v_keep;
          for (int c = 0; c < 2; ++c) {
            const TypeStateDistribution& dc = c == 0 ? d_avg : d_stat;
            const Policy& pc = c == 0 ? pi_avg : pi;
            const SocialContext ctx_c = build_social_context(sc, dc, pc, config.epsilon, parallel);
            Evaluation ev_c;
            std::vector<std::vector<double>> v_c = values;
            evaluate_social_state(sc, dc, pc, ctx_c, value_tol, config.argmax_rel_tol, kMassFloor,
                                  parallel, v_c, ev_c);
            const double m = std::max(ev_c.stationarity / config.tol_stationarity,
                                      ev_c.gap / config.tol_optimality);
            if (m < best_cand) {
              best_cand = m;
              pick = c;
              ev_cand = std::move(ev_c);
              v_keep = std::move(v_c);
            }
          }
          if (pick >= 0) {
            d = pick == 0 ? std::move(d_avg) : std::move(d_stat);
            if (pick == 0) pi = std::move(pi_avg);
            values = std::move(v_keep);
            prev_stat = ev_cand.stationarity;
            continue;
          }
        } else {
          averager.reset(sc);
          eta_pi = std::min(config.damping_policy, eta_pi * 1.25);
        }
      }
    }

    // Policy step toward the best response.
    for (int tau = 0; tau < n_types; ++tau) {
      double* p = pi.pi[tau].data();
      const double* b = ev.br[tau].data();
      const std::size_t n = pi.pi[tau].size();
      for (std::size_t i = 0; i < n; ++i) p[i] = (1.0 - eta_pi) * p[i] + eta_pi * b[i];
    }

    // Distribution step: damped pushforward under the updated policy. The
    // context is rebuilt from (d, pi_new) so the redistributed amount matches
    // the payments actually collected; karma is then preserved exactly up to
    // the k_max clamp.
    const SocialContext ctx_push = build_social_context(sc, d, pi, eps, parallel);
    double mass_drift = 0.0;
    for (int tau = 0; tau < n_types; ++tau) {
      kernels::TypeTables tables;
      kernels::build_type_tables(sc, tau, pi, ctx_push, tables, parallel);
      kernels::pushforward(tables, d.d[tau], pushed, parallel);
      auto& dd = d.d[tau];
      for (std::size_t x = 0; x < dd.size(); ++x)
        dd[x] = (1.0 - eta_d) * dd[x] + eta_d * pushed[x];
      const double g = sc.types[tau].share;
      double sum = 0.0;
      for (double v : dd) sum += v;
      mass_drift += std::abs(sum - g);
      if (sum > 0.0) {
        const double rescale = g / sum;
        for (double& v : dd) v *= rescale;
      }
    }
    diag.max_renorm_drift = std::max(diag.max_renorm_drift, mass_drift);
    prev_stat = ev.stationarity;
  }

  if (!converged && best_metric < std::numeric_limits<double>::infinity()) {
    d = best_d;
    pi = best_pi;
  }

  // Final verification pass at the configured epsilon and full value accuracy.
  sol.context = build_social_context(sc, d, pi, config.epsilon, parallel);
  evaluate_social_state(sc, d, pi, sol.context, config.value_tol, config.argmax_rel_tol,
                        kMassFloor, parallel, values, ev);
  sol.d_star = std::move(d);
  sol.pi_star = std::move(pi);
  sol.values.v = std::move(values);
  sol.values.q = std::move(ev.q);
  sol.b_star_profile = sol.context.alloc.b_star;

  diag.iterations = iter;
  diag.stationarity_res = ev.stationarity;
  diag.optimality_gap = ev.gap;
  diag.converged = ev.stationarity <= config.tol_stationarity && ev.gap <= config.tol_optimality;
  diag.mean_karma = sol.d_star.mean_karma(sc);
  diag.karma_drift = std::abs(diag.mean_karma - sc.grid.k_bar);
  double kmax_mass = 0.0;
  for (int tau = 0; tau < n_types; ++tau) {
    const TypeShape sh = shape_for(sc, tau);
    for (int u = 0; u < sh.n_u; ++u) kmax_mass += sol.d_star.d[tau][sh.sidx(u, sc.grid.k_max)];
  }
  diag.clamp_mass_kmax = kmax_mass;
  diag.kmax_warning = kmax_mass > 1e-6;
  return sol;
}

}  // namespace carma
