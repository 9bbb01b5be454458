#include "carma/reference.hpp"

#include <cmath>

namespace carma::reference {

ActionMass action_mass_naive(const Scenario& sc, const TypeStateDistribution& d,
                             const Policy& pi) {
  ActionMass nu(sc.bn.n_intervals, sc.grid.n_karma());
  for (int tau = 0; tau < sc.n_types(); ++tau) {
    const TypeShape sh = shape_for(sc, tau);
    for (int u = 0; u < sh.n_u; ++u)
      for (int k = 0; k < sh.n_k; ++k) {
        const double mass = d.d[tau][sh.sidx(u, k)];
        const double* row = pi.row(sh, tau, u, k);
        for (int t = 0; t < sh.n_t; ++t)
          for (int b = 0; b < sh.n_b; ++b) nu.at(t, b) += mass * row[sh.aidx(t, b)];
      }
  }
  return nu;
}

std::vector<double> pushforward_naive(const Scenario& sc, int tau,
                                      const std::vector<double>& d_tau, const Policy& pi,
                                      const SocialContext& ctx) {
  const TypeShape sh = shape_for(sc, tau);
  std::vector<double> out(sh.n_states(), 0.0);
  for (int u = 0; u < sh.n_u; ++u)
    for (int k = 0; k < sh.n_k; ++k) {
      const double mass = d_tau[sh.sidx(u, k)];
      if (mass == 0.0) continue;
      const std::vector<double> row = policy_transition(sc, tau, u, k, pi, ctx);
      for (int x = 0; x < sh.n_states(); ++x) out[x] += mass * row[x];
    }
  return out;
}

double mean_karma_after_step(const Scenario& sc, const TypeStateDistribution& d, const Policy& pi,
                             const SocialContext& ctx) {
  double mean = 0.0;
  for (int tau = 0; tau < sc.n_types(); ++tau) {
    const TypeShape sh = shape_for(sc, tau);
    for (int u = 0; u < sh.n_u; ++u)
      for (int k = 0; k < sh.n_k; ++k) {
        const double mass = d.d[tau][sh.sidx(u, k)];
        if (mass == 0.0) continue;
        const double* row = pi.row(sh, tau, u, k);
        for (int t = 0; t < sh.n_t; ++t)
          for (int b = 0; b <= k; ++b) {
            const double w = row[sh.aidx(t, b)];
            if (w == 0.0) continue;
            const KarmaTransition tr = karma_transition(
                k, b, ctx.psi(t, b), ctx.redistribution, ctx.redistribution_frac_ceil, sc.grid);
            for (int s = 0; s < tr.n; ++s) mean += mass * w * tr.prob[s] * tr.k_next[s];
          }
      }
  }
  return mean;
}

std::vector<double> stationary_by_squaring(const Scenario& sc, int tau, const Policy& pi,
                                           const SocialContext& ctx, double mass, int doublings) {
  const TypeShape sh = shape_for(sc, tau);
  const int n = sh.n_states();
  std::vector<double> p(static_cast<std::size_t>(n) * n, 0.0);
  for (int u = 0; u < sh.n_u; ++u)
    for (int k = 0; k < sh.n_k; ++k) {
      const std::vector<double> row = policy_transition(sc, tau, u, k, pi, ctx);
      // Half step toward the identity removes periodicity without moving the
      // stationary distribution.
      for (int x = 0; x < n; ++x)
        p[static_cast<std::size_t>(sh.sidx(u, k)) * n + x] = 0.5 * row[x];
      p[static_cast<std::size_t>(sh.sidx(u, k)) * n + sh.sidx(u, k)] += 0.5;
    }
  std::vector<double> q(p.size(), 0.0);
  for (int step = 0; step < doublings; ++step) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int l = 0; l < n; ++l)
          acc += p[static_cast<std::size_t>(i) * n + l] * p[static_cast<std::size_t>(l) * n + j];
        q[static_cast<std::size_t>(i) * n + j] = acc;
      }
    p.swap(q);
  }
  std::vector<double> out(n, 0.0);
  // Average the rows over the initial uniform distribution.
  for (int j = 0; j < n; ++j) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += p[static_cast<std::size_t>(i) * n + j];
    out[j] = acc / n;
  }
  double sum = 0.0;
  for (double v : out) sum += v;
  if (sum > 0.0)
    for (double& v : out) v *= mass / sum;
  return out;
}

double stationarity_residual_naive(const Scenario& sc, const TypeStateDistribution& d,
                                   const Policy& pi, const SocialContext& ctx) {
  double res = 0.0;
  for (int tau = 0; tau < sc.n_types(); ++tau) {
    const std::vector<double> pushed = pushforward_naive(sc, tau, d.d[tau], pi, ctx);
    for (std::size_t x = 0; x < pushed.size(); ++x)
      res += std::abs(d.d[tau][x] - pushed[x]);
  }
  return res;
}

}  // namespace carma::reference
