#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "carma/kernels.hpp"
#include "carma/mdp.hpp"
#include "carma/reference.hpp"
#include "test_util.hpp"

using namespace carma;

namespace {

SocialContext context_for(const Scenario& sc, const TypeStateDistribution& d, const Policy& pi,
                          double eps = 1e-4) {
  return build_social_context(sc, d, pi, eps, false);
}

}  // namespace

TEST_CASE("immediate reward reduces to the lane costs") {
  const Scenario sc = testutil::case1_scenario();
  TypeStateDistribution d;
  Policy pi;
  init_social_state(sc, d, pi);
  const SocialContext ctx = context_for(sc, d, pi);

  // Interval 8 starts at t_star = 120; a guaranteed fast entrant pays no cost.
  SUBCASE("fast lane, on time") {
    SocialContext sure = ctx;
    std::fill(sure.alloc.psi.begin(), sure.alloc.psi.end(), 1.0);
    for (int t = 0; t < sc.bn.n_intervals; ++t)
      for (int b = 0; b < sure.nu.n_b; ++b)
        sure.base_cost[static_cast<std::size_t>(t) * sure.nu.n_b + b] =
            fast_lane_cost(1.0, sc.bn.interval_start(t), sc.bn);
    CHECK(immediate_reward(6.0, 8, 0, sure, sc.bn) == doctest::Approx(0.0));
    CHECK(immediate_reward(1.0, 7, 0, sure, sc.bn) ==
          doctest::Approx(-fast_lane_cost(1.0, 105.0, sc.bn)));
  }
  SUBCASE("slow lane with a queue") {
    SocialContext slow = ctx;
    std::fill(slow.alloc.psi.begin(), slow.alloc.psi.end(), 0.0);
    slow.queue.queue_len.assign(sc.bn.n_intervals, 480.0);
    slow.queue.delay.assign(sc.bn.n_intervals, 10.0);
    // t = 110 is off the 15-minute grid; use interval 7 (t = 105) to check
    // against the closed form directly.
    const double expect = -slow_lane_cost(1.0, 105.0, 480.0, sc.bn);
    CHECK(immediate_reward(1.0, 7, 0, slow, sc.bn) == doctest::Approx(expect).epsilon(1e-14));
  }
  SUBCASE("mixed outcome averages the two lanes") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
      const double psi = testutil::u01(rng);
      SocialContext mixed = ctx;
      std::fill(mixed.alloc.psi.begin(), mixed.alloc.psi.end(), psi);
      for (int t = 0; t < sc.bn.n_intervals; ++t) {
        const double cf = fast_lane_cost(1.0, sc.bn.interval_start(t), sc.bn);
        const double cs =
            slow_lane_cost(1.0, sc.bn.interval_start(t), mixed.queue.queue_len[t], sc.bn);
        for (int b = 0; b < mixed.nu.n_b; ++b)
          mixed.base_cost[static_cast<std::size_t>(t) * mixed.nu.n_b + b] =
              psi * cf + (1.0 - psi) * cs;
      }
      SocialContext pure_fast = mixed, pure_slow = mixed;
      std::fill(pure_fast.alloc.psi.begin(), pure_fast.alloc.psi.end(), 1.0);
      std::fill(pure_slow.alloc.psi.begin(), pure_slow.alloc.psi.end(), 0.0);
      for (int t = 0; t < sc.bn.n_intervals; ++t)
        for (int b = 0; b < mixed.nu.n_b; ++b) {
          const std::size_t i = static_cast<std::size_t>(t) * mixed.nu.n_b + b;
          pure_fast.base_cost[i] = fast_lane_cost(1.0, sc.bn.interval_start(t), sc.bn);
          pure_slow.base_cost[i] =
              slow_lane_cost(1.0, sc.bn.interval_start(t), mixed.queue.queue_len[t], sc.bn);
        }
      const double blended = psi * immediate_reward(2.0, 5, 1, pure_fast, sc.bn) +
                             (1.0 - psi) * immediate_reward(2.0, 5, 1, pure_slow, sc.bn);
      CHECK(immediate_reward(2.0, 5, 1, mixed, sc.bn) ==
            doctest::Approx(blended).epsilon(1e-12));
    }
  }
}

TEST_CASE("state transition kernel is the urgency/karma product") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const Scenario sc = testutil::random_small_scenario(rng);
    TypeStateDistribution d;
    Policy pi;
    testutil::random_social_state(sc, rng, d, pi);
    const SocialContext ctx = context_for(sc, d, pi);
    const int tau = static_cast<int>(rng() % sc.n_types());
    const TypeShape sh = shape_for(sc, tau);
    const int u = static_cast<int>(rng() % sh.n_u);
    const int k = static_cast<int>(rng() % sh.n_k);
    const int t = static_cast<int>(rng() % sh.n_t);
    const int b = static_cast<int>(rng() % (k + 1));

    const StateTransition st = state_transition_kernel(sc, tau, u, k, t, b, ctx);
    double total = 0.0;
    for (double p : st.prob) total += p;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-14));

    // Brute-force outer product over a dense (u+, k+) table.
    std::vector<double> dense(sh.n_states(), 0.0);
    const KarmaTransition kt =
        karma_transition(k, b, ctx.psi(t, b), ctx.redistribution, ctx.redistribution_frac_ceil, sc.grid);
    for (int un = 0; un < sh.n_u; ++un)
      for (int s = 0; s < kt.n; ++s)
        dense[sh.sidx(un, kt.k_next[s])] += sc.types[tau].urgency.at(u, un) * kt.prob[s];
    std::vector<double> got(sh.n_states(), 0.0);
    for (std::size_t i = 0; i < st.prob.size(); ++i)
      got[sh.sidx(st.u_next[i], st.k_next[i])] += st.prob[i];
    for (int x = 0; x < sh.n_states(); ++x) CHECK(got[x] == dense[x]);
  }
}

TEST_CASE("iid urgency rows make the next urgency independent of the current one") {
  std::mt19937_64 rng(19);
  const Scenario sc = testutil::case1_scenario();
  TypeStateDistribution d;
  Policy pi;
  init_social_state(sc, d, pi);
  const SocialContext ctx = context_for(sc, d, pi);
  const StateTransition a = state_transition_kernel(sc, 0, 0, 5, 2, 1, ctx);
  const StateTransition b = state_transition_kernel(sc, 0, 1, 5, 2, 1, ctx);
  std::vector<double> ma(2, 0.0), mb(2, 0.0);
  for (std::size_t i = 0; i < a.prob.size(); ++i) ma[a.u_next[i]] += a.prob[i];
  for (std::size_t i = 0; i < b.prob.size(); ++i) mb[b.u_next[i]] += b.prob[i];
  CHECK(ma[0] == doctest::Approx(mb[0]).epsilon(1e-14));
  CHECK(ma[1] == doctest::Approx(mb[1]).epsilon(1e-14));
  (void)rng;
}

TEST_CASE("policy reward and transition match brute-force sums") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 60; ++trial) {
    const Scenario sc = testutil::random_small_scenario(rng);
    TypeStateDistribution d;
    Policy pi;
    testutil::random_social_state(sc, rng, d, pi);
    const SocialContext ctx = context_for(sc, d, pi);
    const int tau = static_cast<int>(rng() % sc.n_types());
    const TypeShape sh = shape_for(sc, tau);
    const int u = static_cast<int>(rng() % sh.n_u);
    const int k = static_cast<int>(rng() % sh.n_k);

    double rr = 0.0;
    std::vector<double> pp(sh.n_states(), 0.0);
    const double* row = pi.row(sh, tau, u, k);
    for (int t = 0; t < sh.n_t; ++t)
      for (int b = 0; b <= k; ++b) {
        const double w = row[sh.aidx(t, b)];
        if (w == 0.0) continue;
        rr += w * immediate_reward(sc.types[tau].urgency.levels[u], t, b, ctx, sc.bn);
        const StateTransition st = state_transition_kernel(sc, tau, u, k, t, b, ctx);
        for (std::size_t i = 0; i < st.prob.size(); ++i)
          pp[sh.sidx(st.u_next[i], st.k_next[i])] += w * st.prob[i];
      }
    CHECK(policy_reward(sc, tau, u, k, pi, ctx) == doctest::Approx(rr).epsilon(1e-13));
    const std::vector<double> got = policy_transition(sc, tau, u, k, pi, ctx);
    double total = 0.0;
    for (int x = 0; x < sh.n_states(); ++x) {
      CHECK(got[x] == doctest::Approx(pp[x]).epsilon(1e-12));
      total += got[x];
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("value evaluation") {
  std::mt19937_64 rng(29);
  SUBCASE("zero discount returns the immediate reward") {
    const Scenario sc = testutil::random_small_scenario(rng);
    TypeStateDistribution d;
    Policy pi;
    testutil::random_social_state(sc, rng, d, pi);
    const SocialContext ctx = context_for(sc, d, pi);
    const std::vector<double> v = evaluate_value(sc, 0, pi, ctx, 0.0, 1e-12);
    const TypeShape sh = shape_for(sc, 0);
    for (int u = 0; u < sh.n_u; ++u)
      for (int k = 0; k < sh.n_k; ++k)
        CHECK(v[sh.sidx(u, k)] ==
              doctest::Approx(policy_reward(sc, 0, u, k, pi, ctx)).epsilon(1e-12));
  }
  SUBCASE("value matches a direct linear solve") {
    for (int trial = 0; trial < 25; ++trial) {
      const Scenario sc = testutil::random_small_scenario(rng, 5);  // <= 50 states
      TypeStateDistribution d;
      Policy pi;
      testutil::random_social_state(sc, rng, d, pi);
      const SocialContext ctx = context_for(sc, d, pi);
      const double delta = 0.9;
      const int tau = static_cast<int>(rng() % sc.n_types());
      const TypeShape sh = shape_for(sc, tau);
      const int n = sh.n_states();
      REQUIRE(n <= 50);

      const std::vector<double> v = evaluate_value(sc, tau, pi, ctx, delta, 1e-12);

      Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
      Eigen::VectorXd r(n);
      for (int u = 0; u < sh.n_u; ++u)
        for (int k = 0; k < sh.n_k; ++k) {
          const int x = sh.sidx(u, k);
          r(x) = policy_reward(sc, tau, u, k, pi, ctx);
          const std::vector<double> row = policy_transition(sc, tau, u, k, pi, ctx);
          for (int y = 0; y < n; ++y) a(x, y) -= delta * row[y];
        }
      const Eigen::VectorXd direct = a.partialPivLu().solve(r);
      for (int x = 0; x < n; ++x) CHECK(std::abs(v[x] - direct(x)) < 1e-10);

      // Bellman residual of the returned value, checked against the public
      // per-state operations rather than the solve path.
      for (int u = 0; u < sh.n_u; ++u)
        for (int k = 0; k < sh.n_k; ++k) {
          const int x = sh.sidx(u, k);
          const std::vector<double> row = policy_transition(sc, tau, u, k, pi, ctx);
          double rhs = r(x);
          for (int y = 0; y < n; ++y) rhs += delta * row[y] * v[y];
          CHECK(std::abs(rhs - v[x]) < 1e-11);
        }
    }
  }
  SUBCASE("absorbing state earns the geometric series") {
    // One state (single urgency level, k_max = 0), one action.
    Scenario sc;
    sc.bn.n_commuters = 100;
    sc.bn.s_fast = 2.0;
    sc.bn.s_slow = 8.0;
    sc.bn.n_intervals = 2;
    sc.bn.t_star = 10.0;
    sc.grid = {0, 0.0};
    CommuterType ty;
    ty.name = "only";
    ty.share = 1.0;
    ty.urgency.levels = {1.0};
    ty.urgency.transition = {1.0};
    sc.types = {ty};
    TypeStateDistribution d;
    Policy pi;
    init_social_state(sc, d, pi);
    // Point policy on (t=0, b=0).
    const TypeShape sh = shape_for(sc, 0);
    std::fill(pi.pi[0].begin(), pi.pi[0].end(), 0.0);
    pi.pi[0][sh.aidx(0, 0)] = 1.0;
    const SocialContext ctx = context_for(sc, d, pi);
    const double reward = policy_reward(sc, 0, 0, 0, pi, ctx);
    const double delta = 0.7;
    const std::vector<double> v = evaluate_value(sc, 0, pi, ctx, delta, 1e-13);
    CHECK(v[0] == doctest::Approx(reward / (1.0 - delta)).epsilon(1e-10));
  }
}

TEST_CASE("q function") {
  std::mt19937_64 rng(31);
  const Scenario sc = testutil::random_small_scenario(rng);
  TypeStateDistribution d;
  Policy pi;
  testutil::random_social_state(sc, rng, d, pi);
  const SocialContext ctx = context_for(sc, d, pi);
  const TypeShape sh = shape_for(sc, 0);
  const std::vector<double> v = evaluate_value(sc, 0, pi, ctx, sc.discount, 1e-10);

  SUBCASE("zero discount reduces to the immediate reward") {
    for (int k = 0; k < sh.n_k; ++k)
      CHECK(q_function(sc, 0, 0, k, 1, std::min(k, 1), v, ctx, 0.0) ==
            doctest::Approx(immediate_reward(sc.types[0].urgency.levels[0], 1, std::min(k, 1),
                                             ctx, sc.bn)));
  }
  SUBCASE("matches brute-force enumeration") {
    for (int trial = 0; trial < 200; ++trial) {
      const int u = static_cast<int>(rng() % sh.n_u);
      const int k = static_cast<int>(rng() % sh.n_k);
      const int t = static_cast<int>(rng() % sh.n_t);
      const int b = static_cast<int>(rng() % (k + 1));
      const StateTransition st = state_transition_kernel(sc, 0, u, k, t, b, ctx);
      double cont = 0.0;
      for (std::size_t i = 0; i < st.prob.size(); ++i)
        cont += st.prob[i] * v[sh.sidx(st.u_next[i], st.k_next[i])];
      const double expect =
          immediate_reward(sc.types[0].urgency.levels[u], t, b, ctx, sc.bn) + sc.discount * cont;
      const double got = q_function(sc, 0, u, k, t, b, v, ctx, sc.discount);
      CHECK(got == doctest::Approx(expect).epsilon(1e-13));
    }
  }
}

TEST_CASE("best response") {
  const Scenario sc = []() {
    Scenario s = testutil::case1_scenario();
    s.bn.n_intervals = 2;
    s.bn.t_star = 20.0;
    s.bn.n_commuters = 1000;
    s.grid = {1, 1.0};
    return s;
  }();
  const TypeShape sh = shape_for(sc, 0);
  REQUIRE(sh.n_actions() == 4);

  SUBCASE("argmax set ties are split uniformly") {
    // Q over the four (t, b) actions at k = 1: [1, 3, 3, 0].
    std::vector<double> q = {1.0, 3.0, 3.0, 0.0};
    const std::vector<double> br = best_response(sc, 0, 0, 1, q);
    CHECK(br[0] == 0.0);
    CHECK(br[1] == doctest::Approx(0.5));
    CHECK(br[2] == doctest::Approx(0.5));
    CHECK(br[3] == 0.0);
  }
  SUBCASE("strict maximum becomes a point mass") {
    std::vector<double> q = {1.0, 3.0, 2.0, 0.0};
    const std::vector<double> br = best_response(sc, 0, 0, 1, q);
    CHECK(br[1] == 1.0);
  }
  SUBCASE("never weights infeasible bids") {
    std::vector<double> q = {0.0, 100.0, 0.0, 200.0};  // b=1 entries are infeasible at k=0
    const std::vector<double> br = best_response(sc, 0, 0, 0, q);
    CHECK(br[sh.aidx(0, 1)] == 0.0);
    CHECK(br[sh.aidx(1, 1)] == 0.0);
    CHECK(br[sh.aidx(0, 0)] + br[sh.aidx(1, 0)] == doctest::Approx(1.0));
  }
  SUBCASE("satisfies the best-response inequality against random mixtures") {
    std::mt19937_64 rng(37);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> q(sh.n_actions());
      for (double& x : q) x = 10.0 * testutil::u01(rng) - 5.0;
      const int k = 1;
      const std::vector<double> br = best_response(sc, 0, 0, k, q);
      double br_value = 0.0;
      for (int a = 0; a < sh.n_actions(); ++a) br_value += br[a] * q[a];
      for (int alt = 0; alt < 1000; ++alt) {
        // Random feasible mixture.
        std::vector<double> sigma(sh.n_actions(), 0.0);
        double sum = 0.0;
        for (int t = 0; t < sh.n_t; ++t)
          for (int b = 0; b <= k; ++b) {
            sigma[sh.aidx(t, b)] = testutil::u01(rng);
            sum += sigma[sh.aidx(t, b)];
          }
        double alt_value = 0.0;
        for (int a = 0; a < sh.n_actions(); ++a) alt_value += sigma[a] / sum * q[a];
        CHECK(br_value >= alt_value - 1e-9);
      }
    }
  }
}

TEST_CASE("stationary distribution") {
  std::mt19937_64 rng(41);
  SUBCASE("identity-like chain is already stationary") {
    // A chain that never moves: single interval, zero capacity share makes
    // everyone slow and bids zero keep karma fixed only if payment is zero.
    const Scenario sc = testutil::random_small_scenario(rng);
    TypeStateDistribution d;
    Policy pi;
    testutil::random_social_state(sc, rng, d, pi);
    SocialContext ctx = context_for(sc, d, pi);
    // Degenerate context: no one enters fast, no payment.
    std::fill(ctx.alloc.psi.begin(), ctx.alloc.psi.end(), 0.0);
    ctx.alloc.avg_payment = 0.0;
    ctx.alloc.frac_ceil = 0.0;
    ctx.redistribution = 0.0;
    ctx.redistribution_frac_ceil = 0.0;
    // Force the iid chain stationary in urgency by construction: use the
    // per-type stationary urgency as the weighting of a distribution that is
    // then preserved exactly.
    const TypeShape sh = shape_for(sc, 0);
    const std::vector<double> urg = sc.types[0].urgency.stationary();
    std::vector<double> target(sh.n_states(), 0.0);
    for (int u = 0; u < sh.n_u; ++u) target[sh.sidx(u, 3)] = urg[u];
    const std::vector<double> pushed = reference::pushforward_naive(sc, 0, target, pi, ctx);
    // Karma is frozen, so only urgency mixes; the stationary urgency profile
    // at fixed karma is preserved.
    for (int x = 0; x < sh.n_states(); ++x) CHECK(pushed[x] == doctest::Approx(target[x]));
  }
  SUBCASE("matches the repeated-squaring oracle") {
    for (int trial = 0; trial < 10; ++trial) {
      const Scenario sc = testutil::random_small_scenario(rng, 4);
      TypeStateDistribution d;
      Policy pi;
      testutil::random_social_state(sc, rng, d, pi);
      const SocialContext ctx = context_for(sc, d, pi);
      const int tau = static_cast<int>(rng() % sc.n_types());
      const double mass = sc.types[tau].share;
      const std::vector<double> power =
          stationary_distribution(sc, tau, pi, ctx, mass, 1e-12, 400000);
      const std::vector<double> oracle =
          reference::stationary_by_squaring(sc, tau, pi, ctx, mass, 48);
      for (std::size_t x = 0; x < power.size(); ++x)
        CHECK(std::abs(power[x] - oracle[x]) < 1e-8);
    }
  }
}
