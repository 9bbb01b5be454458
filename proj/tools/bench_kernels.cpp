// Times the equilibrium kernels against their naive reference implementations
// and compares serial with OpenMP execution on a mid-size instance.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "carma/kernels.hpp"
#include "carma/reference.hpp"
#include "carma/solver.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace carma;

namespace {

using clock_type = std::chrono::steady_clock;

double time_ms(int reps, const std::function<void()>& fn) {
  fn();  // warm-up
  const auto start = clock_type::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto stop = clock_type::now();
  return std::chrono::duration<double, std::milli>(stop - start).count() / reps;
}

void report(const char* name, double serial_ms, double parallel_ms, double naive_ms) {
  std::printf("%-22s %10.3f %30.3f %10.2fx", name, serial_ms, parallel_ms,
              serial_ms / parallel_ms);
  if (naive_ms > 0.0)
    std::printf("   (naive reference: %.3f ms)", naive_ms);
  std::printf("\n");
}

Scenario bench_scenario() {
  Scenario sc;
  CommuterType ty;
  ty.name = "all";
  ty.share = 1.0;
  ty.urgency.levels = {1.0, 6.0};
  ty.urgency.transition = {0.8, 0.2, 0.8, 0.2};
  sc.types = {ty};
  sc.grid.k_max = 60;  // heavier than the default grid
  sc.grid.k_bar = 10.0;
  return sc;
}

}  // namespace

int main(int argc, char** argv) {
  const int reps = argc > 1 ? std::atoi(argv[1]) : 20;
  const Scenario sc = bench_scenario();
  TypeStateDistribution d;
  Policy pi;
  init_social_state(sc, d, pi);
  const SocialContext ctx = build_social_context(sc, d, pi, 1e-4, false);

#ifdef _OPENMP
  std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
  std::printf("openmp: not enabled\n");
#endif
  std::printf("states: %d, actions: %d, reps: %d\n\n", shape_for(sc, 0).n_states(),
              shape_for(sc, 0).n_actions(), reps);
  std::printf("%-22s %10s %30s %10s\n", "kernel", "serial ms", "parallel ms", "speedup");

  {
    ActionMass nu;
    const double s = time_ms(reps, [&] { kernels::accumulate_action_mass(sc, d, pi, nu, false); });
    const double p = time_ms(reps, [&] { kernels::accumulate_action_mass(sc, d, pi, nu, true); });
    const double n = time_ms(reps, [&] { reference::action_mass_naive(sc, d, pi); });
    report("action_mass", s, p, n);
  }
  kernels::TypeTables tables;
  {
    const double s = time_ms(reps, [&] { kernels::build_type_tables(sc, 0, pi, ctx, tables, false); });
    const double p = time_ms(reps, [&] { kernels::build_type_tables(sc, 0, pi, ctx, tables, true); });
    report("type_tables", s, p, 0.0);
  }
  {
    std::vector<double> v;
    const double s = time_ms(reps, [&] {
      v.assign(tables.n_states, 0.0);
      kernels::value_sweeps(tables, 0.99, 1e-6, 100000, v, false);
    });
    const double p = time_ms(reps, [&] {
      v.assign(tables.n_states, 0.0);
      kernels::value_sweeps(tables, 0.99, 1e-6, 100000, v, true);
    });
    report("value_sweeps", s, p, 0.0);
  }
  {
    std::vector<double> v(tables.n_states, 0.0);
    kernels::value_sweeps(tables, 0.99, 1e-8, 100000, v, true);
    std::vector<double> q, br;
    const double s = time_ms(
        reps, [&] { kernels::q_and_best_response(sc, 0, v, ctx, 1e-9, &q, &br, false); });
    const double p = time_ms(
        reps, [&] { kernels::q_and_best_response(sc, 0, v, ctx, 1e-9, &q, &br, true); });
    report("q_best_response", s, p, 0.0);
  }
  {
    std::vector<double> out;
    const double s = time_ms(reps, [&] { kernels::pushforward(tables, d.d[0], out, false); });
    const double p = time_ms(reps, [&] { kernels::pushforward(tables, d.d[0], out, true); });
    const double n = time_ms(reps, [&] { reference::pushforward_naive(sc, 0, d.d[0], pi, ctx); });
    report("pushforward", s, p, n);
  }
  {
    const double s =
        time_ms(reps, [&] { build_social_context(sc, d, pi, 1e-4, false); });
    const double p =
        time_ms(reps, [&] { build_social_context(sc, d, pi, 1e-4, true); });
    report("social_context", s, p, 0.0);
  }
  return 0;
}
