#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include "carma/game.hpp"

namespace carma {

struct McConfig {
  int n_agents = 9000;
  long long days = 10000;
  long long burn_in = 1000;
  std::uint64_t seed = 1;
  int track_agents = 256;  // discounted-return tracking subsample, 0 = off

  void validate() const;
};

// Finite population executing a fixed policy day by day. Karma is unbounded
// above; policy lookups clamp the karma index at k_max.
struct AgentPopulation {
  struct Agent {
    int type = 0;
    int u = 0;
    long long karma = 0;
  };
  std::vector<Agent> agents;
  long long day = 0;

  long long total_karma() const;
};

// Realized outcome of each agent on one day.
struct AgentDayOutcome {
  std::vector<int> interval;
  std::vector<int> bid;
  std::vector<std::uint8_t> fast;
  std::vector<double> queue_delay;  // min
  std::vector<double> cost;         // cost units
};

struct DayRecord {
  QueueProfile queue;
  std::vector<int> departures;  // per interval
  std::vector<int> admitted;    // per interval, fast-lane entries
  long long total_payment = 0;
  double mean_queue_delay = 0.0;  // min per agent
  double mean_cost = 0.0;         // cost units per agent
};

struct SimulationResult {
  long long days_total = 0;
  long long days_measured = 0;
  double mean_queue_delay = 0.0;  // min per agent-day
  std::vector<double> per_type_queue_delay;
  std::vector<double> per_type_cost;
  // Decision-time occupancy over (type, karma clamped to k_max); sums to 1.
  std::vector<std::vector<double>> karma_hist;
  // Full decision-time occupancy over (type, urgency, karma); sums to 1.
  std::vector<std::vector<double>> state_hist;
  std::vector<double> queue_delay_by_interval;  // time-averaged, min
  // Discounted-return estimates per visited state, for value validation.
  std::vector<std::vector<double>> return_mean;  // NaN when unvisited
  std::vector<std::vector<long long>> return_count;
  std::vector<std::vector<double>> return_var;
  bool karma_conserved = true;
};

// Deterministic initial population matching d by largest-remainder quotas.
AgentPopulation init_population(const Scenario& sc, const TypeStateDistribution& d, int n_agents);

// Day-by-day executor; holds the per-state action samplers.
class DaySimulator {
 public:
  DaySimulator(const Scenario& sc, const Policy& pi);
  ~DaySimulator();

  // Samples actions, admits the highest bidders per interval (ties resolved
  // by uniform draws on the remaining capacity), collects payments,
  // redistributes the day's total exactly, computes the queue and advances
  // urgencies. `out`, when given, receives per-agent outcomes.
  DayRecord run_day(AgentPopulation& pop, std::mt19937_64& rng, AgentDayOutcome* out = nullptr);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Convenience single-day wrapper.
DayRecord simulate_day(AgentPopulation& pop, const Scenario& sc, const Policy& pi,
                       std::mt19937_64& rng);

// Runs `days` days after `burn_in`, reporting time-averaged metrics, the
// empirical state histogram and per-state discounted-return estimates.
SimulationResult simulate(const Scenario& sc, const Policy& pi, const TypeStateDistribution& d0,
                          const McConfig& cfg);

}  // namespace carma
