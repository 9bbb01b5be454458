#include "carma/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace carma {

namespace {

double u01(std::mt19937_64& rng) { return (rng() >> 11) * 0x1.0p-53; }

std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

// Largest-remainder integer quotas for `total` slots proportional to w.
std::vector<int> quotas(const std::vector<double>& w, int total) {
  const double sum = std::accumulate(w.begin(), w.end(), 0.0);
  std::vector<int> out(w.size(), 0);
  if (sum <= 0.0 || total <= 0) return out;
  std::vector<std::pair<double, std::size_t>> rem(w.size());
  int assigned = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double exact = w[i] / sum * total;
    out[i] = static_cast<int>(std::floor(exact));
    assigned += out[i];
    rem[i] = {exact - out[i], i};
  }
  std::stable_sort(rem.begin(), rem.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int i = 0; assigned < total; ++i, ++assigned) ++out[rem[i % rem.size()].second];
  return out;
}

}  // namespace

void McConfig::validate() const {
  if (n_agents <= 0) throw std::invalid_argument("McConfig: n_agents must be > 0");
  if (days < 0 || burn_in < 0) throw std::invalid_argument("McConfig: day counts must be >= 0");
  if (track_agents < 0) throw std::invalid_argument("McConfig: track_agents must be >= 0");
}

long long AgentPopulation::total_karma() const {
  long long s = 0;
  for (const auto& a : agents) s += a.karma;
  return s;
}

AgentPopulation init_population(const Scenario& sc, const TypeStateDistribution& d, int n_agents) {
  AgentPopulation pop;
  std::vector<double> shares(sc.n_types());
  for (int tau = 0; tau < sc.n_types(); ++tau) shares[tau] = d.type_mass(tau);
  const std::vector<int> per_type = quotas(shares, n_agents);
  for (int tau = 0; tau < sc.n_types(); ++tau) {
    const TypeShape sh = shape_for(sc, tau);
    const std::vector<int> per_state = quotas(d.d[tau], per_type[tau]);
    for (int x = 0; x < sh.n_states(); ++x)
      for (int c = 0; c < per_state[x]; ++c)
        pop.agents.push_back({tau, x / sh.n_k, x % sh.n_k});
  }
  return pop;
}

struct DaySimulator::Impl {
  const Scenario& sc;
  const Policy& pi;

  // Compressed per-state samplers: cumulative weights over nonzero actions.
  struct Row {
    std::vector<double> cum;
    std::vector<int> action;
  };
  std::vector<std::vector<Row>> rows;  // per type, per state

  // Reused day buffers.
  std::vector<int> act_t, act_b;
  std::vector<std::uint8_t> fast;
  std::vector<std::vector<int>> bid_count;

  Impl(const Scenario& s, const Policy& p) : sc(s), pi(p) {
    rows.resize(sc.n_types());
    for (int tau = 0; tau < sc.n_types(); ++tau) {
      const TypeShape sh = shape_for(sc, tau);
      rows[tau].resize(sh.n_states());
      for (int x = 0; x < sh.n_states(); ++x) {
        Row& r = rows[tau][x];
        const double* row = pi.pi[tau].data() + static_cast<std::size_t>(x) * sh.n_actions();
        double acc = 0.0;
        for (int a = 0; a < sh.n_actions(); ++a) {
          if (row[a] <= 0.0) continue;
          acc += row[a];
          r.cum.push_back(acc);
          r.action.push_back(a);
        }
        if (r.cum.empty()) {
          r.cum.push_back(1.0);
          r.action.push_back(0);  // (t=0, b=0) fallback for all-zero rows
        }
      }
    }
  }

  int sample_action(int tau, int sidx, std::mt19937_64& rng) const {
    const Row& r = rows[tau][sidx];
    const double x = u01(rng) * r.cum.back();
    const auto it = std::upper_bound(r.cum.begin(), r.cum.end(), x);
    const std::size_t idx =
        std::min(static_cast<std::size_t>(it - r.cum.begin()), r.cum.size() - 1);
    return r.action[idx];
  }
};

DaySimulator::DaySimulator(const Scenario& sc, const Policy& pi)
    : impl_(std::make_unique<Impl>(sc, pi)) {}

DaySimulator::~DaySimulator() = default;

DayRecord DaySimulator::run_day(AgentPopulation& pop, std::mt19937_64& rng, AgentDayOutcome* out) {
  const Scenario& sc = impl_->sc;
  const int n = static_cast<int>(pop.agents.size());
  const int n_t = sc.bn.n_intervals;
  const int n_b = sc.grid.n_karma();
  const int capacity = static_cast<int>(std::llround(sc.bn.s_fast * sc.bn.dt));

  DayRecord rec;
  rec.departures.assign(n_t, 0);
  rec.admitted.assign(n_t, 0);

  auto& act_t = impl_->act_t;
  auto& act_b = impl_->act_b;
  auto& fast = impl_->fast;
  auto& bid_count = impl_->bid_count;
  act_t.assign(n, 0);
  act_b.assign(n, 0);
  fast.assign(n, 0);
  bid_count.assign(n_t, std::vector<int>(n_b, 0));

  for (int i = 0; i < n; ++i) {
    const auto& ag = pop.agents[i];
    const TypeShape sh = shape_for(sc, ag.type);
    const int k_idx = static_cast<int>(std::min<long long>(ag.karma, sc.grid.k_max));
    const int a = impl_->sample_action(ag.type, sh.sidx(ag.u, k_idx), rng);
    act_t[i] = a / n_b;
    act_b[i] = a % n_b;
    ++bid_count[act_t[i]][act_b[i]];
    ++rec.departures[act_t[i]];
  }

  // Threshold bid and leftover tie slots per interval.
  std::vector<int> theta(n_t, 0), tie_slots(n_t, 0), tie_pool(n_t, 0);
  std::vector<std::uint8_t> admit_all(n_t, 0);
  for (int t = 0; t < n_t; ++t) {
    if (rec.departures[t] <= capacity) {
      admit_all[t] = 1;
      continue;
    }
    int tail = 0;
    for (int b = n_b - 1; b >= 0; --b) {
      tail += bid_count[t][b];
      if (tail >= capacity) {
        theta[t] = b;
        tie_slots[t] = capacity - (tail - bid_count[t][b]);
        tie_pool[t] = bid_count[t][b];
        break;
      }
    }
  }

  // Admission and payments; sequential sampling picks tie winners uniformly.
  long long total_payment = 0;
  for (int i = 0; i < n; ++i) {
    const int t = act_t[i];
    const int b = act_b[i];
    bool in = false;
    if (admit_all[t]) {
      in = true;
    } else if (b > theta[t]) {
      in = true;
    } else if (b == theta[t] && tie_pool[t] > 0) {
      if (tie_slots[t] > 0 &&
          static_cast<int>(bounded(rng, static_cast<std::uint64_t>(tie_pool[t]))) < tie_slots[t]) {
        in = true;
        --tie_slots[t];
      }
      --tie_pool[t];
    }
    if (in) {
      fast[i] = 1;
      ++rec.admitted[t];
      pop.agents[i].karma -= b;
      total_payment += b;
    }
  }
  rec.total_payment = total_payment;

  // Uniform redistribution with exact integer conservation.
  const long long base = total_payment / n;
  int extra = static_cast<int>(total_payment % n);
  for (int i = 0; i < n; ++i) {
    pop.agents[i].karma += base;
    if (extra > 0 &&
        static_cast<int>(bounded(rng, static_cast<std::uint64_t>(n - i))) < extra) {
      ++pop.agents[i].karma;
      --extra;
    }
  }

  // Queue, per-agent delays and costs.
  std::vector<double> slow_inflow(n_t, 0.0);
  for (int t = 0; t < n_t; ++t)
    slow_inflow[t] = static_cast<double>(rec.departures[t] - rec.admitted[t]);
  rec.queue = queue_profile(slow_inflow, sc.bn);

  if (out) {
    out->interval.assign(act_t.begin(), act_t.end());
    out->bid.assign(act_b.begin(), act_b.end());
    out->fast.assign(fast.begin(), fast.end());
    out->queue_delay.assign(n, 0.0);
    out->cost.assign(n, 0.0);
  }
  double delay_sum = 0.0, cost_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto& ag = pop.agents[i];
    const double inst = sc.bn.interval_start(act_t[i]);
    const double t_q = fast[i] ? 0.0 : rec.queue.delay[act_t[i]];
    const ScheduleDelay sd = schedule_delays(inst, t_q, sc.bn);
    const double u_val = sc.types[ag.type].urgency.levels[ag.u];
    const double cost =
        u_val * (sc.bn.alpha * t_q + sc.bn.beta * sd.early + sc.bn.gamma * sd.late) / 60.0;
    delay_sum += t_q;
    cost_sum += cost;
    if (out) {
      out->queue_delay[i] = t_q;
      out->cost[i] = cost;
    }
  }
  rec.mean_queue_delay = delay_sum / n;
  rec.mean_cost = cost_sum / n;

  // Exogenous urgency advance.
  for (int i = 0; i < n; ++i) {
    auto& ag = pop.agents[i];
    const auto& urg = sc.types[ag.type].urgency;
    const double r = u01(rng);
    double acc = 0.0;
    int next = urg.n_levels() - 1;
    for (int un = 0; un < urg.n_levels(); ++un) {
      acc += urg.at(ag.u, un);
      if (r < acc) {
        next = un;
        break;
      }
    }
    ag.u = next;
  }
  ++pop.day;
  return rec;
}

DayRecord simulate_day(AgentPopulation& pop, const Scenario& sc, const Policy& pi,
                       std::mt19937_64& rng) {
  DaySimulator sim(sc, pi);
  return sim.run_day(pop, rng);
}

SimulationResult simulate(const Scenario& sc, const Policy& pi, const TypeStateDistribution& d0,
                          const McConfig& cfg) {
  cfg.validate();
  const int n_types = sc.n_types();
  const int n_k = sc.grid.n_karma();
  const int n_t = sc.bn.n_intervals;

  SimulationResult res;
  res.days_total = cfg.days;
  res.per_type_queue_delay.assign(n_types, 0.0);
  res.per_type_cost.assign(n_types, 0.0);
  res.karma_hist.assign(n_types, std::vector<double>(n_k, 0.0));
  res.state_hist.resize(n_types);
  for (int tau = 0; tau < n_types; ++tau)
    res.state_hist[tau].assign(shape_for(sc, tau).n_states(), 0.0);
  res.queue_delay_by_interval.assign(n_t, 0.0);
  res.return_mean.resize(n_types);
  res.return_count.resize(n_types);
  res.return_var.resize(n_types);
  for (int tau = 0; tau < n_types; ++tau) {
    const TypeShape sh = shape_for(sc, tau);
    res.return_mean[tau].assign(sh.n_states(), std::numeric_limits<double>::quiet_NaN());
    res.return_count[tau].assign(sh.n_states(), 0);
    res.return_var[tau].assign(sh.n_states(), 0.0);
  }
  if (cfg.days == 0) return res;

  AgentPopulation pop = init_population(sc, d0, cfg.n_agents);
  std::mt19937_64 rng(cfg.seed);
  DaySimulator sim(sc, pi);
  const int n = static_cast<int>(pop.agents.size());
  const long long total_days = cfg.burn_in + cfg.days;

  std::vector<int> type_count(n_types, 0);
  for (const auto& ag : pop.agents) ++type_count[ag.type];

  // Tracked agents are strided through the population so every type is
  // covered proportionally.
  const int n_track = std::min<int>(cfg.track_agents, n);
  std::vector<int> track_idx(n_track);
  for (int i = 0; i < n_track; ++i)
    track_idx[i] = static_cast<int>(static_cast<long long>(i) * n / std::max(1, n_track));
  std::vector<float> track_reward;
  std::vector<std::int32_t> track_state;  // packed (u << 24) | k, plus type from agent
  if (n_track > 0) {
    track_reward.assign(static_cast<std::size_t>(n_track) * total_days, 0.0f);
    track_state.assign(static_cast<std::size_t>(n_track) * total_days, 0);
  }

  const long long karma0 = pop.total_karma();
  double delay_acc = 0.0;
  std::vector<double> type_delay_acc(n_types, 0.0), type_cost_acc(n_types, 0.0);
  AgentDayOutcome outcome;
  std::vector<std::int32_t> state_before(n_track);

  for (long long day = 0; day < total_days; ++day) {
    const bool measured = day >= cfg.burn_in;
    if (measured)
      for (int i = 0; i < n; ++i) {
        const auto& ag = pop.agents[i];
        const int kc = static_cast<int>(std::min<long long>(ag.karma, sc.grid.k_max));
        res.karma_hist[ag.type][kc] += 1.0;
        res.state_hist[ag.type][shape_for(sc, ag.type).sidx(ag.u, kc)] += 1.0;
      }
    for (int i = 0; i < n_track; ++i) {
      const auto& ag = pop.agents[track_idx[i]];
      const int kc = static_cast<int>(std::min<long long>(ag.karma, sc.grid.k_max));
      state_before[i] = (ag.u << 24) | kc;
    }

    const DayRecord rec = sim.run_day(pop, rng, &outcome);
    if (pop.total_karma() != karma0) res.karma_conserved = false;

    if (measured) {
      res.days_measured += 1;
      delay_acc += rec.mean_queue_delay;
      for (int t = 0; t < n_t; ++t) res.queue_delay_by_interval[t] += rec.queue.delay[t];
      for (int i = 0; i < n; ++i) {
        const int tau = pop.agents[i].type;
        type_delay_acc[tau] += outcome.queue_delay[i];
        type_cost_acc[tau] += outcome.cost[i];
      }
    }
    for (int i = 0; i < n_track; ++i) {
      const std::size_t idx = static_cast<std::size_t>(i) * total_days + day;
      track_state[idx] = state_before[i];
      track_reward[idx] = static_cast<float>(-outcome.cost[track_idx[i]]);
    }
  }

  res.mean_queue_delay = delay_acc / res.days_measured;
  for (int t = 0; t < n_t; ++t) res.queue_delay_by_interval[t] /= res.days_measured;
  for (int tau = 0; tau < n_types; ++tau) {
    const double agent_days = static_cast<double>(type_count[tau]) * res.days_measured;
    if (agent_days > 0.0) {
      res.per_type_queue_delay[tau] = type_delay_acc[tau] / agent_days;
      res.per_type_cost[tau] = type_cost_acc[tau] / agent_days;
    }
    for (double& h : res.karma_hist[tau]) h /= static_cast<double>(n) * res.days_measured;
    for (double& h : res.state_hist[tau]) h /= static_cast<double>(n) * res.days_measured;
  }

  // Backward discounted returns for the tracked block. Visits whose remaining
  // window is shorter than the truncation horizon are not credited.
  if (n_track > 0) {
    const double delta = sc.discount;
    const long long horizon =
        delta > 0.0 ? static_cast<long long>(std::ceil(std::log(1e-8) / std::log(delta)))
                    : 1;
    const long long last_credit = total_days - std::min(horizon, total_days);
    std::vector<std::vector<double>> sum(n_types), m2(n_types);
    for (int tau = 0; tau < n_types; ++tau) {
      const TypeShape sh = shape_for(sc, tau);
      sum[tau].assign(sh.n_states(), 0.0);
      m2[tau].assign(sh.n_states(), 0.0);
    }
    for (int i = 0; i < n_track; ++i) {
      const int tau = pop.agents[track_idx[i]].type;  // type is static
      const TypeShape sh = shape_for(sc, tau);
      double g = 0.0;
      for (long long day = total_days - 1; day >= 0; --day) {
        const std::size_t idx = static_cast<std::size_t>(i) * total_days + day;
        g = track_reward[idx] + delta * g;
        if (day >= cfg.burn_in && day < last_credit) {
          const int u = track_state[idx] >> 24;
          const int k = track_state[idx] & 0xffffff;
          const int x = sh.sidx(u, k);
          const long long c = ++res.return_count[tau][x];
          const double mean_old = c == 1 ? 0.0 : sum[tau][x] / (c - 1);
          sum[tau][x] += g;
          const double mean_new = sum[tau][x] / c;
          m2[tau][x] += (g - mean_old) * (g - mean_new);
        }
      }
    }
    for (int tau = 0; tau < n_types; ++tau) {
      const TypeShape sh = shape_for(sc, tau);
      for (int x = 0; x < sh.n_states(); ++x) {
        const long long c = res.return_count[tau][x];
        if (c > 0) {
          res.return_mean[tau][x] = sum[tau][x] / c;
          res.return_var[tau][x] = c > 1 ? m2[tau][x] / (c - 1) : 0.0;
        }
      }
    }
  }
  return res;
}

}  // namespace carma
