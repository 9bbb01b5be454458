#include "carma/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "carma/mdp.hpp"

namespace carma {

namespace {

// Per-type action mass nu_tau[t,b] = sum_{u,k} d_tau[u,k] pi_tau[t,b|u,k].
std::vector<double> type_action_mass(const Scenario& sc, int tau, const TypeStateDistribution& d,
                                     const Policy& pi) {
  const TypeShape sh = shape_for(sc, tau);
  std::vector<double> nu(sh.n_actions(), 0.0);
  for (int x = 0; x < sh.n_states(); ++x) {
    const double mass = d.d[tau][x];
    if (mass == 0.0) continue;
    const double* row = pi.pi[tau].data() + static_cast<std::size_t>(x) * sh.n_actions();
    for (int a = 0; a < sh.n_actions(); ++a) nu[a] += mass * row[a];
  }
  return nu;
}

double type_queue_delay(const Scenario& sc, int tau, const SneSolution& sol,
                        const std::vector<double>& delay_by_interval) {
  const TypeShape sh = shape_for(sc, tau);
  const std::vector<double> nu = type_action_mass(sc, tau, sol.d_star, sol.pi_star);
  double acc = 0.0;
  for (int t = 0; t < sh.n_t; ++t)
    for (int b = 0; b < sh.n_b; ++b)
      acc += nu[sh.aidx(t, b)] * (1.0 - sol.context.psi(t, b)) * delay_by_interval[t];
  const double g = sc.types[tau].share;
  return g > 0.0 ? acc / g : 0.0;
}

}  // namespace

const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::NOM: return "NOM";
    case Scheme::TOLL: return "TOLL";
    case Scheme::CARMA: return "CARMA";
  }
  return "?";
}

TypeAverageVot type_average_vot(const Scenario& sc) {
  TypeAverageVot out;
  out.per_type.resize(sc.n_types());
  for (int tau = 0; tau < sc.n_types(); ++tau) {
    const auto& urg = sc.types[tau].urgency;
    const std::vector<double> st = urg.stationary();
    double m = 0.0;
    for (int u = 0; u < urg.n_levels(); ++u) m += st[u] * urg.levels[u];
    out.per_type[tau] = m;
    out.system += sc.types[tau].share * m;
  }
  return out;
}

VotDistribution pooled_vot(const Scenario& sc) {
  std::vector<std::pair<double, double>> mass;  // (level, prob)
  for (int tau = 0; tau < sc.n_types(); ++tau) {
    const auto& urg = sc.types[tau].urgency;
    const std::vector<double> st = urg.stationary();
    for (int u = 0; u < urg.n_levels(); ++u) {
      const double level = urg.levels[u];
      const double p = sc.types[tau].share * st[u];
      auto it = std::find_if(mass.begin(), mass.end(),
                             [level](const auto& e) { return e.first == level; });
      if (it == mass.end())
        mass.emplace_back(level, p);
      else
        it->second += p;
    }
  }
  std::sort(mass.begin(), mass.end());
  VotDistribution vot;
  for (const auto& [level, p] : mass) {
    vot.levels.push_back(level);
    vot.probs.push_back(p);
  }
  vot.validate();
  return vot;
}

std::vector<double> interpolate_queue_delay(const QueueProfile& raw, const BottleneckParams& p) {
  std::vector<double> out(raw.queue_len.size(), 0.0);
  double prev = 0.0;
  for (std::size_t i = 0; i < raw.queue_len.size(); ++i) {
    out[i] = (prev + raw.queue_len[i]) / (2.0 * p.s_slow);
    prev = raw.queue_len[i];
  }
  return out;
}

SchemeMetrics nom_metrics(const Scenario& sc, const NomEquilibrium& eq) {
  SchemeMetrics m;
  m.scheme = Scheme::NOM;
  const TypeAverageVot vot = type_average_vot(sc);
  m.per_type_queue_delay.assign(sc.n_types(), eq.mean_queue_delay);
  m.per_type_cost.resize(sc.n_types());
  m.per_type_normalized_cost.resize(sc.n_types());
  for (int tau = 0; tau < sc.n_types(); ++tau) {
    m.per_type_cost[tau] = vot.per_type[tau] * eq.c_star;
    m.per_type_normalized_cost[tau] =
        vot.per_type[tau] > 0.0 ? m.per_type_cost[tau] / vot.per_type[tau] : 0.0;
  }
  for (int tau = 0; tau < sc.n_types(); ++tau) {
    m.system_queue_delay += sc.types[tau].share * m.per_type_queue_delay[tau];
    m.system_cost += sc.types[tau].share * m.per_type_cost[tau];
  }
  return m;
}

SchemeMetrics toll_metrics(const Scenario& sc, const TollEquilibrium& te,
                           const NomEquilibrium& nom) {
  (void)nom;
  SchemeMetrics m;
  m.scheme = Scheme::TOLL;
  const VotDistribution pool = pooled_vot(sc);
  const TypeAverageVot vot = type_average_vot(sc);
  m.per_type_queue_delay.assign(sc.n_types(), 0.0);
  m.per_type_cost.assign(sc.n_types(), 0.0);
  m.per_type_normalized_cost.assign(sc.n_types(), 0.0);
  for (int tau = 0; tau < sc.n_types(); ++tau) {
    const auto& urg = sc.types[tau].urgency;
    const std::vector<double> st = urg.stationary();
    for (int u = 0; u < urg.n_levels(); ++u) {
      const double level = urg.levels[u];
      const auto it = std::find(pool.levels.begin(), pool.levels.end(), level);
      if (it == pool.levels.end())
        throw std::logic_error("toll_metrics: level missing from pooled distribution");
      const int j = static_cast<int>(it - pool.levels.begin());
      m.per_type_queue_delay[tau] += st[u] * te.per_level_queue_delay[j];
      m.per_type_cost[tau] += st[u] * te.per_level_cost[j];
    }
    m.per_type_normalized_cost[tau] =
        vot.per_type[tau] > 0.0 ? m.per_type_cost[tau] / vot.per_type[tau] : 0.0;
  }
  for (int tau = 0; tau < sc.n_types(); ++tau) {
    m.system_queue_delay += sc.types[tau].share * m.per_type_queue_delay[tau];
    m.system_cost += sc.types[tau].share * m.per_type_cost[tau];
  }
  return m;
}

SchemeMetrics carma_metrics(const Scenario& sc, const SneSolution& sol) {
  SchemeMetrics m;
  m.scheme = Scheme::CARMA;
  const TypeAverageVot vot = type_average_vot(sc);
  const std::vector<double> delay_int = interpolate_queue_delay(sol.context.queue, sc.bn);

  m.per_type_queue_delay.assign(sc.n_types(), 0.0);
  m.per_type_cost.assign(sc.n_types(), 0.0);
  m.per_type_normalized_cost.assign(sc.n_types(), 0.0);
  for (int tau = 0; tau < sc.n_types(); ++tau) {
    m.per_type_queue_delay[tau] = type_queue_delay(sc, tau, sol, delay_int);
    const TypeShape sh = shape_for(sc, tau);
    double cost = 0.0;
    for (int u = 0; u < sh.n_u; ++u)
      for (int k = 0; k < sh.n_k; ++k) {
        const double mass = sol.d_star.d[tau][sh.sidx(u, k)];
        if (mass == 0.0) continue;
        cost -= mass * policy_reward(sc, tau, u, k, sol.pi_star, sol.context);
      }
    const double g = sc.types[tau].share;
    m.per_type_cost[tau] = g > 0.0 ? cost / g : 0.0;
    m.per_type_normalized_cost[tau] =
        vot.per_type[tau] > 0.0 ? m.per_type_cost[tau] / vot.per_type[tau] : 0.0;
  }
  for (int tau = 0; tau < sc.n_types(); ++tau) {
    m.system_queue_delay += sc.types[tau].share * m.per_type_queue_delay[tau];
    m.system_cost += sc.types[tau].share * m.per_type_cost[tau];
  }
  return m;
}

RawQueueDelay carma_queue_delay_raw(const Scenario& sc, const SneSolution& sol) {
  RawQueueDelay out;
  out.per_type.resize(sc.n_types());
  for (int tau = 0; tau < sc.n_types(); ++tau) {
    out.per_type[tau] = type_queue_delay(sc, tau, sol, sol.context.queue.delay);
    out.system += sc.types[tau].share * out.per_type[tau];
  }
  return out;
}

FairnessReport fairness_report(const Scenario& sc, const SchemeMetrics& nom,
                               const std::vector<SchemeMetrics>& schemes) {
  const TypeAverageVot vot = type_average_vot(sc);
  FairnessReport rep;
  auto reduction = [](double base, double val) {
    return base != 0.0 ? 1.0 - val / base : 0.0;
  };
  auto worse = [](double base, double val) { return val > base * (1.0 + 1e-12) + 1e-15; };
  const double nom_sys_norm = vot.system > 0.0 ? nom.system_cost / vot.system : 0.0;
  for (const auto& sm : schemes) {
    FairnessRow sys;
    sys.scheme = sm.scheme;
    sys.scope = "system";
    const double sys_norm = vot.system > 0.0 ? sm.system_cost / vot.system : 0.0;
    sys.queue_delay_reduction = reduction(nom.system_queue_delay, sm.system_queue_delay);
    sys.normalized_cost_reduction = reduction(nom_sys_norm, sys_norm);
    sys.worse_off = worse(nom.system_queue_delay, sm.system_queue_delay) ||
                    worse(nom_sys_norm, sys_norm);
    rep.rows.push_back(sys);
    for (int tau = 0; tau < sc.n_types(); ++tau) {
      FairnessRow row;
      row.scheme = sm.scheme;
      row.scope = sc.types[tau].name;
      row.queue_delay_reduction =
          reduction(nom.per_type_queue_delay[tau], sm.per_type_queue_delay[tau]);
      row.normalized_cost_reduction =
          reduction(nom.per_type_normalized_cost[tau], sm.per_type_normalized_cost[tau]);
      row.worse_off = worse(nom.per_type_queue_delay[tau], sm.per_type_queue_delay[tau]) ||
                      worse(nom.per_type_normalized_cost[tau], sm.per_type_normalized_cost[tau]);
      rep.any_worse_off = rep.any_worse_off || row.worse_off;
      rep.rows.push_back(row);
    }
  }
  return rep;
}

}  // namespace carma
