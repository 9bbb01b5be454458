#include "carma/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace carma::io {

namespace {

using nlohmann::json;

std::ofstream open_out(const std::string& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  const std::string path = dir + "/" + name;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string write_metrics_csv(const std::string& dir, const Scenario& sc,
                              const std::vector<SchemeMetrics>& metrics) {
  auto out = open_out(dir, "metrics.csv");
  out << "scheme,scope,queue_delay_min,cost,normalized_cost\n";
  for (const auto& m : metrics) {
    const double sys_vot = type_average_vot(sc).system;
    out << scheme_name(m.scheme) << ",system," << format_double(m.system_queue_delay) << ','
        << format_double(m.system_cost) << ','
        << format_double(sys_vot > 0.0 ? m.system_cost / sys_vot : 0.0) << '\n';
    for (int tau = 0; tau < sc.n_types(); ++tau)
      out << scheme_name(m.scheme) << ',' << sc.types[tau].name << ','
          << format_double(m.per_type_queue_delay[tau]) << ','
          << format_double(m.per_type_cost[tau]) << ','
          << format_double(m.per_type_normalized_cost[tau]) << '\n';
  }
  return "metrics.csv";
}

std::string write_fairness_csv(const std::string& dir, const FairnessReport& report) {
  auto out = open_out(dir, "fairness.csv");
  out << "scheme,scope,queue_delay_reduction,normalized_cost_reduction,worse_off\n";
  for (const auto& row : report.rows)
    out << scheme_name(row.scheme) << ',' << row.scope << ','
        << format_double(row.queue_delay_reduction) << ','
        << format_double(row.normalized_cost_reduction) << ',' << (row.worse_off ? 1 : 0)
        << '\n';
  return "fairness.csv";
}

std::string write_nom_csv(const std::string& dir, const VotDistribution& vot,
                          const NomEquilibrium& eq) {
  auto out = open_out(dir, "nom_summary.csv");
  out << "c_star,t_start_min,t_end_min,t_peak_min,mean_queue_delay_min,mean_cost\n";
  out << format_double(eq.c_star) << ',' << format_double(eq.t_start) << ','
      << format_double(eq.t_end) << ',' << format_double(eq.t_peak) << ','
      << format_double(eq.mean_queue_delay) << ',' << format_double(eq.mean_cost) << '\n';
  auto lv = open_out(dir, "nom_levels.csv");
  lv << "vot_level,prob,cost\n";
  for (std::size_t j = 0; j < vot.levels.size(); ++j)
    lv << format_double(vot.levels[j]) << ',' << format_double(vot.probs[j]) << ','
       << format_double(eq.per_level_cost[j]) << '\n';
  return "nom_summary.csv";
}

std::string write_toll_summary_csv(const std::string& dir, const VotDistribution& vot,
                                   const TollEquilibrium& te) {
  auto out = open_out(dir, "toll_summary.csv");
  out << "m_index,r_m,system_queue_delay_min,system_cost,peak_price,window_start_min,"
         "window_end_min\n";
  out << te.m_index << ',' << format_double(te.r_m) << ','
      << format_double(te.system_queue_delay) << ',' << format_double(te.system_cost) << ','
      << format_double(te.peak_price) << ',' << format_double(te.window_start) << ','
      << format_double(te.window_end) << '\n';
  auto lv = open_out(dir, "toll_levels.csv");
  lv << "vot_level,prob,queue_delay_min,cost,fast_fraction\n";
  for (std::size_t j = 0; j < vot.levels.size(); ++j)
    lv << format_double(vot.levels[j]) << ',' << format_double(vot.probs[j]) << ','
       << format_double(te.per_level_queue_delay[j]) << ','
       << format_double(te.per_level_cost[j]) << ','
       << format_double(te.per_level_fast_frac[j]) << '\n';
  return "toll_summary.csv";
}

std::string write_toll_profile_csv(const std::string& dir, const TollEquilibrium& te) {
  auto out = open_out(dir, "toll_profile.csv");
  out << "time_min,price\n";
  for (const auto& [t, p] : te.toll_breakpoints)
    out << format_double(t) << ',' << format_double(p) << '\n';
  return "toll_profile.csv";
}

std::vector<std::string> write_carma_outputs(const std::string& dir, const Scenario& sc,
                                             const SneSolution& sol,
                                             const TollEquilibrium* toll_overlay) {
  std::vector<std::string> files;

  {
    auto out = open_out(dir, "carma_policy.csv");
    out << "type,vot_level,karma,time_min,bid,prob\n";
    for (int tau = 0; tau < sc.n_types(); ++tau) {
      const TypeShape sh = shape_for(sc, tau);
      for (int u = 0; u < sh.n_u; ++u)
        for (int k = 0; k < sh.n_k; ++k) {
          const double* row = sol.pi_star.row(sh, tau, u, k);
          for (int t = 0; t < sh.n_t; ++t)
            for (int b = 0; b <= k; ++b)
              out << sc.types[tau].name << ','
                  << format_double(sc.types[tau].urgency.levels[u]) << ',' << k << ','
                  << format_double(sc.bn.interval_start(t)) << ',' << b << ','
                  << format_double(row[sh.aidx(t, b)]) << '\n';
        }
    }
    files.push_back("carma_policy.csv");
  }

  {
    auto out = open_out(dir, "carma_karma_dist.csv");
    out << "type,karma,mass\n";
    for (int tau = 0; tau < sc.n_types(); ++tau) {
      const TypeShape sh = shape_for(sc, tau);
      for (int k = 0; k < sh.n_k; ++k) {
        double mass = 0.0;
        for (int u = 0; u < sh.n_u; ++u) mass += sol.d_star.d[tau][sh.sidx(u, k)];
        out << sc.types[tau].name << ',' << k << ',' << format_double(mass) << '\n';
      }
    }
    files.push_back("carma_karma_dist.csv");
  }

  {
    auto out = open_out(dir, "carma_bstar.csv");
    out << "time_min,b_star,toll_price\n";
    for (int t = 0; t < sc.bn.n_intervals; ++t) {
      const double inst = sc.bn.interval_start(t);
      const double price = toll_overlay ? toll_price(*toll_overlay, inst) : 0.0;
      out << format_double(inst) << ',' << sol.b_star_profile[t] << ','
          << format_double(price) << '\n';
    }
    files.push_back("carma_bstar.csv");
  }

  {
    auto out = open_out(dir, "carma_departures.csv");
    out << "time_min,type,vot_level,fast_veh,slow_veh\n";
    const double n = static_cast<double>(sc.bn.n_commuters);
    for (int t = 0; t < sc.bn.n_intervals; ++t) {
      for (int tau = 0; tau < sc.n_types(); ++tau) {
        const TypeShape sh = shape_for(sc, tau);
        for (int u = 0; u < sh.n_u; ++u) {
          double fast = 0.0, slow = 0.0;
          for (int k = 0; k < sh.n_k; ++k) {
            const double* row = sol.pi_star.row(sh, tau, u, k);
            const double mass = sol.d_star.d[tau][sh.sidx(u, k)];
            if (mass == 0.0) continue;
            for (int b = 0; b <= k; ++b) {
              const double m = mass * row[sh.aidx(t, b)];
              const double psi = sol.context.psi(t, b);
              fast += m * psi;
              slow += m * (1.0 - psi);
            }
          }
          out << format_double(sc.bn.interval_start(t)) << ',' << sc.types[tau].name << ','
              << format_double(sc.types[tau].urgency.levels[u]) << ','
              << format_double(fast * n) << ',' << format_double(slow * n) << '\n';
        }
      }
    }
    files.push_back("carma_departures.csv");
  }

  {
    auto out = open_out(dir, "carma_queue.csv");
    out << "time_min,queue_veh,delay_min,delay_interp_min\n";
    const std::vector<double> interp = interpolate_queue_delay(sol.context.queue, sc.bn);
    for (int t = 0; t < sc.bn.n_intervals; ++t)
      out << format_double(sc.bn.interval_start(t)) << ','
          << format_double(sol.context.queue.queue_len[t]) << ','
          << format_double(sol.context.queue.delay[t]) << ',' << format_double(interp[t])
          << '\n';
    files.push_back("carma_queue.csv");
  }

  {
    auto out = open_out(dir, "carma_trace.csv");
    out << "iteration,stationarity_res,optimality_gap,mean_karma,avg_payment,epsilon,"
           "eta_policy,eta_dist,clamp_flow\n";
    for (const auto& r : sol.diagnostics.trace)
      out << r.iteration << ',' << format_double(r.stationarity_res) << ','
          << format_double(r.optimality_gap) << ',' << format_double(r.mean_karma) << ','
          << format_double(r.avg_payment) << ',' << format_double(r.epsilon) << ','
          << format_double(r.eta_policy) << ',' << format_double(r.eta_dist) << ','
          << format_double(r.clamp_flow) << '\n';
    files.push_back("carma_trace.csv");
  }
  return files;
}

std::vector<std::string> write_mc_outputs(const std::string& dir, const Scenario& sc,
                                          const SimulationResult& res,
                                          const TypeStateDistribution& d_star) {
  std::vector<std::string> files;
  {
    auto out = open_out(dir, "mc_summary.csv");
    out << "scope,days_measured,mean_queue_delay_min,mean_cost\n";
    double sys_cost = 0.0;
    for (int tau = 0; tau < sc.n_types(); ++tau)
      sys_cost += sc.types[tau].share * res.per_type_cost[tau];
    out << "system," << res.days_measured << ',' << format_double(res.mean_queue_delay) << ','
        << format_double(sys_cost) << '\n';
    for (int tau = 0; tau < sc.n_types(); ++tau)
      out << sc.types[tau].name << ',' << res.days_measured << ','
          << format_double(res.per_type_queue_delay[tau]) << ','
          << format_double(res.per_type_cost[tau]) << '\n';
    files.push_back("mc_summary.csv");
  }
  {
    auto out = open_out(dir, "mc_karma_hist.csv");
    out << "type,karma,empirical_mass,stationary_mass\n";
    for (int tau = 0; tau < sc.n_types(); ++tau) {
      const TypeShape sh = shape_for(sc, tau);
      for (int k = 0; k < sh.n_k; ++k) {
        double d_mass = 0.0;
        for (int u = 0; u < sh.n_u; ++u) d_mass += d_star.d[tau][sh.sidx(u, k)];
        out << sc.types[tau].name << ',' << k << ',' << format_double(res.karma_hist[tau][k])
            << ',' << format_double(d_mass) << '\n';
      }
    }
    files.push_back("mc_karma_hist.csv");
  }
  {
    auto out = open_out(dir, "mc_queue.csv");
    out << "time_min,mean_delay_min\n";
    for (int t = 0; t < sc.bn.n_intervals; ++t)
      out << format_double(sc.bn.interval_start(t)) << ','
          << format_double(res.queue_delay_by_interval[t]) << '\n';
    files.push_back("mc_queue.csv");
  }
  return files;
}

std::string write_schema(const std::string& dir, const std::vector<std::string>& files) {
  auto out = open_out(dir, "schema.txt");
  out << "Tables are comma-separated with one header row; floats use 12 significant digits.\n"
      << "Times are minutes, delays are minutes, costs are cost units, masses are\n"
      << "population fractions, rates are vehicles per interval.\n\n";
  for (const auto& f : files) {
    out << f << "\n";
    if (f == "metrics.csv")
      out << "  scheme, scope (system or type name), queue_delay_min, cost, normalized_cost\n";
    else if (f == "fairness.csv")
      out << "  scheme, scope, queue_delay_reduction and normalized_cost_reduction vs NOM\n"
             "  (fractions), worse_off flag (1 = strictly worse than NOM)\n";
    else if (f == "nom_summary.csv")
      out << "  equilibrium cost base and peak timing of the no-control benchmark\n";
    else if (f == "nom_levels.csv")
      out << "  per VOT level: population share and equilibrium cost\n";
    else if (f == "toll_summary.csv")
      out << "  marginal group index, slow-lane fraction r_m, system outcomes, peak price,\n"
             "  fast-lane service window\n";
    else if (f == "toll_levels.csv")
      out << "  per VOT level: queue delay, cost, fraction served on the fast lane\n";
    else if (f == "toll_profile.csv")
      out << "  piecewise-linear toll breakpoints (time_min, price)\n";
    else if (f == "carma_policy.csv")
      out << "  equilibrium policy weight per (type, vot_level, karma, time_min, bid)\n";
    else if (f == "carma_karma_dist.csv")
      out << "  stationary karma mass per type (marginal over urgency)\n";
    else if (f == "carma_bstar.csv")
      out << "  threshold bid per departure time with the optimal toll overlay\n";
    else if (f == "carma_departures.csv")
      out << "  departure rate per lane, type and VOT level (vehicles per interval)\n";
    else if (f == "carma_queue.csv")
      out << "  slow-lane queue and delay per interval, raw and midpoint-interpolated\n";
    else if (f == "carma_trace.csv")
      out << "  solver iteration trace: residuals, mean karma, average payment, smoothing\n"
             "  and damping schedule, k_max clamp flow\n";
    else if (f == "mc_summary.csv")
      out << "  simulated mean queue delay and cost, system and per type\n";
    else if (f == "mc_karma_hist.csv")
      out << "  empirical decision-time karma occupancy vs the stationary distribution\n";
    else if (f == "mc_queue.csv")
      out << "  time-averaged simulated queue delay per interval\n";
    else if (f == "solution.json")
      out << "  versioned solution archive: config, distribution, policy, values,\n"
             "  threshold bids, diagnostics\n";
  }
  return "schema.txt";
}

void save_solution(const std::string& path, const ExperimentConfig& cfg, const SneSolution& sol) {
  json j;
  j["schema_version"] = 1;
  j["config"] = to_json(cfg);
  const auto& dg = sol.diagnostics;
  j["diagnostics"] = {{"converged", dg.converged},
                      {"iterations", dg.iterations},
                      {"stationarity_res", dg.stationarity_res},
                      {"optimality_gap", dg.optimality_gap},
                      {"mean_karma", dg.mean_karma},
                      {"karma_drift", dg.karma_drift},
                      {"clamp_mass_kmax", dg.clamp_mass_kmax},
                      {"kmax_warning", dg.kmax_warning}};
  j["b_star"] = sol.b_star_profile;
  json types = json::array();
  for (std::size_t tau = 0; tau < sol.d_star.d.size(); ++tau) {
    json tj;
    tj["d"] = sol.d_star.d[tau];
    tj["policy"] = sol.pi_star.pi[tau];
    tj["v"] = sol.values.v[tau];
    types.push_back(tj);
  }
  j["types"] = types;

  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << j.dump(1) << '\n';
}

SavedSolution load_solution(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open solution file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("solution file is not valid JSON: " + std::string(e.what()));
  }
  if (!j.contains("schema_version") || j.at("schema_version").get<int>() != 1)
    throw std::runtime_error("solution file: unsupported schema version");
  SavedSolution out;
  out.config = parse_config(j.at("config"));
  out.converged = j.at("diagnostics").at("converged").get<bool>();
  out.b_star = j.at("b_star").get<std::vector<int>>();
  for (const auto& tj : j.at("types")) {
    out.d_star.d.push_back(tj.at("d").get<std::vector<double>>());
    out.pi_star.pi.push_back(tj.at("policy").get<std::vector<double>>());
    out.v.push_back(tj.at("v").get<std::vector<double>>());
  }
  return out;
}

}  // namespace carma::io
