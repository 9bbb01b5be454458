#pragma once

#include <string>
#include <vector>

#include "carma/benchmarks.hpp"
#include "carma/game.hpp"
#include "carma/solver.hpp"

namespace carma {

enum class Scheme { NOM, TOLL, CARMA };

const char* scheme_name(Scheme s);

// Long-run performance of one scheme at system and commuter-type level.
// System values are the share-weighted sums of the per-type values.
struct SchemeMetrics {
  Scheme scheme = Scheme::NOM;
  double system_queue_delay = 0.0;  // min
  double system_cost = 0.0;         // cost units
  std::vector<double> per_type_queue_delay;
  std::vector<double> per_type_cost;
  std::vector<double> per_type_normalized_cost;  // cost / type-average VOT
};

struct TypeAverageVot {
  std::vector<double> per_type;
  double system = 0.0;
};

// Type-average VOT from the stationary distribution of each urgency process.
TypeAverageVot type_average_vot(const Scenario& sc);

// Population VOT distribution pooled across types (stationary weights),
// merged on equal levels, ascending.
VotDistribution pooled_vot(const Scenario& sc);

// Midpoint de-biasing of the discrete queue trajectory: interval i receives
// the delay of the piecewise-linear queue evaluated at the interval midpoint,
// (q[i-1] + q[i]) / (2 s_slow). Used only in metric aggregation; the game is
// solved on the raw discrete delays.
std::vector<double> interpolate_queue_delay(const QueueProfile& raw, const BottleneckParams& p);

SchemeMetrics nom_metrics(const Scenario& sc, const NomEquilibrium& eq);
SchemeMetrics toll_metrics(const Scenario& sc, const TollEquilibrium& te,
                           const NomEquilibrium& nom);

// Table-style aggregation over the equilibrium social state; queue delays are
// interpolation-corrected, costs aggregate the raw in-game rewards.
SchemeMetrics carma_metrics(const Scenario& sc, const SneSolution& sol);

// Uncorrected (raw discrete) queue delays of the equilibrium, for comparison
// against finite-population simulation.
struct RawQueueDelay {
  double system = 0.0;
  std::vector<double> per_type;
};
RawQueueDelay carma_queue_delay_raw(const Scenario& sc, const SneSolution& sol);

struct FairnessRow {
  Scheme scheme = Scheme::TOLL;
  std::string scope;  // "system" or a type name
  double queue_delay_reduction = 0.0;      // fraction vs NOM
  double normalized_cost_reduction = 0.0;  // fraction vs NOM
  bool worse_off = false;
};

struct FairnessReport {
  std::vector<FairnessRow> rows;
  bool any_worse_off = false;
};

// Per-type and system reductions relative to the no-control benchmark for
// queue delay and normalized cost; flags scopes strictly worse off.
FairnessReport fairness_report(const Scenario& sc, const SchemeMetrics& nom,
                               const std::vector<SchemeMetrics>& schemes);

}  // namespace carma
