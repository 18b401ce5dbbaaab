#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rlmpc/agent.hpp"
#include "rlmpc/sl.hpp"

namespace rlmpc::bench {

struct EvalRecord {
  int chi_id = 0;
  std::string method;  ///< "RL", "SL", or "Optimal"
  std::string status;
  double j = 0.0;              ///< objective, meaningful iff feasible
  bool feasible = false;
  double wall_time_ms = 0.0;   ///< meaningful iff timing was enabled
  int n_p = 0;
};

struct TimeStats {
  double mean_ms = 0.0;
  double max_ms = 0.0;
  double std_ms = 0.0;
};

struct MetricsSummary {
  std::map<std::string, double> optimality_gap_pct;
  std::map<std::string, double> infeasibility_rate_per_1000;
  std::map<std::string, TimeStats> time_ms;          ///< filled iff timing
  std::map<std::string, double> reduction_factor_max;  ///< filled iff timing
  std::map<std::string, int> gap_pair_count;  ///< instances entering each gap mean
  int gap_excluded_count = 0;  ///< |J_optimal| below the denominator floor
  int pool = 0;
  int n_p = 0;
  std::uint64_t seed = 0;
  bool timing = false;
};

struct EvalOptions {
  int pool = 200;
  std::uint64_t seed = 7;
  bool timing = false;
  int threads = 1;  ///< >1 allowed only with timing off
  double gap_denominator_floor = 1e-3;
  BnbConfig bnb;
  bool run_optimal = true;
  bool run_rl = true;
  bool run_sl = true;
};

struct EvalResult {
  MetricsSummary summary;
  std::vector<EvalRecord> records;
};

/// The evaluation harness: over a seeded pool of augmented states, solve
/// the exact MILP and run the learned pipelines (network forward + LP),
/// then aggregate the optimality gap (mean over instances where both are
/// feasible and |J_optimal| exceeds the floor), the infeasibility rate per
/// 1000, and, when timing is on, per-method time statistics and the
/// max-time reduction factors.
EvalResult evaluate(const agent::MicrogridEnv& env, const neural::QNetwork* rl_net,
                    const neural::QNetwork* sl_net, const EvalOptions& opt);

void write_records_csv(const std::vector<EvalRecord>& records,
                       const std::string& path);

/// Deterministic serialization (sorted keys; timing fields null when
/// timing was off).
std::string summary_to_json(const MetricsSummary& s);

}  // namespace rlmpc::bench
