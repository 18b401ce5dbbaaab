#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rlmpc/agent.hpp"

namespace rlmpc::sl {

using neural::QNetwork;

struct LabeledSample {
  AugmentedState chi;
  std::vector<int> labels;  ///< optimal per-step sub-action indices
};

struct GenerateStats {
  int requested = 0;
  int produced = 0;
  int skipped_infeasible = 0;
  int skipped_node_limit = 0;
};

/// Solves the exact MILP at randomly sampled states (the same sampling
/// scheme the RL episodes use) and keeps only the discrete part of each
/// optimum. Infeasible-at-the-root states and node-limited solves are
/// skipped and counted. Sampling is with replacement; duplicates may occur.
std::vector<LabeledSample> generate_dataset(const agent::MicrogridEnv& env,
                                            int n_data, std::uint64_t seed,
                                            const BnbConfig& bnb = {},
                                            GenerateStats* stats = nullptr);

/// Versioned JSON dataset of (chi, labels) records.
void save_dataset(const std::vector<LabeledSample>& samples, int n_p,
                  int num_actions, const std::string& path);
std::vector<LabeledSample> load_dataset(const std::string& path, int* n_p_out,
                                        int* num_actions_out);

struct SlConfig {
  Index hidden = 64;
  int epochs = 60;
  int batch_size = 64;
  std::uint64_t seed = 1;
  neural::AdamConfig adam;
};

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  double accuracy = 0.0;  ///< per-step training accuracy, teacher-forced
};

struct SlResult {
  QNetwork net;
  std::vector<EpochLog> log;
};

/// Cross-entropy training of the classifier (the same architecture as the
/// Q-network). Teacher forcing: the previous-sub-action input comes from
/// the label sequence, not the prediction.
SlResult train_sl(const std::vector<LabeledSample>& dataset,
                  const agent::MicrogridEnv& env, const SlConfig& cfg);

/// Greedy free-running decode; identical mechanics to the greedy rollout.
std::vector<int> predict(const QNetwork& net, const AugmentedState& chi);

/// Per-step accuracy of free-running predictions against the labels.
double per_step_accuracy(const QNetwork& net,
                         const std::vector<LabeledSample>& dataset);

void write_sl_log_csv(const std::vector<EpochLog>& log, const std::string& path);

}  // namespace rlmpc::sl
