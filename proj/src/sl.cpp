#include "rlmpc/sl.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "rlmpc/json_io.hpp"

namespace rlmpc::sl {

std::vector<LabeledSample> generate_dataset(const agent::MicrogridEnv& env,
                                            int n_data, std::uint64_t seed,
                                            const BnbConfig& bnb,
                                            GenerateStats* stats) {
  std::mt19937_64 rng(seed);
  std::vector<LabeledSample> out;
  out.reserve(static_cast<size_t>(n_data));
  GenerateStats local;
  local.requested = n_data;
  const int dps = env.problem().layout.disc_per_step();
  const int max_attempts = 20 * n_data + 100;
  int attempts = 0;
  while (static_cast<int>(out.size()) < n_data && attempts < max_attempts) {
    ++attempts;
    const AugmentedState chi = env.sample_state(rng, false);
    const MilpSolution sol = env.solve_exact(chi, bnb);
    if (sol.status == MilpStatus::Infeasible) {
      ++local.skipped_infeasible;
      continue;
    }
    if (sol.status == MilpStatus::NodeLimit) {
      ++local.skipped_node_limit;
      continue;
    }
    LabeledSample sample;
    sample.chi = chi;
    sample.labels.reserve(static_cast<size_t>(env.n_p()));
    const Index disc0 = env.problem().layout.num_cont();
    for (int l = 0; l < env.n_p(); ++l) {
      const Vector bits =
          sol.primal.segment(disc0 + static_cast<Index>(l) * dps, dps);
      sample.labels.push_back(microgrid::sub_action_to_index(bits));
    }
    out.push_back(std::move(sample));
  }
  local.produced = static_cast<int>(out.size());
  if (stats) *stats = local;
  if (local.produced < n_data)
    throw std::runtime_error("generate_dataset: too many skipped instances");
  return out;
}

namespace {
using nlohmann::json;
constexpr int kDatasetVersion = 1;
}  // namespace

void save_dataset(const std::vector<LabeledSample>& samples, int n_p,
                  int num_actions, const std::string& path) {
  json j;
  j["format_version"] = kDatasetVersion;
  j["n_p"] = n_p;
  j["num_actions"] = num_actions;
  j["samples"] = json::array();
  for (const auto& s : samples) {
    j["samples"].push_back({{"x", json_io::vector_to_json(s.chi.x)},
                            {"gamma", json_io::vector_to_json(s.chi.gamma)},
                            {"labels", s.labels}});
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << j.dump() << "\n";
}

std::vector<LabeledSample> load_dataset(const std::string& path, int* n_p_out,
                                        int* num_actions_out) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  in >> j;
  if (j.at("format_version").get<int>() != kDatasetVersion)
    throw std::runtime_error("dataset: unsupported format version");
  const int n_p = j.at("n_p").get<int>();
  const int num_actions = j.at("num_actions").get<int>();
  if (n_p_out) *n_p_out = n_p;
  if (num_actions_out) *num_actions_out = num_actions;
  std::vector<LabeledSample> out;
  for (const auto& sj : j.at("samples")) {
    LabeledSample s;
    s.chi.x = json_io::vector_from_json(sj.at("x"), "x");
    s.chi.gamma = json_io::vector_from_json(sj.at("gamma"), "gamma");
    s.labels = sj.at("labels").get<std::vector<int>>();
    if (static_cast<int>(s.labels.size()) != n_p)
      throw std::runtime_error("dataset: label length mismatch");
    for (int a : s.labels)
      if (a < 0 || a >= num_actions)
        throw std::runtime_error("dataset: label out of range");
    out.push_back(std::move(s));
  }
  return out;
}

SlResult train_sl(const std::vector<LabeledSample>& dataset,
                  const agent::MicrogridEnv& env, const SlConfig& cfg) {
  if (dataset.empty()) throw std::invalid_argument("train_sl: empty dataset");

  neural::InputSpec spec;
  spec.n_p = env.n_p();
  spec.state_size = 1;
  spec.gamma_per_step = microgrid::kGammaPerStep;
  spec.num_actions = env.num_actions();
  spec.sub_action_bits = env.params().n_gen + 2;

  SlResult result;
  result.net = neural::init_qnetwork(spec, cfg.hidden, cfg.seed);
  result.net.objective = "classifier";
  QNetwork& net = result.net;
  agent::fit_normalization(net, env.params(), env.data());

  neural::AdamState adam;
  adam.cfg = cfg.adam;
  std::mt19937_64 rng(cfg.seed * 0x9e3779b97f4a7c15ULL + 11);

  const int n_p = spec.n_p;
  const Index n = static_cast<Index>(dataset.size());
  std::vector<Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    long correct = 0, total = 0;
    for (Index start = 0; start < n; start += cfg.batch_size) {
      const Index b = std::min<Index>(cfg.batch_size, n - start);
      std::vector<Matrix> inputs(static_cast<size_t>(n_p));
      for (int l = 0; l < n_p; ++l) {
        inputs[static_cast<size_t>(l)].resize(net.lstm.input_size, b);
        for (Index j = 0; j < b; ++j) {
          const LabeledSample& s =
              dataset[static_cast<size_t>(order[static_cast<size_t>(start + j)])];
          // teacher forcing: condition on the previous label
          const int prev = l > 0 ? s.labels[static_cast<size_t>(l - 1)] : -1;
          inputs[static_cast<size_t>(l)].col(j) =
              agent::build_step_input(net, s.chi, l, prev);
        }
      }
      const neural::ForwardResult fw = neural::forward_batch(net, inputs);
      std::vector<Matrix> dq(static_cast<size_t>(n_p));
      double loss = 0.0;
      for (int l = 0; l < n_p; ++l) {
        const Matrix& logits = fw.q[static_cast<size_t>(l)];
        Matrix probs(logits.rows(), b);
        for (Index j = 0; j < b; ++j)
          probs.col(j) = neural::softmax(logits.col(j), 1.0);
        dq[static_cast<size_t>(l)] = probs / static_cast<double>(b);
        for (Index j = 0; j < b; ++j) {
          const LabeledSample& s =
              dataset[static_cast<size_t>(order[static_cast<size_t>(start + j)])];
          const int label = s.labels[static_cast<size_t>(l)];
          loss -= std::log(std::max(probs(label, j), 1e-300));
          dq[static_cast<size_t>(l)](label, j) -= 1.0 / static_cast<double>(b);
          Index pred;
          logits.col(j).maxCoeff(&pred);
          correct += pred == label;
          ++total;
        }
      }
      loss /= static_cast<double>(b);
      const neural::Gradients grads = neural::backward_batch(net, fw.trace, dq);
      neural::optimizer_step(adam, neural::tensor_views(net),
                             neural::tensor_views(grads));
      loss_sum += loss * static_cast<double>(b);
    }
    EpochLog log;
    log.epoch = epoch;
    log.mean_loss = loss_sum / static_cast<double>(n);
    log.accuracy = total > 0 ? static_cast<double>(correct) / total : 0.0;
    result.log.push_back(log);
  }
  return result;
}

std::vector<int> predict(const QNetwork& net, const AugmentedState& chi) {
  return agent::rollout_greedy(net, chi).actions;
}

double per_step_accuracy(const QNetwork& net,
                         const std::vector<LabeledSample>& dataset) {
  if (dataset.empty()) return 0.0;
  long correct = 0, total = 0;
  for (const auto& s : dataset) {
    const std::vector<int> pred = predict(net, s.chi);
    for (size_t l = 0; l < s.labels.size(); ++l) {
      correct += pred[l] == s.labels[l];
      ++total;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(total);
}

void write_sl_log_csv(const std::vector<EpochLog>& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "epoch,mean_loss,accuracy\n";
  out.precision(12);
  for (const auto& e : log)
    out << e.epoch << "," << e.mean_loss << "," << e.accuracy << "\n";
}

}  // namespace rlmpc::sl
