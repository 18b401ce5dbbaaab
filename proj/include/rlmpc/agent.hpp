#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "rlmpc/lstm.hpp"
#include "rlmpc/microgrid.hpp"
#include "rlmpc/mpc.hpp"
#include "rlmpc/profiles.hpp"

namespace rlmpc::agent {

using neural::QNetwork;

struct Transition {
  AugmentedState chi;
  std::vector<int> actions;  ///< chosen per-step sub-action indices, length n_p
  double reward = 0.0;
  AugmentedState next_chi;
  bool terminal = false;
};

/// Fixed-capacity FIFO ring with a uniform sampler.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);
  void push(Transition t);
  std::size_t size() const { return full_ ? ring_.size() : next_; }
  std::size_t capacity() const { return ring_.size(); }
  /// i = 0 is the oldest retained transition.
  const Transition& oldest(std::size_t i) const;
  std::vector<const Transition*> sample(std::size_t n, std::mt19937_64& rng) const;

 private:
  std::vector<Transition> ring_;
  std::size_t next_ = 0;
  bool full_ = false;
};

/// Per-step feature vector g_l: [normalized x; normalized gamma slice;
/// one-hot of the previous sub-action (zeros at l = 0, i.e. prev < 0);
/// l / N_p].
Vector build_step_input(const QNetwork& net, const AugmentedState& chi, int l,
                        int prev_action);

/// Freezes feature normalization from the plant bounds and the training
/// series into the network.
void fit_normalization(QNetwork& net, const microgrid::MicrogridParams& params,
                       const profiles::SeriesBundle& train);

struct Rollout {
  std::vector<int> actions;
  Matrix q;  ///< n_p x num_actions, rows conditioned on the chosen prefix
};

/// Autoregressive evaluation: at each step the previously selected
/// sub-action feeds the next input. Greedy breaks ties toward the lowest
/// index.
Rollout rollout_greedy(const QNetwork& net, const AugmentedState& chi);
Rollout rollout_boltzmann(const QNetwork& net, const AugmentedState& chi,
                          double xi, std::mt19937_64& rng);

/// Per-sample, per-step max Q under greedy autoregressive selection,
/// batched across states; result is states.size() x n_p.
Matrix greedy_max_q(const QNetwork& net,
                    const std::vector<const AugmentedState*>& states);

/// Scaled stage-cost reward on [0, 1]; infeasibility is handled by the
/// environment (r_inf).
double f_reward(double stage_cost, double cost_lo, double cost_hi);

struct EnvConfig {
  int n_steps = 48;     ///< episode time limit
  double r_inf = -1.0;  ///< reward when the suggested action is infeasible
};

/// The microgrid and its horizon problem lumped together: receives a
/// discrete action, solves the fixed-binary LP, applies the first input,
/// and advances the exogenous window.
class MicrogridEnv {
 public:
  MicrogridEnv(const microgrid::MicrogridParams& params, int n_p,
               profiles::SeriesBundle data, EnvConfig cfg = {});

  const MpcProblem& problem() const { return problem_; }
  const std::vector<Vector>& sub_actions() const { return sub_actions_; }
  const microgrid::MicrogridParams& params() const { return params_; }
  const profiles::SeriesBundle& data() const { return data_; }
  int n_p() const { return problem_.layout.n_p; }
  int num_actions() const { return static_cast<int>(sub_actions_.size()); }
  const EnvConfig& config() const { return cfg_; }

  AugmentedState make_state(Index k, double x_b) const;
  /// Random time index and random storage level across the operating
  /// region; with room_for_episode, leaves n_steps of lookahead.
  AugmentedState sample_state(std::mt19937_64& rng, bool room_for_episode) const;

  void set_reward_scale(double cost_lo, double cost_hi);
  double cost_lo() const { return cost_lo_; }
  double cost_hi() const { return cost_hi_; }
  /// 1st/99th percentile stage costs under uniform-random sub-actions.
  void calibrate_reward(int target_samples, std::mt19937_64& rng);

  AugmentedState reset(std::mt19937_64& rng);
  AugmentedState reset_at(Index k, double x_b);
  const AugmentedState& state() const { return chi_; }
  Index time_index() const { return k_; }

  Vector actions_to_eps_d(const std::vector<int>& actions) const;

  struct SolveResult {
    LpStatus status = LpStatus::Infeasible;
    Vector epsilon;          ///< full horizon decision, valid iff Optimal
    double objective = 0.0;  ///< valid iff Optimal
    double lp_time_s = 0.0;
  };
  /// Fixed-binary LP at an arbitrary state (pure; shared with inference).
  SolveResult solve_fixed(const AugmentedState& chi,
                          const std::vector<int>& actions) const;
  /// Exact MILP at an arbitrary state.
  MilpSolution solve_exact(const AugmentedState& chi,
                           const BnbConfig& bnb = {}) const;

  struct StepResult {
    double reward = 0.0;
    AugmentedState next_chi;
    bool terminal = false;
    LpStatus lp_status = LpStatus::Infeasible;
    bool diagnostic_failure = false;  ///< solver failure, not infeasibility
    Vector epsilon;
    double stage_cost = 0.0;
    double lp_time_s = 0.0;
  };
  StepResult step(const std::vector<int>& actions);

 private:
  microgrid::MicrogridParams params_;
  MpcProblem problem_;
  profiles::SeriesBundle data_;
  EnvConfig cfg_;
  std::vector<Vector> sub_actions_;
  double cost_lo_ = 0.0;
  double cost_hi_ = 1.0;
  Index k_ = 0;
  Vector x_;
  int steps_taken_ = 0;
  AugmentedState chi_;
};

/// y(j, l): r for terminal transitions, else r + alpha * max Q_l at the
/// next state under a fresh greedy rollout. Result is batch x n_p.
Matrix td_targets(const QNetwork& net, const std::vector<const Transition*>& batch,
                  double alpha);

struct AgentConfig {
  double discount = 0.99;
  int batch_size = 64;
  int buffer_capacity = 50000;
  int episodes = 2000;
  int steps_per_episode = 48;
  double xi_max = 50.0;       ///< Boltzmann temperature at the end of warmup
  double xi_warm_frac = 0.6;  ///< fraction of episodes spent ramping xi
  double r_inf = -1.0;
  std::uint64_t seed = 1;
  Index hidden = 64;
  neural::AdamConfig adam;
  int reward_calibration_samples = 1500;
};

/// Linear 0 -> xi_max over the first xi_warm_frac of episodes, then flat.
double xi_schedule(const AgentConfig& cfg, int episode);

struct EpisodeLog {
  int episode = 0;
  int steps = 0;
  double mean_reward = 0.0;
  double mean_loss = 0.0;
  bool ended_infeasible = false;
  bool aborted = false;  ///< solver diagnostic failure
  double xi = 0.0;
};

struct TrainResult {
  QNetwork net;
  std::vector<EpisodeLog> log;
};

/// Offline training: per episode a random initial state; per step a
/// Boltzmann rollout, an environment step, a buffer store, one minibatch
/// TD regression and one optimizer update. Fully seeded.
TrainResult train(MicrogridEnv& env, const AgentConfig& cfg);

void write_training_log_csv(const std::vector<EpisodeLog>& log,
                            const std::string& path);

struct InferResult {
  std::vector<int> actions;
  LpStatus status = LpStatus::Infeasible;
  Vector epsilon;
  double objective = 0.0;
  double forward_time_s = 0.0;
  double lp_time_s = 0.0;
  double wall_time_s() const { return forward_time_s + lp_time_s; }
};

/// Online inference: greedy rollout, then the fixed-binary LP. No
/// exception escapes for infeasible suggestions; the status reports them.
InferResult infer(const QNetwork& net, const MicrogridEnv& env,
                  const AugmentedState& chi);

}  // namespace rlmpc::agent
