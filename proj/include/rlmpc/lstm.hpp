#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rlmpc/types.hpp"

namespace rlmpc::neural {

struct LstmGate {
  Matrix wx;  ///< hidden x input
  Matrix wh;  ///< hidden x hidden
  Vector b;   ///< hidden
};

struct LstmWeights {
  Index input_size = 0;
  Index hidden_size = 0;
  LstmGate input_gate, forget_gate, cell_gate, output_gate;
};

struct DenseLayer {
  Matrix w;  ///< outputs x hidden
  Vector b;  ///< outputs
};

/// How per-step feature vectors are assembled from an augmented state:
/// [normalized x; normalized gamma slice; one-hot of the previous sub-action
/// (zeros at l = 0); l / N_p]. Stored in the model artifact and validated
/// on load.
struct InputSpec {
  int n_p = 1;
  int state_size = 1;
  int gamma_per_step = 5;
  int num_actions = 32;
  int sub_action_bits = 5;

  Index feature_size() const {
    return state_size + gamma_per_step + num_actions + 1;
  }
};

/// The recurrent value network: one LSTM layer unrolled over the horizon,
/// all steps sharing one dense head. Also reused as the classifier of the
/// supervised baseline (the `objective` tag tells the artifacts apart).
struct QNetwork {
  LstmWeights lstm;
  DenseLayer head;
  InputSpec spec;
  std::string objective = "q";  ///< "q" or "classifier"
  Vector feat_lo, feat_hi;      ///< normalization for [x; gamma_l]
  double reward_cost_lo = 0.0;  ///< stage-cost scale frozen at training time
  double reward_cost_hi = 1.0;
};

/// Uniform init in +-1/sqrt(fan-in); forget-gate bias starts at +1.
QNetwork init_qnetwork(const InputSpec& spec, Index hidden_size,
                       std::uint64_t seed);

/// Mutable views over the 14 parameter tensors, in a fixed order shared
/// with gradients and optimizer state.
std::vector<Eigen::Map<Vector>> tensor_views(QNetwork& net);
std::vector<Eigen::Map<const Vector>> tensor_views(const QNetwork& net);

struct Gradients {
  LstmWeights lstm;
  DenseLayer head;
};

Gradients zero_gradients(const QNetwork& net);
std::vector<Eigen::Map<Vector>> tensor_views(Gradients& g);
std::vector<Eigen::Map<const Vector>> tensor_views(const Gradients& g);

/// Everything the backward pass needs, kept per unroll step. Batched:
/// inputs are input_size x batch, activations hidden_size x batch.
struct ForwardTrace {
  std::vector<Matrix> x, i, f, g, o, c, tanh_c, h;
};

struct ForwardResult {
  std::vector<Matrix> q;  ///< per step: num_actions x batch
  ForwardTrace trace;
};

/// Unrolls the LSTM over inputs[0..n_p-1] from a zero initial state;
/// q[l] = head(h_l).
ForwardResult forward_batch(const QNetwork& net, const std::vector<Matrix>& inputs);

/// Single-sequence convenience wrapper; q(l, a) over the unroll.
struct ForwardSingle {
  Matrix q;  ///< n_p x num_actions
  ForwardTrace trace;
};
ForwardSingle forward_unrolled(const QNetwork& net, const std::vector<Vector>& inputs);

/// Exact backpropagation through time. dq[l] (num_actions x batch) is the
/// upstream gradient on q[l]; returns gradients for every parameter tensor.
Gradients backward_batch(const QNetwork& net, const ForwardTrace& trace,
                         const std::vector<Matrix>& dq);

/// Incremental cell for autoregressive rollouts.
struct LstmState {
  Vector h, c;
};
LstmState initial_state(const QNetwork& net);
/// Advances the state by one input and returns head(h).
Vector cell_step(const QNetwork& net, const Vector& x, LstmState& state);
/// Batched flavor: x is input_size x batch, state holds hidden x batch.
struct LstmStateBatch {
  Matrix h, c;
};
LstmStateBatch initial_state_batch(const QNetwork& net, Index batch);
Matrix cell_step_batch(const QNetwork& net, const Matrix& x, LstmStateBatch& state);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 5.0;  ///< global gradient norm; <= 0 disables clipping
};

struct AdamState {
  AdamConfig cfg;
  long t = 0;
  bool last_step_skipped = false;
  std::vector<Vector> m, v;  ///< lazily sized to the parameter tensors
};

/// One adaptive-moment update with bias correction after clipping the
/// global gradient norm. A non-finite gradient skips the step, flags
/// last_step_skipped, and returns false.
bool optimizer_step(AdamState& state, std::vector<Eigen::Map<Vector>> params,
                    const std::vector<Eigen::Map<const Vector>>& grads);

/// Probabilities proportional to exp(xi * v), stabilized by max
/// subtraction; xi = 0 gives the uniform distribution.
Vector softmax(const Vector& v, double xi);

/// Versioned JSON artifact: shapes, weights, normalization constants,
/// input layout, and the sub-action ordering tag. Loading validates all
/// of them.
void save_qnetwork(const QNetwork& net, const std::string& path);
QNetwork load_qnetwork(const std::string& path);

}  // namespace rlmpc::neural
