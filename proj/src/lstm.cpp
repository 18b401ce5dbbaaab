#include "rlmpc/lstm.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "rlmpc/json_io.hpp"

namespace rlmpc::neural {

namespace {

Matrix sigmoid(const Matrix& m) {
  return ((-m.array()).exp() + 1.0).inverse().matrix();
}

void init_gate(LstmGate& g, Index hidden, Index input, std::mt19937_64& rng,
               double forget_bias) {
  const auto fill = [&rng](Matrix& m, double bound) {
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j) m(i, j) = u(rng);
  };
  g.wx.resize(hidden, input);
  fill(g.wx, 1.0 / std::sqrt(static_cast<double>(input)));
  g.wh.resize(hidden, hidden);
  fill(g.wh, 1.0 / std::sqrt(static_cast<double>(hidden)));
  g.b = Vector::Constant(hidden, forget_bias);
}

}  // namespace

QNetwork init_qnetwork(const InputSpec& spec, Index hidden_size,
                       std::uint64_t seed) {
  if (spec.num_actions != (1 << spec.sub_action_bits))
    throw std::invalid_argument("init_qnetwork: num_actions != 2^bits");
  std::mt19937_64 rng(seed);
  QNetwork net;
  net.spec = spec;
  net.lstm.input_size = spec.feature_size();
  net.lstm.hidden_size = hidden_size;
  init_gate(net.lstm.input_gate, hidden_size, net.lstm.input_size, rng, 0.0);
  init_gate(net.lstm.forget_gate, hidden_size, net.lstm.input_size, rng, 1.0);
  init_gate(net.lstm.cell_gate, hidden_size, net.lstm.input_size, rng, 0.0);
  init_gate(net.lstm.output_gate, hidden_size, net.lstm.input_size, rng, 0.0);
  std::uniform_real_distribution<double> u(-1.0 / std::sqrt(static_cast<double>(hidden_size)),
                                           1.0 / std::sqrt(static_cast<double>(hidden_size)));
  net.head.w.resize(spec.num_actions, hidden_size);
  for (Index i = 0; i < net.head.w.rows(); ++i)
    for (Index j = 0; j < net.head.w.cols(); ++j) net.head.w(i, j) = u(rng);
  net.head.b = Vector::Zero(spec.num_actions);
  net.feat_lo = Vector::Zero(spec.state_size + spec.gamma_per_step);
  net.feat_hi = Vector::Ones(spec.state_size + spec.gamma_per_step);
  return net;
}

namespace {

template <typename Net, typename MapType>
std::vector<MapType> views_impl(Net& n) {
  std::vector<MapType> out;
  out.reserve(14);
  const auto add_mat = [&out](auto& m) {
    out.push_back(MapType(m.data(), m.size()));
  };
  for (auto* gate : {&n.lstm.input_gate, &n.lstm.forget_gate, &n.lstm.cell_gate,
                     &n.lstm.output_gate}) {
    add_mat(gate->wx);
    add_mat(gate->wh);
    add_mat(gate->b);
  }
  add_mat(n.head.w);
  add_mat(n.head.b);
  return out;
}

}  // namespace

std::vector<Eigen::Map<Vector>> tensor_views(QNetwork& net) {
  return views_impl<QNetwork, Eigen::Map<Vector>>(net);
}
std::vector<Eigen::Map<const Vector>> tensor_views(const QNetwork& net) {
  return views_impl<const QNetwork, Eigen::Map<const Vector>>(net);
}
std::vector<Eigen::Map<Vector>> tensor_views(Gradients& g) {
  return views_impl<Gradients, Eigen::Map<Vector>>(g);
}
std::vector<Eigen::Map<const Vector>> tensor_views(const Gradients& g) {
  return views_impl<const Gradients, Eigen::Map<const Vector>>(g);
}

Gradients zero_gradients(const QNetwork& net) {
  Gradients g;
  g.lstm.input_size = net.lstm.input_size;
  g.lstm.hidden_size = net.lstm.hidden_size;
  const auto zero_gate = [&](LstmGate& dst, const LstmGate& src) {
    dst.wx = Matrix::Zero(src.wx.rows(), src.wx.cols());
    dst.wh = Matrix::Zero(src.wh.rows(), src.wh.cols());
    dst.b = Vector::Zero(src.b.size());
  };
  zero_gate(g.lstm.input_gate, net.lstm.input_gate);
  zero_gate(g.lstm.forget_gate, net.lstm.forget_gate);
  zero_gate(g.lstm.cell_gate, net.lstm.cell_gate);
  zero_gate(g.lstm.output_gate, net.lstm.output_gate);
  g.head.w = Matrix::Zero(net.head.w.rows(), net.head.w.cols());
  g.head.b = Vector::Zero(net.head.b.size());
  return g;
}

ForwardResult forward_batch(const QNetwork& net, const std::vector<Matrix>& inputs) {
  const Index hidden = net.lstm.hidden_size;
  const Index steps = static_cast<Index>(inputs.size());
  if (steps == 0) throw std::invalid_argument("forward_batch: no inputs");
  const Index batch = inputs[0].cols();

  ForwardResult out;
  auto& tr = out.trace;
  tr.x = inputs;
  tr.i.reserve(steps);

  Matrix h = Matrix::Zero(hidden, batch);
  Matrix c = Matrix::Zero(hidden, batch);
  for (Index l = 0; l < steps; ++l) {
    const Matrix& x = inputs[static_cast<size_t>(l)];
    if (x.rows() != net.lstm.input_size || x.cols() != batch)
      throw std::invalid_argument("forward_batch: input shape mismatch");
    const Matrix i = sigmoid((net.lstm.input_gate.wx * x + net.lstm.input_gate.wh * h).colwise() +
                             net.lstm.input_gate.b);
    const Matrix f = sigmoid((net.lstm.forget_gate.wx * x + net.lstm.forget_gate.wh * h).colwise() +
                             net.lstm.forget_gate.b);
    const Matrix g = ((net.lstm.cell_gate.wx * x + net.lstm.cell_gate.wh * h).colwise() +
                      net.lstm.cell_gate.b)
                         .array()
                         .tanh()
                         .matrix();
    const Matrix o = sigmoid((net.lstm.output_gate.wx * x + net.lstm.output_gate.wh * h).colwise() +
                             net.lstm.output_gate.b);
    c = (f.array() * c.array() + i.array() * g.array()).matrix();
    const Matrix tc = c.array().tanh().matrix();
    h = (o.array() * tc.array()).matrix();
    tr.i.push_back(i);
    tr.f.push_back(f);
    tr.g.push_back(g);
    tr.o.push_back(o);
    tr.c.push_back(c);
    tr.tanh_c.push_back(tc);
    tr.h.push_back(h);
    out.q.push_back((net.head.w * h).colwise() + net.head.b);
  }
  return out;
}

ForwardSingle forward_unrolled(const QNetwork& net, const std::vector<Vector>& inputs) {
  std::vector<Matrix> batched;
  batched.reserve(inputs.size());
  for (const Vector& v : inputs) batched.push_back(v);
  ForwardResult r = forward_batch(net, batched);
  ForwardSingle out;
  out.q.resize(static_cast<Index>(inputs.size()), net.spec.num_actions);
  for (size_t l = 0; l < r.q.size(); ++l)
    out.q.row(static_cast<Index>(l)) = r.q[l].col(0).transpose();
  out.trace = std::move(r.trace);
  return out;
}

Gradients backward_batch(const QNetwork& net, const ForwardTrace& trace,
                         const std::vector<Matrix>& dq) {
  const Index hidden = net.lstm.hidden_size;
  const Index steps = static_cast<Index>(trace.h.size());
  if (static_cast<Index>(dq.size()) != steps)
    throw std::invalid_argument("backward_batch: dq length mismatch");
  const Index batch = trace.h[0].cols();

  Gradients grad = zero_gradients(net);
  Matrix dh_carry = Matrix::Zero(hidden, batch);
  Matrix dc = Matrix::Zero(hidden, batch);

  for (Index l = steps - 1; l >= 0; --l) {
    const size_t sl = static_cast<size_t>(l);
    const Matrix& dql = dq[sl];
    grad.head.w.noalias() += dql * trace.h[sl].transpose();
    grad.head.b += dql.rowwise().sum();

    Matrix dh = net.head.w.transpose() * dql + dh_carry;
    const Matrix& i = trace.i[sl];
    const Matrix& f = trace.f[sl];
    const Matrix& g = trace.g[sl];
    const Matrix& o = trace.o[sl];
    const Matrix& tc = trace.tanh_c[sl];
    const Matrix c_prev = l > 0 ? trace.c[sl - 1] : Matrix::Zero(hidden, batch);
    const Matrix h_prev = l > 0 ? trace.h[sl - 1] : Matrix::Zero(hidden, batch);

    const Matrix d_o = (dh.array() * tc.array()).matrix();
    dc += (dh.array() * o.array() * (1.0 - tc.array().square())).matrix();
    const Matrix d_i = (dc.array() * g.array()).matrix();
    const Matrix d_g = (dc.array() * i.array()).matrix();
    const Matrix d_f = (dc.array() * c_prev.array()).matrix();

    const Matrix da_i = (d_i.array() * i.array() * (1.0 - i.array())).matrix();
    const Matrix da_f = (d_f.array() * f.array() * (1.0 - f.array())).matrix();
    const Matrix da_g = (d_g.array() * (1.0 - g.array().square())).matrix();
    const Matrix da_o = (d_o.array() * o.array() * (1.0 - o.array())).matrix();

    const Matrix& x = trace.x[sl];
    grad.lstm.input_gate.wx.noalias() += da_i * x.transpose();
    grad.lstm.forget_gate.wx.noalias() += da_f * x.transpose();
    grad.lstm.cell_gate.wx.noalias() += da_g * x.transpose();
    grad.lstm.output_gate.wx.noalias() += da_o * x.transpose();
    grad.lstm.input_gate.wh.noalias() += da_i * h_prev.transpose();
    grad.lstm.forget_gate.wh.noalias() += da_f * h_prev.transpose();
    grad.lstm.cell_gate.wh.noalias() += da_g * h_prev.transpose();
    grad.lstm.output_gate.wh.noalias() += da_o * h_prev.transpose();
    grad.lstm.input_gate.b += da_i.rowwise().sum();
    grad.lstm.forget_gate.b += da_f.rowwise().sum();
    grad.lstm.cell_gate.b += da_g.rowwise().sum();
    grad.lstm.output_gate.b += da_o.rowwise().sum();

    dh_carry = net.lstm.input_gate.wh.transpose() * da_i +
               net.lstm.forget_gate.wh.transpose() * da_f +
               net.lstm.cell_gate.wh.transpose() * da_g +
               net.lstm.output_gate.wh.transpose() * da_o;
    dc = (dc.array() * f.array()).matrix();
  }
  return grad;
}

LstmState initial_state(const QNetwork& net) {
  return {Vector::Zero(net.lstm.hidden_size), Vector::Zero(net.lstm.hidden_size)};
}

Vector cell_step(const QNetwork& net, const Vector& x, LstmState& state) {
  const auto act = [&](const LstmGate& gate) {
    return (gate.wx * x + gate.wh * state.h + gate.b).eval();
  };
  const Vector i = sigmoid(act(net.lstm.input_gate));
  const Vector f = sigmoid(act(net.lstm.forget_gate));
  const Vector g = act(net.lstm.cell_gate).array().tanh().matrix();
  const Vector o = sigmoid(act(net.lstm.output_gate));
  state.c = (f.array() * state.c.array() + i.array() * g.array()).matrix();
  state.h = (o.array() * state.c.array().tanh()).matrix();
  return net.head.w * state.h + net.head.b;
}

LstmStateBatch initial_state_batch(const QNetwork& net, Index batch) {
  return {Matrix::Zero(net.lstm.hidden_size, batch),
          Matrix::Zero(net.lstm.hidden_size, batch)};
}

Matrix cell_step_batch(const QNetwork& net, const Matrix& x, LstmStateBatch& state) {
  const auto act = [&](const LstmGate& gate) {
    return ((gate.wx * x + gate.wh * state.h).colwise() + gate.b).eval();
  };
  const Matrix i = sigmoid(act(net.lstm.input_gate));
  const Matrix f = sigmoid(act(net.lstm.forget_gate));
  const Matrix g = act(net.lstm.cell_gate).array().tanh().matrix();
  const Matrix o = sigmoid(act(net.lstm.output_gate));
  state.c = (f.array() * state.c.array() + i.array() * g.array()).matrix();
  state.h = (o.array() * state.c.array().tanh()).matrix();
  return (net.head.w * state.h).colwise() + net.head.b;
}

bool optimizer_step(AdamState& state, std::vector<Eigen::Map<Vector>> params,
                    const std::vector<Eigen::Map<const Vector>>& grads) {
  if (params.size() != grads.size())
    throw std::invalid_argument("optimizer_step: tensor count mismatch");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.push_back(Vector::Zero(p.size()));
      state.v.push_back(Vector::Zero(p.size()));
    }
  }
  double sq_norm = 0.0;
  bool finite = true;
  for (const auto& g : grads) {
    const double s = g.squaredNorm();
    if (!std::isfinite(s)) finite = false;
    sq_norm += s;
  }
  if (!finite || !std::isfinite(sq_norm)) {
    state.last_step_skipped = true;
    return false;
  }
  state.last_step_skipped = false;
  const double norm = std::sqrt(sq_norm);
  const double scale = (state.cfg.clip_norm > 0.0 && norm > state.cfg.clip_norm)
                           ? state.cfg.clip_norm / norm
                           : 1.0;
  ++state.t;
  const double bc1 = 1.0 - std::pow(state.cfg.beta1, state.t);
  const double bc2 = 1.0 - std::pow(state.cfg.beta2, state.t);
  for (size_t k = 0; k < params.size(); ++k) {
    Vector& m = state.m[k];
    Vector& v = state.v[k];
    if (m.size() != params[k].size())
      throw std::invalid_argument("optimizer_step: tensor shape changed");
    const auto g = (grads[k] * scale).eval();
    m = state.cfg.beta1 * m + (1.0 - state.cfg.beta1) * g;
    v = state.cfg.beta2 * v.array().matrix() +
        (1.0 - state.cfg.beta2) * g.array().square().matrix();
    const auto m_hat = (m / bc1).eval();
    const auto v_hat = (v / bc2).eval();
    params[k] -= (state.cfg.lr * m_hat.array() /
                  (v_hat.array().sqrt() + state.cfg.eps))
                     .matrix();
  }
  return true;
}

Vector softmax(const Vector& v, double xi) {
  if (!all_finite(v)) throw std::invalid_argument("softmax: non-finite input");
  Vector scaled = xi * v;
  scaled.array() -= scaled.maxCoeff();
  Vector e = scaled.array().exp().matrix();
  return e / e.sum();
}

namespace {

using nlohmann::json;
using json_io::matrix_from_json;
using json_io::matrix_to_json;
using json_io::vector_from_json;
using json_io::vector_to_json;

constexpr int kFormatVersion = 1;
constexpr const char* kSubActionOrder = "lexicographic_msb_first";

json gate_to_json(const LstmGate& g) {
  return {{"wx", matrix_to_json(g.wx)},
          {"wh", matrix_to_json(g.wh)},
          {"b", vector_to_json(g.b)}};
}

LstmGate gate_from_json(const json& j, const std::string& name) {
  LstmGate g;
  g.wx = matrix_from_json(j.at("wx"), name + ".wx");
  g.wh = matrix_from_json(j.at("wh"), name + ".wh");
  g.b = vector_from_json(j.at("b"), name + ".b");
  return g;
}

}  // namespace

void save_qnetwork(const QNetwork& net, const std::string& path) {
  json j;
  j["format_version"] = kFormatVersion;
  j["objective"] = net.objective;
  j["hidden_size"] = net.lstm.hidden_size;
  j["input_size"] = net.lstm.input_size;
  j["output_size"] = net.head.b.size();
  j["input_spec"] = {{"n_p", net.spec.n_p},
                     {"state_size", net.spec.state_size},
                     {"gamma_per_step", net.spec.gamma_per_step},
                     {"num_actions", net.spec.num_actions},
                     {"sub_action_bits", net.spec.sub_action_bits},
                     {"sub_action_order", kSubActionOrder},
                     {"features", "x_norm,gamma_norm,prev_action_onehot,horizon_progress"}};
  j["feat_lo"] = vector_to_json(net.feat_lo);
  j["feat_hi"] = vector_to_json(net.feat_hi);
  j["reward_cost_lo"] = net.reward_cost_lo;
  j["reward_cost_hi"] = net.reward_cost_hi;
  j["weights"] = {{"lstm",
                   {{"input_gate", gate_to_json(net.lstm.input_gate)},
                    {"forget_gate", gate_to_json(net.lstm.forget_gate)},
                    {"cell_gate", gate_to_json(net.lstm.cell_gate)},
                    {"output_gate", gate_to_json(net.lstm.output_gate)}}},
                  {"head",
                   {{"w", matrix_to_json(net.head.w)},
                    {"b", vector_to_json(net.head.b)}}}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << j.dump() << "\n";
}

QNetwork load_qnetwork(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  in >> j;
  if (j.at("format_version").get<int>() != kFormatVersion)
    throw std::runtime_error("model artifact: unsupported format version");
  QNetwork net;
  net.objective = j.at("objective").get<std::string>();
  const json& spec = j.at("input_spec");
  net.spec.n_p = spec.at("n_p").get<int>();
  net.spec.state_size = spec.at("state_size").get<int>();
  net.spec.gamma_per_step = spec.at("gamma_per_step").get<int>();
  net.spec.num_actions = spec.at("num_actions").get<int>();
  net.spec.sub_action_bits = spec.at("sub_action_bits").get<int>();
  if (spec.at("sub_action_order").get<std::string>() != kSubActionOrder)
    throw std::runtime_error("model artifact: unknown sub-action ordering");
  if (net.spec.num_actions != (1 << net.spec.sub_action_bits))
    throw std::runtime_error("model artifact: num_actions != 2^sub_action_bits");

  net.lstm.input_size = j.at("input_size").get<Index>();
  net.lstm.hidden_size = j.at("hidden_size").get<Index>();
  if (net.lstm.input_size != net.spec.feature_size())
    throw std::runtime_error("model artifact: input size disagrees with spec");

  const json& w = j.at("weights");
  net.lstm.input_gate = gate_from_json(w.at("lstm").at("input_gate"), "input_gate");
  net.lstm.forget_gate = gate_from_json(w.at("lstm").at("forget_gate"), "forget_gate");
  net.lstm.cell_gate = gate_from_json(w.at("lstm").at("cell_gate"), "cell_gate");
  net.lstm.output_gate = gate_from_json(w.at("lstm").at("output_gate"), "output_gate");
  net.head.w = matrix_from_json(w.at("head").at("w"), "head.w");
  net.head.b = vector_from_json(w.at("head").at("b"), "head.b");

  const Index hidden = net.lstm.hidden_size;
  const Index input = net.lstm.input_size;
  const auto check_gate = [&](const LstmGate& g, const char* name) {
    if (g.wx.rows() != hidden || g.wx.cols() != input || g.wh.rows() != hidden ||
        g.wh.cols() != hidden || g.b.size() != hidden)
      throw std::runtime_error(std::string("model artifact: bad shape in ") + name);
  };
  check_gate(net.lstm.input_gate, "input_gate");
  check_gate(net.lstm.forget_gate, "forget_gate");
  check_gate(net.lstm.cell_gate, "cell_gate");
  check_gate(net.lstm.output_gate, "output_gate");
  if (net.head.w.rows() != net.spec.num_actions || net.head.w.cols() != hidden ||
      net.head.b.size() != net.spec.num_actions)
    throw std::runtime_error("model artifact: bad head shape");

  net.feat_lo = vector_from_json(j.at("feat_lo"), "feat_lo");
  net.feat_hi = vector_from_json(j.at("feat_hi"), "feat_hi");
  if (net.feat_lo.size() != net.spec.state_size + net.spec.gamma_per_step ||
      net.feat_hi.size() != net.feat_lo.size())
    throw std::runtime_error("model artifact: bad normalization length");
  net.reward_cost_lo = j.at("reward_cost_lo").get<double>();
  net.reward_cost_hi = j.at("reward_cost_hi").get<double>();
  return net;
}

}  // namespace rlmpc::neural
