#include "rlmpc/agent.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace rlmpc::agent {

using microgrid::kGammaPerStep;

ReplayBuffer::ReplayBuffer(std::size_t capacity) {
  if (capacity == 0) throw std::invalid_argument("replay buffer: zero capacity");
  ring_.reserve(capacity);
  ring_.resize(capacity);
}

void ReplayBuffer::push(Transition t) {
  ring_[next_] = std::move(t);
  next_ = (next_ + 1) % ring_.size();
  if (next_ == 0) full_ = true;
}

const Transition& ReplayBuffer::oldest(std::size_t i) const {
  if (i >= size()) throw std::out_of_range("replay buffer: index");
  const std::size_t base = full_ ? next_ : 0;
  return ring_[(base + i) % ring_.size()];
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t n,
                                                    std::mt19937_64& rng) const {
  if (size() == 0) throw std::logic_error("replay buffer: empty");
  std::uniform_int_distribution<std::size_t> pick(0, size() - 1);
  std::vector<const Transition*> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(&oldest(pick(rng)));
  return out;
}

Vector build_step_input(const QNetwork& net, const AugmentedState& chi, int l,
                        int prev_action) {
  const neural::InputSpec& spec = net.spec;
  Vector x(net.lstm.input_size);
  x.setZero();
  Index at = 0;
  const auto normalized = [&](double v, Index feature) {
    const double lo = net.feat_lo[feature];
    const double hi = net.feat_hi[feature];
    return hi > lo ? (v - lo) / (hi - lo) : 0.5;
  };
  for (int i = 0; i < spec.state_size; ++i, ++at)
    x[at] = normalized(chi.x[i], at);
  const Index gamma0 = static_cast<Index>(l) * spec.gamma_per_step;
  for (int i = 0; i < spec.gamma_per_step; ++i, ++at)
    x[at] = normalized(chi.gamma[gamma0 + i], at);
  if (prev_action >= 0) {
    if (prev_action >= spec.num_actions)
      throw std::invalid_argument("build_step_input: action index out of range");
    x[at + prev_action] = 1.0;
  }
  at += spec.num_actions;
  x[at] = static_cast<double>(l) / spec.n_p;
  return x;
}

void fit_normalization(QNetwork& net, const microgrid::MicrogridParams& params,
                       const profiles::SeriesBundle& train) {
  net.feat_lo.resize(net.spec.state_size + net.spec.gamma_per_step);
  net.feat_hi.resize(net.feat_lo.size());
  net.feat_lo[0] = params.x_b_min;
  net.feat_hi[0] = params.x_b_max;
  const Vector* series[kGammaPerStep] = {&train.price_buy.values,
                                         &train.price_sell.values,
                                         &train.price_prod.values,
                                         &train.res.values, &train.load.values};
  for (int i = 0; i < kGammaPerStep; ++i) {
    net.feat_lo[1 + i] = series[i]->minCoeff();
    net.feat_hi[1 + i] = series[i]->maxCoeff();
  }
}

namespace {

// One autoregressive pass with a caller-supplied selection rule.
template <typename Select>
Rollout rollout_impl(const QNetwork& net, const AugmentedState& chi,
                     Select select) {
  const int n_p = net.spec.n_p;
  Rollout out;
  out.q.resize(n_p, net.spec.num_actions);
  out.actions.reserve(static_cast<size_t>(n_p));
  neural::LstmState state = neural::initial_state(net);
  int prev = -1;
  for (int l = 0; l < n_p; ++l) {
    const Vector x = build_step_input(net, chi, l, prev);
    const Vector q = neural::cell_step(net, x, state);
    out.q.row(l) = q.transpose();
    const int a = select(q);
    out.actions.push_back(a);
    prev = a;
  }
  return out;
}

int argmax_lowest(const Vector& q) {
  Index best;
  q.maxCoeff(&best);
  return static_cast<int>(best);
}

}  // namespace

Rollout rollout_greedy(const QNetwork& net, const AugmentedState& chi) {
  return rollout_impl(net, chi, argmax_lowest);
}

Rollout rollout_boltzmann(const QNetwork& net, const AugmentedState& chi,
                          double xi, std::mt19937_64& rng) {
  return rollout_impl(net, chi, [&](const Vector& q) {
    const Vector p = neural::softmax(q, xi);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = unit(rng);
    double acc = 0.0;
    for (Index a = 0; a < p.size(); ++a) {
      acc += p[a];
      if (u <= acc) return static_cast<int>(a);
    }
    return static_cast<int>(p.size() - 1);
  });
}

Matrix greedy_max_q(const QNetwork& net,
                    const std::vector<const AugmentedState*>& states) {
  const Index batch = static_cast<Index>(states.size());
  const int n_p = net.spec.n_p;
  Matrix out(batch, n_p);
  if (batch == 0) return out;
  neural::LstmStateBatch state = neural::initial_state_batch(net, batch);
  std::vector<int> prev(static_cast<size_t>(batch), -1);
  Matrix x(net.lstm.input_size, batch);
  for (int l = 0; l < n_p; ++l) {
    for (Index j = 0; j < batch; ++j)
      x.col(j) = build_step_input(net, *states[static_cast<size_t>(j)], l,
                                  prev[static_cast<size_t>(j)]);
    const Matrix q = neural::cell_step_batch(net, x, state);
    for (Index j = 0; j < batch; ++j) {
      Index best;
      out(j, l) = q.col(j).maxCoeff(&best);
      prev[static_cast<size_t>(j)] = static_cast<int>(best);
    }
  }
  return out;
}

double f_reward(double stage_cost, double cost_lo, double cost_hi) {
  if (!(cost_hi > cost_lo)) return 0.0;
  return std::clamp((cost_hi - stage_cost) / (cost_hi - cost_lo), 0.0, 1.0);
}

MicrogridEnv::MicrogridEnv(const microgrid::MicrogridParams& params, int n_p,
                           profiles::SeriesBundle data, EnvConfig cfg)
    : params_(params),
      problem_(microgrid::build_mpc_problem(params, n_p)),
      data_(std::move(data)),
      cfg_(cfg),
      sub_actions_(microgrid::sub_action_space(params)) {
  data_.validate();
  if (data_.size() < n_p + cfg_.n_steps + 1)
    throw std::invalid_argument("environment: series shorter than an episode");
  x_ = Vector::Constant(1, 0.5 * (params.x_b_min + params.x_b_max));
  chi_ = make_state(0, x_[0]);
}

AugmentedState MicrogridEnv::make_state(Index k, double x_b) const {
  AugmentedState chi;
  chi.x = Vector::Constant(1, x_b);
  chi.gamma = data_.window(k, n_p());
  return chi;
}

AugmentedState MicrogridEnv::sample_state(std::mt19937_64& rng,
                                          bool room_for_episode) const {
  const Index margin = n_p() + (room_for_episode ? cfg_.n_steps : 0);
  if (data_.size() <= margin)
    throw std::invalid_argument("environment: series too short to sample");
  std::uniform_int_distribution<Index> pick_k(0, data_.size() - margin - 1);
  std::uniform_real_distribution<double> pick_x(params_.x_b_min, params_.x_b_max);
  return make_state(pick_k(rng), pick_x(rng));
}

void MicrogridEnv::set_reward_scale(double cost_lo, double cost_hi) {
  if (!(cost_hi > cost_lo))
    throw std::invalid_argument("reward scale: need cost_lo < cost_hi");
  cost_lo_ = cost_lo;
  cost_hi_ = cost_hi;
}

void MicrogridEnv::calibrate_reward(int target_samples, std::mt19937_64& rng) {
  std::vector<double> costs;
  costs.reserve(static_cast<size_t>(target_samples));
  std::uniform_int_distribution<int> pick_action(0, num_actions() - 1);
  const Index save_k = k_;
  const Vector save_x = x_;
  const int save_steps = steps_taken_;
  int attempts = 0;
  const int max_attempts = 50 * target_samples;
  while (static_cast<int>(costs.size()) < target_samples &&
         attempts < max_attempts) {
    reset(rng);
    for (int s = 0; s < cfg_.n_steps; ++s) {
      ++attempts;
      std::vector<int> actions(static_cast<size_t>(n_p()));
      for (auto& a : actions) a = pick_action(rng);
      const StepResult r = step(actions);
      if (r.lp_status == LpStatus::Optimal) costs.push_back(r.stage_cost);
      if (r.terminal || static_cast<int>(costs.size()) >= target_samples) break;
    }
  }
  if (costs.size() < 2)
    throw std::runtime_error("reward calibration: no feasible random steps");
  std::sort(costs.begin(), costs.end());
  const auto pct = [&](double q) {
    const double pos = q * static_cast<double>(costs.size() - 1);
    return costs[static_cast<size_t>(std::llround(pos))];
  };
  set_reward_scale(pct(0.01), pct(0.99));
  k_ = save_k;
  x_ = save_x;
  steps_taken_ = save_steps;
  chi_ = make_state(k_, x_[0]);
}

AugmentedState MicrogridEnv::reset(std::mt19937_64& rng) {
  const Index margin = n_p() + cfg_.n_steps;
  if (data_.size() <= margin)
    throw std::invalid_argument("environment: series too short for an episode");
  std::uniform_int_distribution<Index> pick_k(0, data_.size() - margin - 1);
  std::uniform_real_distribution<double> pick_x(params_.x_b_min, params_.x_b_max);
  const Index k = pick_k(rng);
  return reset_at(k, pick_x(rng));
}

AugmentedState MicrogridEnv::reset_at(Index k, double x_b) {
  k_ = k;
  x_ = Vector::Constant(1, x_b);
  steps_taken_ = 0;
  chi_ = make_state(k_, x_b);
  return chi_;
}

Vector MicrogridEnv::actions_to_eps_d(const std::vector<int>& actions) const {
  if (static_cast<int>(actions.size()) != n_p())
    throw std::invalid_argument("actions_to_eps_d: length mismatch");
  const int dps = problem_.layout.disc_per_step();
  Vector eps_d(problem_.layout.num_disc());
  for (int l = 0; l < n_p(); ++l) {
    const int a = actions[static_cast<size_t>(l)];
    if (a < 0 || a >= num_actions())
      throw std::invalid_argument("actions_to_eps_d: index out of range");
    eps_d.segment(static_cast<Index>(l) * dps, dps) =
        sub_actions_[static_cast<size_t>(a)];
  }
  return eps_d;
}

MicrogridEnv::SolveResult MicrogridEnv::solve_fixed(
    const AugmentedState& chi, const std::vector<int>& actions) const {
  const auto t0 = std::chrono::steady_clock::now();
  const Vector eps_d = actions_to_eps_d(actions);
  const CompactMilp milp = build_milp(problem_, chi);
  const FixedLp fixed = fix_binaries(milp, eps_d);
  const LpSolution lp = solve_lp(fixed.lp);
  SolveResult out;
  out.status = lp.status;
  if (lp.status == LpStatus::Optimal) {
    out.epsilon = assemble_full_primal(milp, fixed, lp.primal, eps_d);
    out.objective = lp.objective + fixed.objective_offset;
  }
  out.lp_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

MilpSolution MicrogridEnv::solve_exact(const AugmentedState& chi,
                                       const BnbConfig& bnb) const {
  return solve_milp(build_milp(problem_, chi), bnb);
}

MicrogridEnv::StepResult MicrogridEnv::step(const std::vector<int>& actions) {
  StepResult out;
  const SolveResult solved = solve_fixed(chi_, actions);
  out.lp_status = solved.status;
  out.lp_time_s = solved.lp_time_s;
  if (solved.status == LpStatus::Unbounded ||
      solved.status == LpStatus::IterationLimit) {
    out.diagnostic_failure = true;
    out.terminal = true;
    out.next_chi = chi_;
    return out;
  }
  if (solved.status == LpStatus::Infeasible) {
    out.reward = cfg_.r_inf;
    out.terminal = true;
    out.next_chi = chi_;
    return out;
  }
  out.epsilon = solved.epsilon;
  const StepDecision first = extract_first_input(solved.epsilon, problem_.layout);
  const Vector gamma_0 = problem_.layout.gamma_step(chi_.gamma, 0);
  const Vector slice = problem_.stage_cost(gamma_0);
  Vector first_full(problem_.layout.cont_per_step() + problem_.layout.disc_per_step());
  first_full << first.u_c, first.z, first.u_d, first.delta;
  out.stage_cost = slice.dot(first_full);
  out.reward = f_reward(out.stage_cost, cost_lo_, cost_hi_);

  x_ = rlmpc::step(problem_.system, x_, to_mld_step(first));
  ++k_;
  ++steps_taken_;
  chi_ = make_state(k_, x_[0]);
  out.next_chi = chi_;
  out.terminal = steps_taken_ >= cfg_.n_steps;
  return out;
}

Matrix td_targets(const QNetwork& net, const std::vector<const Transition*>& batch,
                  double alpha) {
  const Index b = static_cast<Index>(batch.size());
  if (b == 0) throw std::invalid_argument("td_targets: empty batch");
  const int n_p = net.spec.n_p;
  Matrix y(b, n_p);
  std::vector<const AugmentedState*> next_states;
  std::vector<Index> rows;
  for (Index j = 0; j < b; ++j) {
    const Transition& t = *batch[static_cast<size_t>(j)];
    if (t.terminal) {
      y.row(j).setConstant(t.reward);
    } else {
      next_states.push_back(&t.next_chi);
      rows.push_back(j);
    }
  }
  if (!next_states.empty()) {
    const Matrix max_q = greedy_max_q(net, next_states);
    for (size_t i = 0; i < rows.size(); ++i) {
      const Transition& t = *batch[static_cast<size_t>(rows[i])];
      y.row(rows[i]) =
          (alpha * max_q.row(static_cast<Index>(i))).array() + t.reward;
    }
  }
  return y;
}

double xi_schedule(const AgentConfig& cfg, int episode) {
  const double warm = cfg.xi_warm_frac * cfg.episodes;
  if (warm <= 0.0) return cfg.xi_max;
  return cfg.xi_max * std::min(1.0, static_cast<double>(episode) / warm);
}

TrainResult train(MicrogridEnv& env, const AgentConfig& cfg) {
  if (cfg.batch_size > cfg.buffer_capacity)
    throw std::invalid_argument("train: batch size exceeds buffer capacity");
  if (!(cfg.discount >= 0.0 && cfg.discount < 1.0))
    throw std::invalid_argument("train: discount must lie in [0, 1)");
  if (cfg.steps_per_episode != env.config().n_steps)
    throw std::invalid_argument(
        "train: steps_per_episode must match the environment's n_steps");

  std::mt19937_64 env_rng(cfg.seed * 6364136223846793005ULL + 1);
  std::mt19937_64 sample_rng(cfg.seed * 6364136223846793005ULL + 2);
  std::mt19937_64 policy_rng(cfg.seed * 6364136223846793005ULL + 3);

  neural::InputSpec spec;
  spec.n_p = env.n_p();
  spec.state_size = 1;
  spec.gamma_per_step = kGammaPerStep;
  spec.num_actions = env.num_actions();
  spec.sub_action_bits = env.params().n_gen + 2;

  TrainResult result;
  result.net = neural::init_qnetwork(spec, cfg.hidden, cfg.seed);
  QNetwork& net = result.net;
  fit_normalization(net, env.params(), env.data());

  env.calibrate_reward(cfg.reward_calibration_samples, env_rng);
  net.reward_cost_lo = env.cost_lo();
  net.reward_cost_hi = env.cost_hi();

  ReplayBuffer buffer(static_cast<std::size_t>(cfg.buffer_capacity));
  neural::AdamState adam;
  adam.cfg = cfg.adam;

  const int n_p = env.n_p();
  for (int ep = 0; ep < cfg.episodes; ++ep) {
    env.reset(env_rng);
    const double xi = xi_schedule(cfg, ep);
    EpisodeLog log;
    log.episode = ep;
    log.xi = xi;
    double reward_sum = 0.0, loss_sum = 0.0;
    int loss_count = 0;

    for (int s = 0; s < cfg.steps_per_episode; ++s) {
      const AugmentedState chi = env.state();
      const Rollout roll = rollout_boltzmann(net, chi, xi, policy_rng);
      const MicrogridEnv::StepResult sr = env.step(roll.actions);
      if (sr.diagnostic_failure) {
        log.aborted = true;
        break;
      }
      ++log.steps;
      reward_sum += sr.reward;
      buffer.push(Transition{chi, roll.actions, sr.reward, sr.next_chi, sr.terminal});

      if (buffer.size() >= static_cast<std::size_t>(cfg.batch_size)) {
        const auto batch =
            buffer.sample(static_cast<std::size_t>(cfg.batch_size), sample_rng);
        const Matrix y = td_targets(net, batch, cfg.discount);

        const Index b = static_cast<Index>(batch.size());
        std::vector<Matrix> inputs(static_cast<size_t>(n_p));
        for (int l = 0; l < n_p; ++l) {
          inputs[static_cast<size_t>(l)].resize(net.lstm.input_size, b);
          for (Index j = 0; j < b; ++j) {
            const Transition& t = *batch[static_cast<size_t>(j)];
            const int prev =
                l > 0 ? t.actions[static_cast<size_t>(l - 1)] : -1;
            inputs[static_cast<size_t>(l)].col(j) =
                build_step_input(net, t.chi, l, prev);
          }
        }
        const neural::ForwardResult fw = neural::forward_batch(net, inputs);
        std::vector<Matrix> dq(static_cast<size_t>(n_p));
        double loss = 0.0;
        for (int l = 0; l < n_p; ++l) {
          dq[static_cast<size_t>(l)] =
              Matrix::Zero(net.spec.num_actions, b);
          for (Index j = 0; j < b; ++j) {
            const int a = batch[static_cast<size_t>(j)]
                              ->actions[static_cast<size_t>(l)];
            const double diff =
                fw.q[static_cast<size_t>(l)](a, j) - y(j, static_cast<Index>(l));
            loss += diff * diff;
            dq[static_cast<size_t>(l)](a, j) =
                2.0 * diff / static_cast<double>(b);
          }
        }
        loss /= static_cast<double>(b);
        const neural::Gradients grads = neural::backward_batch(net, fw.trace, dq);
        neural::optimizer_step(adam, neural::tensor_views(net),
                               neural::tensor_views(grads));
        loss_sum += loss;
        ++loss_count;
      }

      if (sr.terminal) {
        log.ended_infeasible = sr.lp_status == LpStatus::Infeasible;
        break;
      }
    }
    log.mean_reward = log.steps > 0 ? reward_sum / log.steps : 0.0;
    log.mean_loss = loss_count > 0 ? loss_sum / loss_count : 0.0;
    result.log.push_back(log);
  }
  return result;
}

void write_training_log_csv(const std::vector<EpisodeLog>& log,
                            const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "episode,steps,mean_reward,mean_loss,ended_infeasible,aborted,xi\n";
  out.precision(12);
  for (const auto& e : log)
    out << e.episode << "," << e.steps << "," << e.mean_reward << ","
        << e.mean_loss << "," << (e.ended_infeasible ? 1 : 0) << ","
        << (e.aborted ? 1 : 0) << "," << e.xi << "\n";
}

InferResult infer(const QNetwork& net, const MicrogridEnv& env,
                  const AugmentedState& chi) {
  InferResult out;
  const auto t0 = std::chrono::steady_clock::now();
  const Rollout roll = rollout_greedy(net, chi);
  out.forward_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.actions = roll.actions;
  const MicrogridEnv::SolveResult solved = env.solve_fixed(chi, roll.actions);
  out.status = solved.status;
  out.lp_time_s = solved.lp_time_s;
  if (solved.status == LpStatus::Optimal) {
    out.epsilon = solved.epsilon;
    out.objective = solved.objective;
  }
  return out;
}

}  // namespace rlmpc::agent
