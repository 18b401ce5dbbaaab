// Command-line front end: data synthesis, training, dataset generation,
// evaluation, and closed-loop simulation for the microgrid study.
#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "rlmpc/agent.hpp"
#include "rlmpc/bench.hpp"
#include "rlmpc/microgrid.hpp"
#include "rlmpc/profiles.hpp"
#include "rlmpc/sl.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rlmpc;

namespace {

void write_text(const std::string& path, const std::string& text) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << text << "\n";
}

microgrid::MicrogridParams load_params_or_default(const std::string& path) {
  if (path.empty()) return microgrid::MicrogridParams{};
  return microgrid::load_params(path);
}

profiles::SeriesBundle load_split(const std::string& data_dir,
                                  const std::string& split) {
  const fs::path dir = fs::path(data_dir) / split;
  if (!fs::exists(dir))
    throw std::runtime_error("data split not found: " + dir.string() +
                             " (run synth-data first or point --data elsewhere)");
  return profiles::load_bundle(dir.string());
}

// Default time-of-day price statistics; sell < prod < buy per bucket, with
// enough spread that the ordering occasionally inverts.
profiles::PriceModel default_price_model(std::uint64_t seed) {
  profiles::PriceModel m;
  m.buckets = {profiles::PriceBucket{0.40, 0.05, 0.08, 0.02, 0.28, 0.04},
               profiles::PriceBucket{0.55, 0.07, 0.14, 0.04, 0.32, 0.05},
               profiles::PriceBucket{0.50, 0.06, 0.12, 0.05, 0.30, 0.05},
               profiles::PriceBucket{0.65, 0.08, 0.18, 0.05, 0.34, 0.05}};
  m.seed = seed;
  return m;
}

profiles::SeriesBundle synthesize_split(int days, double peak_load,
                                        double peak_res, std::uint64_t seed,
                                        const std::string& start_iso,
                                        const std::string& price_model_path) {
  const Index length = static_cast<Index>(days) * 48;
  const std::int64_t t0 = profiles::parse_iso8601(start_iso);
  profiles::SeriesBundle b;
  b.load = profiles::synthesize_profile(profiles::ProfileKind::Load, length,
                                        peak_load, seed, t0);
  b.res = profiles::synthesize_profile(profiles::ProfileKind::Res, length,
                                       peak_res, seed + 1, t0);
  profiles::PriceModel m;
  if (price_model_path.empty()) {
    m = default_price_model(seed + 2);
  } else {
    std::ifstream in(price_model_path);
    if (!in) throw std::runtime_error("cannot open " + price_model_path);
    std::stringstream buf;
    buf << in.rdbuf();
    m = profiles::price_model_from_json(buf.str());
    m.seed = seed + 2;
  }
  const profiles::PriceSeriesSet prices = profiles::synthesize_prices(m, length, t0);
  b.price_buy = prices.buy;
  b.price_sell = prices.sell;
  b.price_prod = prices.prod;
  b.validate();
  return b;
}

std::vector<int> optimal_actions_from_primal(const agent::MicrogridEnv& env,
                                             const Vector& primal) {
  std::vector<int> actions;
  const Index disc0 = env.problem().layout.num_cont();
  const int dps = env.problem().layout.disc_per_step();
  for (int l = 0; l < env.n_p(); ++l)
    actions.push_back(microgrid::sub_action_to_index(
        primal.segment(disc0 + static_cast<Index>(l) * dps, dps)));
  return actions;
}

// --config handling: the JSON section named after the subcommand is turned
// into flag tokens placed before the user's own flags, so explicit flags
// win. Unknown keys surface as CLI11 usage errors naming the flag.
std::vector<std::string> expand_config(const std::string& config_path,
                                       const std::string& subcommand,
                                       std::vector<std::string> user_args) {
  std::vector<std::string> out;
  out.push_back(subcommand);
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw std::runtime_error("cannot open config " + config_path);
    json j;
    in >> j;
    if (j.contains(subcommand)) {
      const json& section = j.at(subcommand);
      if (!section.is_object())
        throw std::runtime_error("config section `" + subcommand +
                                 "` must be an object");
      for (const auto& [key, value] : section.items()) {
        std::string text;
        if (value.is_string()) text = value.get<std::string>();
        else text = value.dump();
        out.push_back("--" + key + "=" + text);
      }
    }
  }
  for (auto& a : user_args) out.push_back(std::move(a));
  return out;
}

void take_last_everywhere(CLI::App* app) {
  for (CLI::Option* opt : app->get_options())
    if (opt->get_expected_min() >= 0)
      opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"microgrid MLD control: exact MPC, RL- and SL-assisted solvers"};
  app.require_subcommand(1);

  // ---- synth-data ----------------------------------------------------
  struct {
    std::string out = "data";
    std::uint64_t seed = 1;
    int train_days = 90;
    int test_days = 30;
    double peak_load = 400.0;
    double peak_res = 200.0;
    std::string price_model;
  } sd;
  CLI::App* synth = app.add_subcommand("synth-data",
                                       "generate seeded synthetic profiles");
  synth->add_option("--out", sd.out, "output directory");
  synth->add_option("--seed", sd.seed, "master seed");
  synth->add_option("--train-days", sd.train_days, "training period length");
  synth->add_option("--test-days", sd.test_days, "test period length");
  synth->add_option("--peak-load", sd.peak_load, "peak load after downscaling [kW]");
  synth->add_option("--peak-res", sd.peak_res, "peak renewables [kW]");
  synth->add_option("--price-model", sd.price_model, "price model JSON");

  // ---- train-rl -------------------------------------------------------
  struct {
    std::string data = "data";
    std::string out = "out";
    std::string params;
    int np = 4;
    agent::AgentConfig agent;
  } tr;
  CLI::App* train_rl = app.add_subcommand("train-rl", "offline Q-learning");
  train_rl->add_option("--data", tr.data, "data directory (train split)");
  train_rl->add_option("--out", tr.out, "output directory");
  train_rl->add_option("--params", tr.params, "microgrid parameter JSON");
  train_rl->add_option("--np", tr.np, "prediction horizon");
  train_rl->add_option("--episodes", tr.agent.episodes, "training episodes");
  train_rl->add_option("--steps", tr.agent.steps_per_episode, "steps per episode");
  train_rl->add_option("--batch", tr.agent.batch_size, "minibatch size");
  train_rl->add_option("--buffer", tr.agent.buffer_capacity, "replay capacity");
  train_rl->add_option("--hidden", tr.agent.hidden, "LSTM hidden size");
  train_rl->add_option("--seed", tr.agent.seed, "seed");
  train_rl->add_option("--discount", tr.agent.discount, "discount factor");
  train_rl->add_option("--xi-max", tr.agent.xi_max, "final Boltzmann temperature");
  train_rl->add_option("--xi-warm", tr.agent.xi_warm_frac, "temperature ramp fraction");
  train_rl->add_option("--lr", tr.agent.adam.lr, "learning rate");
  train_rl->add_option("--clip", tr.agent.adam.clip_norm, "gradient norm clip");
  train_rl->add_option("--calibration", tr.agent.reward_calibration_samples,
                       "random-policy samples for the reward scale");

  // ---- gen-dataset ----------------------------------------------------
  struct {
    std::string data = "data";
    std::string out = "out";
    std::string params;
    int np = 4;
    int n = 1000;
    std::uint64_t seed = 1;
    long node_limit = 1000000;
  } gd;
  CLI::App* gen = app.add_subcommand("gen-dataset",
                                     "label optimal discrete solutions");
  gen->add_option("--data", gd.data, "data directory (train split)");
  gen->add_option("--out", gd.out, "output directory");
  gen->add_option("--params", gd.params, "microgrid parameter JSON");
  gen->add_option("--np", gd.np, "prediction horizon");
  gen->add_option("--n", gd.n, "number of samples");
  gen->add_option("--seed", gd.seed, "seed");
  gen->add_option("--node-limit", gd.node_limit, "branch-and-bound node budget");

  // ---- train-sl -------------------------------------------------------
  struct {
    std::string data = "data";
    std::string dataset = "out/sl_dataset.json";
    std::string out = "out";
    std::string params;
    int np = 4;
    double holdout = 0.2;
    sl::SlConfig sl;
  } ts;
  CLI::App* train_sl_cmd = app.add_subcommand("train-sl",
                                              "supervised baseline training");
  train_sl_cmd->add_option("--data", ts.data, "data directory (train split)");
  train_sl_cmd->add_option("--dataset", ts.dataset, "labeled dataset JSON");
  train_sl_cmd->add_option("--out", ts.out, "output directory");
  train_sl_cmd->add_option("--params", ts.params, "microgrid parameter JSON");
  train_sl_cmd->add_option("--np", ts.np, "prediction horizon");
  train_sl_cmd->add_option("--holdout", ts.holdout, "held-out fraction");
  train_sl_cmd->add_option("--epochs", ts.sl.epochs, "training epochs");
  train_sl_cmd->add_option("--batch", ts.sl.batch_size, "minibatch size");
  train_sl_cmd->add_option("--hidden", ts.sl.hidden, "LSTM hidden size");
  train_sl_cmd->add_option("--seed", ts.sl.seed, "seed");
  train_sl_cmd->add_option("--lr", ts.sl.adam.lr, "learning rate");

  // ---- evaluate -------------------------------------------------------
  struct {
    std::string data = "data";
    std::string out_dir = "out";
    std::string params;
    std::string rl_model;
    std::string sl_model;
    std::string methods;
    int np = 4;
    int pool = 200;
    std::uint64_t seed = 7;
    bool timing = false;
    int threads = 1;
    double gap_floor = 1e-3;
    long node_limit = 1000000;
    bool do_assert = false;
    double max_gap = 5.0;
    double max_infeasible = 50.0;
  } ev;
  CLI::App* eval_cmd = app.add_subcommand("evaluate",
                                          "optimality gap / infeasibility / timing");
  eval_cmd->add_option("--data", ev.data, "data directory (test split)");
  eval_cmd->add_option("--out-dir", ev.out_dir, "output directory");
  eval_cmd->add_option("--params", ev.params, "microgrid parameter JSON");
  eval_cmd->add_option("--rl-model", ev.rl_model, "RL model artifact");
  eval_cmd->add_option("--sl-model", ev.sl_model, "SL model artifact");
  eval_cmd->add_option("--methods", ev.methods,
                       "comma list from RL,SL,Optimal (default: available)");
  eval_cmd->add_option("--np", ev.np, "prediction horizon");
  eval_cmd->add_option("--pool", ev.pool, "number of sampled states");
  eval_cmd->add_option("--seed", ev.seed, "pool seed");
  eval_cmd->add_flag("--timing", ev.timing,
                     "measure wall times (makes outputs machine-dependent)");
  eval_cmd->add_option("--threads", ev.threads, "parallel instances (timing off only)");
  eval_cmd->add_option("--gap-floor", ev.gap_floor, "|J_optimal| floor for the gap");
  eval_cmd->add_option("--node-limit", ev.node_limit, "branch-and-bound node budget");
  eval_cmd->add_flag("--assert", ev.do_assert, "nonzero exit on threshold violation");
  eval_cmd->add_option("--max-gap", ev.max_gap, "asserted mean gap bound [%]");
  eval_cmd->add_option("--max-infeasible", ev.max_infeasible,
                       "asserted infeasibility bound [per 1000]");

  // ---- simulate -------------------------------------------------------
  struct {
    std::string data = "data";
    std::string split = "test";
    std::string out_dir = "out";
    std::string params;
    std::string policy = "optimal";
    std::string model;
    int np = 4;
    int steps = 48;
    std::uint64_t seed = 7;
    int start_index = -1;
    double x0 = -1.0;
    long node_limit = 1000000;
  } sim;
  CLI::App* simulate = app.add_subcommand("simulate", "closed-loop receding horizon");
  simulate->add_option("--data", sim.data, "data directory");
  simulate->add_option("--split", sim.split, "train or test split");
  simulate->add_option("--out-dir", sim.out_dir, "output directory");
  simulate->add_option("--params", sim.params, "microgrid parameter JSON");
  simulate->add_option("--policy", sim.policy, "optimal, rl, or sl");
  simulate->add_option("--model", sim.model, "model artifact for rl/sl policies");
  simulate->add_option("--np", sim.np, "prediction horizon");
  simulate->add_option("--steps", sim.steps, "closed-loop steps");
  simulate->add_option("--seed", sim.seed, "seed for the initial state");
  simulate->add_option("--start-index", sim.start_index,
                       "window start (default: seeded draw)");
  simulate->add_option("--x0", sim.x0, "initial storage level [kWh]");
  simulate->add_option("--node-limit", sim.node_limit, "branch-and-bound node budget");

  // config file expansion: flags given on the command line win
  std::vector<std::string> raw(argv + 1, argv + argc);
  std::string config_path;
  std::vector<std::string> rest;
  for (size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] == "--config" && i + 1 < raw.size()) {
      config_path = raw[++i];
    } else if (raw[i].rfind("--config=", 0) == 0) {
      config_path = raw[i].substr(9);
    } else {
      rest.push_back(raw[i]);
    }
  }
  for (CLI::App* sub : {synth, train_rl, gen, train_sl_cmd, eval_cmd, simulate})
    take_last_everywhere(sub);

  try {
    if (rest.empty()) {
      std::cout << app.help();
      return 1;
    }
    const std::string subcommand = rest.front();
    rest.erase(rest.begin());
    const std::vector<std::string> args =
        expand_config(config_path, subcommand, rest);
    // CLI11 parses tokens in reverse order
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (synth->parsed()) {
      const auto train = synthesize_split(sd.train_days, sd.peak_load, sd.peak_res,
                                          sd.seed, "2022-01-01T00:00:00",
                                          sd.price_model);
      const auto test = synthesize_split(sd.test_days, sd.peak_load, sd.peak_res,
                                         sd.seed + 1000, "2021-01-01T00:00:00",
                                         sd.price_model);
      profiles::save_bundle(train, (fs::path(sd.out) / "train").string());
      profiles::save_bundle(test, (fs::path(sd.out) / "test").string());
      json summary;
      summary["seed"] = sd.seed;
      summary["train_steps"] = train.size();
      summary["test_steps"] = test.size();
      summary["train_start"] = profiles::format_iso8601(train.load.timestamps.front());
      summary["test_start"] = profiles::format_iso8601(test.load.timestamps.front());
      summary["peak_load_kw"] = sd.peak_load;
      summary["peak_res_kw"] = sd.peak_res;
      write_text((fs::path(sd.out) / "synth_data_summary.json").string(),
                 summary.dump(2));
      std::cout << "wrote " << sd.out << "/{train,test} ("
                << train.size() << "/" << test.size() << " steps)\n";
      return 0;
    }

    if (train_rl->parsed()) {
      const auto params = load_params_or_default(tr.params);
      agent::EnvConfig ecfg;
      ecfg.n_steps = tr.agent.steps_per_episode;
      ecfg.r_inf = tr.agent.r_inf;
      agent::MicrogridEnv env(params, tr.np, load_split(tr.data, "train"), ecfg);
      const agent::TrainResult result = agent::train(env, tr.agent);
      fs::create_directories(tr.out);
      const std::string model_path = (fs::path(tr.out) / "rl_model.json").string();
      neural::save_qnetwork(result.net, model_path);
      agent::write_training_log_csv(
          result.log, (fs::path(tr.out) / "rl_training_log.csv").string());
      int infeasible_ends = 0;
      double tail_loss = 0.0, tail_reward = 0.0;
      const size_t tail = std::min<size_t>(10, result.log.size());
      for (const auto& e : result.log) infeasible_ends += e.ended_infeasible;
      for (size_t i = result.log.size() - tail; i < result.log.size(); ++i) {
        tail_loss += result.log[i].mean_loss / static_cast<double>(tail);
        tail_reward += result.log[i].mean_reward / static_cast<double>(tail);
      }
      json summary;
      summary["episodes"] = tr.agent.episodes;
      summary["np"] = tr.np;
      summary["seed"] = tr.agent.seed;
      summary["hidden"] = tr.agent.hidden;
      summary["model"] = model_path;
      summary["mean_loss_last10"] = tail_loss;
      summary["mean_reward_last10"] = tail_reward;
      summary["infeasible_terminations"] = infeasible_ends;
      summary["reward_cost_lo"] = result.net.reward_cost_lo;
      summary["reward_cost_hi"] = result.net.reward_cost_hi;
      write_text((fs::path(tr.out) / "train_rl_summary.json").string(),
                 summary.dump(2));
      std::cout << "trained " << tr.agent.episodes << " episodes -> "
                << model_path << "\n";
      return 0;
    }

    if (gen->parsed()) {
      const auto params = load_params_or_default(gd.params);
      agent::MicrogridEnv env(params, gd.np, load_split(gd.data, "train"));
      BnbConfig bnb;
      bnb.node_limit = gd.node_limit;
      sl::GenerateStats stats;
      const auto dataset = sl::generate_dataset(env, gd.n, gd.seed, bnb, &stats);
      fs::create_directories(gd.out);
      const std::string path = (fs::path(gd.out) / "sl_dataset.json").string();
      sl::save_dataset(dataset, env.n_p(), env.num_actions(), path);
      json summary;
      summary["n"] = gd.n;
      summary["np"] = gd.np;
      summary["seed"] = gd.seed;
      summary["produced"] = stats.produced;
      summary["skipped_infeasible"] = stats.skipped_infeasible;
      summary["skipped_node_limit"] = stats.skipped_node_limit;
      summary["dataset"] = path;
      write_text((fs::path(gd.out) / "gen_dataset_summary.json").string(),
                 summary.dump(2));
      std::cout << "labeled " << stats.produced << " states -> " << path << "\n";
      return 0;
    }

    if (train_sl_cmd->parsed()) {
      const auto params = load_params_or_default(ts.params);
      int n_p = 0, num_actions = 0;
      auto dataset = sl::load_dataset(ts.dataset, &n_p, &num_actions);
      if (n_p != ts.np && ts.np != 4)
        throw std::runtime_error("--np disagrees with the dataset");
      agent::MicrogridEnv env(params, n_p, load_split(ts.data, "train"));
      if (env.num_actions() != num_actions)
        throw std::runtime_error("dataset action space disagrees with params");
      // deterministic holdout split
      std::mt19937_64 split_rng(ts.sl.seed * 7919 + 3);
      std::shuffle(dataset.begin(), dataset.end(), split_rng);
      const size_t holdout_n =
          static_cast<size_t>(ts.holdout * static_cast<double>(dataset.size()));
      std::vector<sl::LabeledSample> held(dataset.end() - holdout_n, dataset.end());
      dataset.resize(dataset.size() - holdout_n);
      const sl::SlResult result = sl::train_sl(dataset, env, ts.sl);
      fs::create_directories(ts.out);
      const std::string model_path = (fs::path(ts.out) / "sl_model.json").string();
      neural::save_qnetwork(result.net, model_path);
      sl::write_sl_log_csv(result.log,
                           (fs::path(ts.out) / "sl_training_log.csv").string());
      const double holdout_acc =
          held.empty() ? 0.0 : sl::per_step_accuracy(result.net, held);
      json summary;
      summary["np"] = n_p;
      summary["seed"] = ts.sl.seed;
      summary["epochs"] = ts.sl.epochs;
      summary["train_samples"] = dataset.size();
      summary["holdout_samples"] = held.size();
      summary["train_accuracy"] = result.log.empty() ? 0.0 : result.log.back().accuracy;
      summary["holdout_accuracy"] = holdout_acc;
      summary["model"] = model_path;
      write_text((fs::path(ts.out) / "train_sl_summary.json").string(),
                 summary.dump(2));
      std::cout << "holdout per-step accuracy " << holdout_acc << " -> "
                << model_path << "\n";
      return 0;
    }

    if (eval_cmd->parsed()) {
      const auto params = load_params_or_default(ev.params);
      agent::MicrogridEnv env(params, ev.np, load_split(ev.data, "test"));
      std::optional<neural::QNetwork> rl_net, sl_net;
      if (!ev.rl_model.empty()) rl_net = neural::load_qnetwork(ev.rl_model);
      if (!ev.sl_model.empty()) sl_net = neural::load_qnetwork(ev.sl_model);
      if (rl_net) rl_net->spec.n_p = ev.np;  // weights are shared across steps
      if (sl_net) sl_net->spec.n_p = ev.np;

      bench::EvalOptions opt;
      opt.pool = ev.pool;
      opt.seed = ev.seed;
      opt.timing = ev.timing;
      opt.threads = ev.timing ? 1 : ev.threads;
      opt.gap_denominator_floor = ev.gap_floor;
      opt.bnb.node_limit = ev.node_limit;
      if (ev.methods.empty()) {
        opt.run_rl = rl_net.has_value();
        opt.run_sl = sl_net.has_value();
        opt.run_optimal = true;
      } else {
        opt.run_rl = ev.methods.find("RL") != std::string::npos;
        opt.run_sl = ev.methods.find("SL") != std::string::npos;
        opt.run_optimal = ev.methods.find("Optimal") != std::string::npos;
      }
      if (opt.run_rl && !rl_net)
        throw std::runtime_error("method RL requested but --rl-model missing");
      if (opt.run_sl && !sl_net)
        throw std::runtime_error("method SL requested but --sl-model missing");

      const bench::EvalResult result =
          bench::evaluate(env, rl_net ? &*rl_net : nullptr,
                          sl_net ? &*sl_net : nullptr, opt);
      fs::create_directories(ev.out_dir);
      bench::write_records_csv(
          result.records, (fs::path(ev.out_dir) / "eval_records.csv").string());
      write_text((fs::path(ev.out_dir) / "eval_summary.json").string(),
                 bench::summary_to_json(result.summary));
      std::cout << bench::summary_to_json(result.summary) << "\n";

      if (ev.do_assert) {
        bool ok = true;
        for (const auto& [m, gap] : result.summary.optimality_gap_pct) {
          if (m == "Optimal") continue;
          if (gap > ev.max_gap) {
            std::cerr << "assert: " << m << " gap " << gap << "% exceeds "
                      << ev.max_gap << "%\n";
            ok = false;
          }
        }
        for (const auto& [m, rate] : result.summary.infeasibility_rate_per_1000) {
          if (m == "Optimal") continue;
          if (rate > ev.max_infeasible) {
            std::cerr << "assert: " << m << " infeasibility " << rate
                      << "/1000 exceeds " << ev.max_infeasible << "/1000\n";
            ok = false;
          }
        }
        if (!ok) return 2;
      }
      return 0;
    }

    if (simulate->parsed()) {
      const auto params = load_params_or_default(sim.params);
      const profiles::SeriesBundle bundle = load_split(sim.data, sim.split);
      agent::MicrogridEnv env(params, sim.np, bundle);
      if (static_cast<Index>(sim.steps) + sim.np >= bundle.size())
        throw std::runtime_error("simulation longer than the data split");

      std::optional<neural::QNetwork> net;
      if (sim.policy != "optimal") {
        if (sim.model.empty())
          throw std::runtime_error("--model is required for policy " + sim.policy);
        net = neural::load_qnetwork(sim.model);
        net->spec.n_p = sim.np;
      }
      DiscretePolicy policy;  // stays empty for the exact policy
      if (net) {
        const agent::MicrogridEnv* env_ptr = &env;
        const neural::QNetwork* net_ptr = &*net;
        policy = [env_ptr, net_ptr](const AugmentedState& chi) {
          return env_ptr->actions_to_eps_d(
              agent::rollout_greedy(*net_ptr, chi).actions);
        };
      }

      std::mt19937_64 rng(sim.seed);
      Index start = sim.start_index;
      if (start < 0) {
        std::uniform_int_distribution<Index> pick(
            0, bundle.size() - sim.steps - sim.np - 1);
        start = pick(rng);
      }
      double x0 = sim.x0;
      if (x0 < 0.0) x0 = 0.5 * (params.x_b_min + params.x_b_max);

      BnbConfig bnb;
      bnb.node_limit = sim.node_limit;
      const GammaWindow window = [&bundle, &sim](int k) {
        return bundle.window(k, sim.np);
      };
      const RhResult run =
          receding_horizon_run(env.problem(), Vector::Constant(1, x0), start,
                               sim.steps, window, policy, bnb);
      fs::create_directories(sim.out_dir);
      write_trajectory_csv(run, env.problem().layout,
                           (fs::path(sim.out_dir) / "trajectory.csv").string());

      // audit the realized trajectory: balance residual and storage bounds
      double max_residual = 0.0;
      bool bounds_ok = true;
      for (const auto& rec : run.steps) {
        if (rec.status == "infeasible_exact") continue;
        const microgrid::ExogenousStep g = microgrid::unpack_exogenous(
            env.problem().layout.gamma_step(rec.chi.gamma, 0));
        const double residual =
            std::abs(rec.first.u_c[0] - rec.first.u_c.segment(2, params.n_gen).sum() -
                     g.p_res - rec.first.u_c[1] + g.p_load);
        max_residual = std::max(max_residual, residual);
        bounds_ok = bounds_ok && rec.chi.x[0] >= params.x_b_min - 1e-6 &&
                    rec.chi.x[0] <= params.x_b_max + 1e-6;
      }
      bounds_ok = bounds_ok && run.final_state[0] >= params.x_b_min - 1e-6 &&
                  run.final_state[0] <= params.x_b_max + 1e-6;

      json summary;
      summary["policy"] = sim.policy;
      summary["np"] = sim.np;
      summary["steps"] = static_cast<int>(run.steps.size());
      summary["start_index"] = start;
      summary["seed"] = sim.seed;
      summary["x0"] = x0;
      summary["total_stage_cost"] = run.total_stage_cost;
      summary["fallback_count"] = run.fallback_count;
      summary["max_balance_residual"] = max_residual;
      summary["storage_within_bounds"] = bounds_ok;
      write_text((fs::path(sim.out_dir) / "simulate_summary.json").string(),
                 summary.dump(2));
      std::cout << "simulated " << run.steps.size() << " steps, fallbacks "
                << run.fallback_count << ", max balance residual "
                << max_residual << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
