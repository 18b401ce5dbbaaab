#include "rlmpc/bench.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace rlmpc::bench {

namespace {

struct InstanceOutcome {
  bool feasible = false;
  double j = 0.0;
  double time_s = 0.0;
  std::string status;
};

InstanceOutcome run_optimal(const agent::MicrogridEnv& env,
                            const AugmentedState& chi, const BnbConfig& bnb) {
  const MilpSolution sol = env.solve_exact(chi, bnb);
  InstanceOutcome out;
  out.status = to_string(sol.status);
  out.time_s = sol.wall_time_s;
  if (sol.status == MilpStatus::Optimal) {
    out.feasible = true;
    out.j = sol.objective;
  }
  return out;
}

InstanceOutcome run_learned(const agent::MicrogridEnv& env,
                            const neural::QNetwork& net,
                            const AugmentedState& chi) {
  const auto t0 = std::chrono::steady_clock::now();
  const agent::Rollout roll = agent::rollout_greedy(net, chi);
  const double forward_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const agent::MicrogridEnv::SolveResult solved = env.solve_fixed(chi, roll.actions);
  InstanceOutcome out;
  out.status = to_string(solved.status);
  out.time_s = forward_s + solved.lp_time_s;
  if (solved.status == LpStatus::Optimal) {
    out.feasible = true;
    out.j = solved.objective;
  }
  return out;
}

TimeStats time_stats(const std::vector<double>& times_ms) {
  TimeStats s;
  if (times_ms.empty()) return s;
  double sum = 0.0;
  for (double t : times_ms) {
    sum += t;
    s.max_ms = std::max(s.max_ms, t);
  }
  s.mean_ms = sum / static_cast<double>(times_ms.size());
  double var = 0.0;
  for (double t : times_ms) var += (t - s.mean_ms) * (t - s.mean_ms);
  s.std_ms = std::sqrt(var / static_cast<double>(times_ms.size()));
  return s;
}

}  // namespace

EvalResult evaluate(const agent::MicrogridEnv& env, const neural::QNetwork* rl_net,
                    const neural::QNetwork* sl_net, const EvalOptions& opt) {
  if (opt.pool <= 0) throw std::invalid_argument("evaluate: empty pool");
  if (opt.timing && opt.threads > 1)
    throw std::invalid_argument("evaluate: timing runs must be sequential");
  if (opt.run_rl && rl_net == nullptr)
    throw std::invalid_argument("evaluate: RL requested without a model");
  if (opt.run_sl && sl_net == nullptr)
    throw std::invalid_argument("evaluate: SL requested without a model");

  // the pool is sampled up front so it does not depend on methods or threads
  std::mt19937_64 rng(opt.seed);
  std::vector<AugmentedState> pool;
  pool.reserve(static_cast<size_t>(opt.pool));
  for (int i = 0; i < opt.pool; ++i) pool.push_back(env.sample_state(rng, false));

  std::vector<std::string> methods;
  if (opt.run_rl) methods.push_back("RL");
  if (opt.run_sl) methods.push_back("SL");
  if (opt.run_optimal) methods.push_back("Optimal");

  std::vector<std::map<std::string, InstanceOutcome>> outcomes(
      static_cast<size_t>(opt.pool));
  const auto work = [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      auto& slot = outcomes[static_cast<size_t>(i)];
      if (opt.run_optimal)
        slot["Optimal"] = run_optimal(env, pool[static_cast<size_t>(i)], opt.bnb);
      if (opt.run_rl)
        slot["RL"] = run_learned(env, *rl_net, pool[static_cast<size_t>(i)]);
      if (opt.run_sl)
        slot["SL"] = run_learned(env, *sl_net, pool[static_cast<size_t>(i)]);
    }
  };
  const int threads = std::max(1, opt.threads);
  if (threads == 1) {
    work(0, opt.pool);
  } else {
    std::vector<std::thread> workers;
    const int chunk = (opt.pool + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const int begin = t * chunk;
      const int end = std::min(opt.pool, begin + chunk);
      if (begin < end) workers.emplace_back(work, begin, end);
    }
    for (auto& w : workers) w.join();
  }

  EvalResult result;
  result.summary.pool = opt.pool;
  result.summary.n_p = env.n_p();
  result.summary.seed = opt.seed;
  result.summary.timing = opt.timing;

  for (int i = 0; i < opt.pool; ++i) {
    for (const std::string& m : methods) {
      const InstanceOutcome& o = outcomes[static_cast<size_t>(i)].at(m);
      EvalRecord rec;
      rec.chi_id = i;
      rec.method = m;
      rec.status = o.status;
      rec.feasible = o.feasible;
      rec.j = o.j;
      rec.wall_time_ms = opt.timing ? o.time_s * 1e3 : 0.0;
      rec.n_p = env.n_p();
      result.records.push_back(std::move(rec));
    }
  }

  // gap excluded count: optimal feasible but |J| below the floor
  int excluded = 0;
  if (opt.run_optimal) {
    for (int i = 0; i < opt.pool; ++i) {
      const auto& o = outcomes[static_cast<size_t>(i)].at("Optimal");
      if (o.feasible && std::abs(o.j) <= opt.gap_denominator_floor) ++excluded;
    }
  }
  result.summary.gap_excluded_count = excluded;

  for (const std::string& m : methods) {
    int infeasible = 0;
    std::vector<double> times_ms;
    double gap_sum = 0.0;
    int gap_count = 0;
    for (int i = 0; i < opt.pool; ++i) {
      const auto& o = outcomes[static_cast<size_t>(i)].at(m);
      if (!o.feasible) ++infeasible;
      if (opt.timing) times_ms.push_back(o.time_s * 1e3);
      if (opt.run_optimal) {
        const auto& ref = outcomes[static_cast<size_t>(i)].at("Optimal");
        if (o.feasible && ref.feasible &&
            std::abs(ref.j) > opt.gap_denominator_floor) {
          gap_sum += (o.j - ref.j) / std::abs(ref.j) * 100.0;
          ++gap_count;
        }
      }
    }
    result.summary.infeasibility_rate_per_1000[m] =
        1000.0 * static_cast<double>(infeasible) / opt.pool;
    if (opt.run_optimal) {
      result.summary.optimality_gap_pct[m] =
          gap_count > 0 ? gap_sum / gap_count : 0.0;
      result.summary.gap_pair_count[m] = gap_count;
    }
    if (opt.timing) result.summary.time_ms[m] = time_stats(times_ms);
  }

  if (opt.timing && opt.run_optimal) {
    const double t_opt = result.summary.time_ms.at("Optimal").max_ms;
    for (const std::string& m : methods) {
      if (m == "Optimal") continue;
      const double t_m = result.summary.time_ms.at(m).max_ms;
      if (t_m > 0.0) result.summary.reduction_factor_max[m] = t_opt / t_m;
    }
  }
  return result;
}

void write_records_csv(const std::vector<EvalRecord>& records,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "chi_id,method,status,feasible,J,wall_time_ms,n_p\n";
  out.precision(12);
  for (const auto& r : records)
    out << r.chi_id << "," << r.method << "," << r.status << ","
        << (r.feasible ? 1 : 0) << "," << (r.feasible ? r.j : 0.0) << ","
        << r.wall_time_ms << "," << r.n_p << "\n";
}

std::string summary_to_json(const MetricsSummary& s) {
  nlohmann::json j;
  j["pool"] = s.pool;
  j["n_p"] = s.n_p;
  j["seed"] = s.seed;
  j["timing"] = s.timing;
  j["gap_excluded_count"] = s.gap_excluded_count;
  j["optimality_gap_pct"] = s.optimality_gap_pct;
  j["infeasibility_rate_per_1000"] = s.infeasibility_rate_per_1000;
  j["gap_pair_count"] = s.gap_pair_count;
  if (s.timing) {
    nlohmann::json times;
    for (const auto& [m, t] : s.time_ms)
      times[m] = {{"mean", t.mean_ms}, {"max", t.max_ms}, {"std", t.std_ms}};
    j["time_ms"] = times;
    j["reduction_factor_max"] = s.reduction_factor_max;
  } else {
    j["time_ms"] = nullptr;
    j["reduction_factor_max"] = nullptr;
  }
  return j.dump(2);
}

}  // namespace rlmpc::bench
