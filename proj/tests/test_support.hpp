// Shared fixtures for the learning-side tests.
#pragma once

#include "rlmpc/agent.hpp"
#include "rlmpc/profiles.hpp"

namespace rlmpc::testing {

inline profiles::SeriesBundle make_bundle(Index length, std::uint64_t seed,
                                          const std::string& start_iso =
                                              "2022-01-01T00:00:00") {
  using namespace profiles;
  const std::int64_t t0 = parse_iso8601(start_iso);
  SeriesBundle b;
  b.load = synthesize_profile(ProfileKind::Load, length, 400.0, seed, t0);
  b.res = synthesize_profile(ProfileKind::Res, length, 200.0, seed + 1, t0);
  PriceModel m;
  m.buckets = {PriceBucket{0.45, 0.06, 0.10, 0.03, 0.30, 0.05},
               PriceBucket{0.60, 0.08, 0.15, 0.04, 0.32, 0.05}};
  m.seed = seed + 2;
  const PriceSeriesSet prices = synthesize_prices(m, length, t0);
  b.price_buy = prices.buy;
  b.price_sell = prices.sell;
  b.price_prod = prices.prod;
  b.validate();
  return b;
}

inline agent::MicrogridEnv make_env(int n_p, Index length = 400,
                                    std::uint64_t seed = 17, int n_steps = 48) {
  agent::EnvConfig cfg;
  cfg.n_steps = n_steps;
  return agent::MicrogridEnv(microgrid::MicrogridParams{}, n_p,
                             make_bundle(length, seed), cfg);
}

}  // namespace rlmpc::testing
