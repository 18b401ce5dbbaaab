#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rlmpc/microgrid.hpp"
#include "rlmpc/types.hpp"

namespace rlmpc::profiles {

enum class ProfileKind { Load, Res, PriceBuy, PriceSell, PriceProd };

const char* to_string(ProfileKind kind);

/// A uniformly sampled signal stream. Timestamps are epoch seconds; the
/// spacing is validated on load and preserved by every transform.
struct ProfileSeries {
  ProfileKind kind = ProfileKind::Load;
  std::vector<std::int64_t> timestamps;
  Vector values;

  Index size() const { return values.size(); }
  std::int64_t spacing_s() const;
};

/// Parses a `timestamp,value` CSV with ISO-8601 timestamps (an optional
/// header line is skipped). Malformed rows and non-uniform spacing are
/// rejected with the offending line number in the message.
ProfileSeries load_csv(const std::string& path, ProfileKind kind);
void save_csv(const ProfileSeries& series, const std::string& path);

/// Multiplies the series by peak_target / max(series): the peak moves to
/// peak_target and all ratios between samples are preserved.
/// Throws std::invalid_argument when max(series) <= 0.
ProfileSeries downscale(const ProfileSeries& series, double peak_target);

/// Time-of-day price statistics; bucket b covers the fraction
/// [b/buckets, (b+1)/buckets) of the day.
struct PriceBucket {
  double buy_mean = 0.5, buy_std = 0.0;
  double sell_mean = 0.1, sell_std = 0.0;
  double prod_mean = 0.3, prod_std = 0.0;
};

struct PriceModel {
  std::vector<PriceBucket> buckets;  ///< at least one
  std::uint64_t seed = 0;
  int steps_per_day = 48;

  /// mean(c_sell) < mean(c_prod) < mean(c_buy), per bucket
  void validate() const;
};

PriceModel price_model_from_json(const std::string& text);
std::string price_model_to_json(const PriceModel& model);

struct PriceSeriesSet {
  ProfileSeries buy, sell, prod;
};

/// Seeded normal draws around the bucket means. Reproducible: the same
/// model and start time give byte-identical series.
PriceSeriesSet synthesize_prices(const PriceModel& model, Index length,
                                 std::int64_t start_epoch_s);

/// Bundled synthetic load and renewables: a sinusoidal daily pattern with
/// seeded noise, scaled so the peak equals peak_kw.
ProfileSeries synthesize_profile(ProfileKind kind, Index length, double peak_kw,
                                 std::uint64_t seed, std::int64_t start_epoch_s,
                                 int steps_per_day = 48);

/// The five aligned streams a microgrid run needs.
struct SeriesBundle {
  ProfileSeries load, res, price_buy, price_sell, price_prod;

  Index size() const { return load.size(); }
  /// equal lengths, aligned timestamps, uniform spacing
  void validate() const;

  microgrid::ExogenousStep at(Index k) const;
  /// gamma window for steps k..k+n_p-1 in the microgrid packing order
  Vector window(Index k, int n_p) const;
};

SeriesBundle load_bundle(const std::string& dir);
void save_bundle(const SeriesBundle& bundle, const std::string& dir);

std::int64_t parse_iso8601(const std::string& text);
std::string format_iso8601(std::int64_t epoch_s);

}  // namespace rlmpc::profiles
