#include "rlmpc/profiles.hpp"

#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace rlmpc::profiles {

const char* to_string(ProfileKind kind) {
  switch (kind) {
    case ProfileKind::Load: return "load";
    case ProfileKind::Res: return "res";
    case ProfileKind::PriceBuy: return "price_buy";
    case ProfileKind::PriceSell: return "price_sell";
    case ProfileKind::PriceProd: return "price_prod";
  }
  return "?";
}

std::int64_t parse_iso8601(const std::string& text) {
  std::tm tm = {};
  std::istringstream is(text);
  is >> std::get_time(&tm, "%Y-%m-%dT%H:%M:%S");
  if (is.fail()) {
    is.clear();
    is.str(text);
    is.seekg(0);
    is >> std::get_time(&tm, "%Y-%m-%d %H:%M:%S");
    if (is.fail()) throw std::invalid_argument("bad ISO-8601 timestamp: " + text);
  }
  return static_cast<std::int64_t>(timegm(&tm));
}

std::string format_iso8601(std::int64_t epoch_s) {
  std::time_t t = static_cast<std::time_t>(epoch_s);
  std::tm tm = {};
  gmtime_r(&t, &tm);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d",
                tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                tm.tm_min, tm.tm_sec);
  return buf;
}

std::int64_t ProfileSeries::spacing_s() const {
  if (timestamps.size() < 2) return 0;
  return timestamps[1] - timestamps[0];
}

ProfileSeries load_csv(const std::string& path, ProfileKind kind) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  ProfileSeries out;
  out.kind = kind;
  std::vector<double> values;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("timestamp", 0) == 0) continue;  // header
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected `timestamp,value`");
    const std::string ts_text = line.substr(0, comma);
    const std::string val_text = line.substr(comma + 1);
    std::int64_t ts;
    try {
      ts = parse_iso8601(ts_text);
    } catch (const std::exception&) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": bad timestamp `" + ts_text + "`");
    }
    double value;
    try {
      size_t used = 0;
      value = std::stod(val_text, &used);
      if (used == 0) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": bad value `" + val_text + "`");
    }
    if (!std::isfinite(value))
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": non-finite value");
    if (!out.timestamps.empty()) {
      const std::int64_t gap = ts - out.timestamps.back();
      if (out.timestamps.size() >= 2 &&
          gap != out.timestamps[1] - out.timestamps[0])
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": non-uniform spacing");
      if (gap <= 0)
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": timestamps must increase");
    }
    out.timestamps.push_back(ts);
    values.push_back(value);
  }
  out.values = Eigen::Map<Vector>(values.data(), static_cast<Index>(values.size()));
  return out;
}

void save_csv(const ProfileSeries& series, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "timestamp,value\n";
  out.precision(12);
  for (Index i = 0; i < series.size(); ++i)
    out << format_iso8601(series.timestamps[static_cast<size_t>(i)]) << ","
        << series.values[i] << "\n";
}

ProfileSeries downscale(const ProfileSeries& series, double peak_target) {
  if (series.size() == 0)
    throw std::invalid_argument("downscale: empty series");
  const double peak = series.values.maxCoeff();
  if (peak <= 0.0)
    throw std::invalid_argument("downscale: series peak must be positive");
  ProfileSeries out = series;
  out.values *= peak_target / peak;
  return out;
}

void PriceModel::validate() const {
  if (buckets.empty())
    throw std::invalid_argument("price model: needs at least one bucket");
  if (steps_per_day <= 0)
    throw std::invalid_argument("price model: steps_per_day must be positive");
  for (const auto& b : buckets) {
    if (!(b.sell_mean < b.prod_mean && b.prod_mean < b.buy_mean))
      throw std::invalid_argument(
          "price model: need mean(sell) < mean(prod) < mean(buy) per bucket");
    if (b.buy_std < 0 || b.sell_std < 0 || b.prod_std < 0)
      throw std::invalid_argument("price model: negative std dev");
  }
}

namespace {
using nlohmann::json;
}

PriceModel price_model_from_json(const std::string& text) {
  const json j = json::parse(text);
  PriceModel m;
  if (j.contains("seed")) m.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("steps_per_day")) m.steps_per_day = j.at("steps_per_day").get<int>();
  m.buckets.clear();
  for (const auto& bj : j.at("buckets")) {
    PriceBucket b;
    b.buy_mean = bj.at("buy_mean").get<double>();
    b.buy_std = bj.value("buy_std", 0.0);
    b.sell_mean = bj.at("sell_mean").get<double>();
    b.sell_std = bj.value("sell_std", 0.0);
    b.prod_mean = bj.at("prod_mean").get<double>();
    b.prod_std = bj.value("prod_std", 0.0);
    m.buckets.push_back(b);
  }
  m.validate();
  return m;
}

std::string price_model_to_json(const PriceModel& m) {
  json j;
  j["seed"] = m.seed;
  j["steps_per_day"] = m.steps_per_day;
  j["buckets"] = json::array();
  for (const auto& b : m.buckets)
    j["buckets"].push_back({{"buy_mean", b.buy_mean},
                            {"buy_std", b.buy_std},
                            {"sell_mean", b.sell_mean},
                            {"sell_std", b.sell_std},
                            {"prod_mean", b.prod_mean},
                            {"prod_std", b.prod_std}});
  return j.dump(2);
}

PriceSeriesSet synthesize_prices(const PriceModel& model, Index length,
                                 std::int64_t start_epoch_s) {
  model.validate();
  const std::int64_t spacing = 86400 / model.steps_per_day;
  std::mt19937_64 rng(model.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  PriceSeriesSet out;
  out.buy.kind = ProfileKind::PriceBuy;
  out.sell.kind = ProfileKind::PriceSell;
  out.prod.kind = ProfileKind::PriceProd;
  out.buy.values.resize(length);
  out.sell.values.resize(length);
  out.prod.values.resize(length);
  for (Index k = 0; k < length; ++k) {
    const std::int64_t ts = start_epoch_s + k * spacing;
    out.buy.timestamps.push_back(ts);
    out.sell.timestamps.push_back(ts);
    out.prod.timestamps.push_back(ts);
    const int step_of_day = static_cast<int>(k % model.steps_per_day);
    const size_t bucket =
        static_cast<size_t>(step_of_day) * model.buckets.size() /
        static_cast<size_t>(model.steps_per_day);
    const PriceBucket& b = model.buckets[bucket];
    out.buy.values[k] = b.buy_mean + b.buy_std * gauss(rng);
    out.sell.values[k] = b.sell_mean + b.sell_std * gauss(rng);
    out.prod.values[k] = b.prod_mean + b.prod_std * gauss(rng);
  }
  return out;
}

ProfileSeries synthesize_profile(ProfileKind kind, Index length, double peak_kw,
                                 std::uint64_t seed, std::int64_t start_epoch_s,
                                 int steps_per_day) {
  if (length <= 0) throw std::invalid_argument("synthesize_profile: empty");
  const std::int64_t spacing = 86400 / steps_per_day;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double day_phase = unit(rng) * 2.0 * M_PI;

  ProfileSeries out;
  out.kind = kind;
  out.values.resize(length);
  for (Index k = 0; k < length; ++k) {
    out.timestamps.push_back(start_epoch_s + k * spacing);
    const double tod = static_cast<double>(k % steps_per_day) / steps_per_day;
    double base;
    if (kind == ProfileKind::Res) {
      // solar-like bell around midday plus a wind floor
      const double solar = std::max(0.0, std::sin((tod - 0.25) * 2.0 * M_PI));
      base = 0.15 + 0.75 * solar * solar + 0.10 * std::sin(2.0 * M_PI * tod * 3 + day_phase);
    } else {
      // morning and evening demand humps
      base = 0.45 + 0.25 * std::sin(2.0 * M_PI * tod - 2.4) +
             0.15 * std::sin(4.0 * M_PI * tod - 0.8);
    }
    const double noisy = base * (1.0 + 0.08 * gauss(rng));
    out.values[k] = std::max(0.0, noisy);
  }
  // exact peak placement, shape preserved
  const double peak = out.values.maxCoeff();
  if (peak > 0.0) out.values *= peak_kw / peak;
  return out;
}

void SeriesBundle::validate() const {
  const ProfileSeries* all[] = {&load, &res, &price_buy, &price_sell, &price_prod};
  const Index n = load.size();
  if (n == 0) throw std::invalid_argument("series bundle: empty");
  for (const ProfileSeries* s : all) {
    if (s->size() != n)
      throw std::invalid_argument("series bundle: length mismatch");
    if (s->timestamps != load.timestamps)
      throw std::invalid_argument("series bundle: timestamps differ");
  }
  for (Index k = 0; k + 1 < n; ++k) {
    const std::int64_t gap = load.timestamps[static_cast<size_t>(k + 1)] -
                             load.timestamps[static_cast<size_t>(k)];
    if (gap != load.spacing_s())
      throw std::invalid_argument("series bundle: non-uniform spacing");
  }
}

microgrid::ExogenousStep SeriesBundle::at(Index k) const {
  if (k < 0 || k >= size()) throw std::out_of_range("series bundle: index");
  return {price_buy.values[k], price_sell.values[k], price_prod.values[k],
          res.values[k], load.values[k]};
}

Vector SeriesBundle::window(Index k, int n_p) const {
  if (k < 0 || k + n_p > size())
    throw std::out_of_range("series bundle: window out of range");
  Vector gamma(static_cast<Index>(n_p) * microgrid::kGammaPerStep);
  for (int l = 0; l < n_p; ++l)
    gamma.segment(static_cast<Index>(l) * microgrid::kGammaPerStep,
                  microgrid::kGammaPerStep) = microgrid::pack_exogenous(at(k + l));
  return gamma;
}

SeriesBundle load_bundle(const std::string& dir) {
  namespace fs = std::filesystem;
  SeriesBundle b;
  b.load = load_csv((fs::path(dir) / "load.csv").string(), ProfileKind::Load);
  b.res = load_csv((fs::path(dir) / "res.csv").string(), ProfileKind::Res);
  b.price_buy =
      load_csv((fs::path(dir) / "price_buy.csv").string(), ProfileKind::PriceBuy);
  b.price_sell =
      load_csv((fs::path(dir) / "price_sell.csv").string(), ProfileKind::PriceSell);
  b.price_prod =
      load_csv((fs::path(dir) / "price_prod.csv").string(), ProfileKind::PriceProd);
  b.validate();
  return b;
}

void save_bundle(const SeriesBundle& bundle, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  save_csv(bundle.load, (fs::path(dir) / "load.csv").string());
  save_csv(bundle.res, (fs::path(dir) / "res.csv").string());
  save_csv(bundle.price_buy, (fs::path(dir) / "price_buy.csv").string());
  save_csv(bundle.price_sell, (fs::path(dir) / "price_sell.csv").string());
  save_csv(bundle.price_prod, (fs::path(dir) / "price_prod.csv").string());
}

}  // namespace rlmpc::profiles
