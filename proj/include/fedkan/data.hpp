#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "fedkan/error.hpp"
#include "fedkan/parameter_vector.hpp"
#include "fedkan/random.hpp"
#include "fedkan/tensor.hpp"

namespace fedkan {

inline constexpr std::size_t kNumCategories = 4;
inline constexpr std::array<const char*, kNumCategories> kCategoryNames{
    "communication", "streaming", "cloud_services", "system_updates"};
inline constexpr const char* kCsvHeader =
    "hour,downlink,uplink,communication,streaming,cloud_services,system_updates";

struct TrafficRecord {
  std::int64_t hour = 0;
  double downlink = 0.0;
  double uplink = 0.0;
  std::array<double, kNumCategories> shares{};

  friend bool operator==(const TrafficRecord&, const TrafficRecord&) = default;
};

struct BeamSeries {
  std::string beam_id;
  std::vector<TrafficRecord> records;

  std::size_t size() const { return records.size(); }
  friend bool operator==(const BeamSeries&, const BeamSeries&) = default;
};

struct WindowedSample {
  std::vector<double> features;  // [dl_t, ul_t, dl_{t+1}, ul_{t+1}, ...], oldest first
  std::array<double, kNumCategories> target{};

  friend bool operator==(const WindowedSample&, const WindowedSample&) = default;
};

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t j = 0; j <= line.size(); ++j) {
    if (j == line.size() || line[j] == ',') {
      auto f = line.substr(start, j - start);
      while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
      while (!f.empty() && (f.back() == ' ' || f.back() == '\t')) f.remove_suffix(1);
      out.push_back(f);
      start = j + 1;
    }
  }
  return out;
}

}  // namespace detail

inline constexpr double kShareTolerance = 1e-3;

// Reads the beam CSV schema (see kCsvHeader). Rows whose shares sum within
// kShareTolerance of 1 are renormalized; any other share violation is
// reported with the offending line numbers.
inline BeamSeries read_csv(std::istream& is, const std::string& beam_id,
                           const std::string& source = "<stream>") {
  auto where = [&](std::size_t line) { return source + ":" + std::to_string(line); };
  std::string line;
  if (!std::getline(is, line)) throw IngestionError(source + ": empty file, header required");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);
  {
    const auto cols = detail::split_commas(line);
    const auto expected = detail::split_commas(kCsvHeader);
    std::string missing;
    for (auto e : expected) {
      if (std::find(cols.begin(), cols.end(), e) == cols.end()) {
        missing += (missing.empty() ? "" : ", ") + std::string(e);
      }
    }
    if (!missing.empty()) throw IngestionError(where(1) + ": missing columns: " + missing);
    if (cols != expected) {
      throw IngestionError(where(1) + ": header must be exactly '" + kCsvHeader + "'");
    }
  }

  BeamSeries series;
  series.beam_id = beam_id;
  std::vector<std::size_t> bad_share_lines;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split_commas(line);
    if (f.size() != 7) {
      throw IngestionError(where(lineno) + ": expected 7 fields, got " + std::to_string(f.size()));
    }
    TrafficRecord r;
    const double hour = parse_double(f[0], where(lineno));
    if (hour != std::floor(hour) || hour < 0) {
      throw IngestionError(where(lineno) + ": hour must be a non-negative integer");
    }
    r.hour = static_cast<std::int64_t>(hour);
    r.downlink = parse_double(f[1], where(lineno));
    r.uplink = parse_double(f[2], where(lineno));
    for (std::size_t c = 0; c < kNumCategories; ++c) r.shares[c] = parse_double(f[3 + c], where(lineno));
    if (!std::isfinite(r.downlink) || !std::isfinite(r.uplink) ||
        !std::all_of(r.shares.begin(), r.shares.end(), [](double s) { return std::isfinite(s); })) {
      throw IngestionError(where(lineno) + ": NaN or infinite value");
    }
    if (r.downlink < 0 || r.uplink < 0) {
      throw IngestionError(where(lineno) + ": traffic volumes must be non-negative");
    }
    if (!series.records.empty() && r.hour != series.records.back().hour + 1) {
      throw IngestionError(where(lineno) + ": hour " + std::to_string(r.hour) +
                           " does not follow " + std::to_string(series.records.back().hour));
    }
    double sum = 0.0;
    bool in_range = true;
    for (double s : r.shares) {
      sum += s;
      in_range = in_range && s >= 0.0 && s <= 1.0;
    }
    if (!in_range || std::abs(sum - 1.0) > kShareTolerance) {
      bad_share_lines.push_back(lineno);
    } else if (std::abs(sum - 1.0) > 1e-12) {
      // rounding noise is left alone so write/read round trips are exact
      for (double& s : r.shares) s /= sum;
    }
    series.records.push_back(r);
  }
  if (!bad_share_lines.empty()) {
    std::string lines;
    for (auto l : bad_share_lines) lines += (lines.empty() ? "" : ", ") + std::to_string(l);
    throw IngestionError(source + ": category shares outside [0,1] or not summing to 1 on line(s) " +
                         lines);
  }
  if (series.records.empty()) throw IngestionError(source + ": no data rows");
  return series;
}

inline BeamSeries load_csv(const std::filesystem::path& path, std::string beam_id = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  if (beam_id.empty()) beam_id = path.stem().string();
  return read_csv(in, beam_id, path.string());
}

inline void write_csv(std::ostream& os, const BeamSeries& series) {
  os << kCsvHeader << '\n';
  for (const auto& r : series.records) {
    os << r.hour << ',' << format_double(r.downlink) << ',' << format_double(r.uplink);
    for (double s : r.shares) os << ',' << format_double(s);
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// Synthetic beams
// ---------------------------------------------------------------------------

struct BeamProfile {
  std::string beam_id = "beam_0";
  double downlink_level = 400.0;
  double uplink_level = 60.0;
  double diurnal_amplitude = 0.5;  // relative swing of the daily cycle
  double phase_hours = 0.0;
  double noise = 0.08;  // std-dev of the AR(1) innovation, relative
};

// Distinct levels and phases per beam index.
inline BeamProfile default_profile(int beam_index) {
  BeamProfile p;
  p.beam_id = "beam_" + std::to_string(beam_index);
  p.downlink_level = 400.0 + 150.0 * beam_index;
  p.uplink_level = 60.0 + 20.0 * beam_index;
  p.diurnal_amplitude = 0.45 + 0.05 * (beam_index % 3);
  p.phase_hours = 3.0 * beam_index;
  return p;
}

// Hourly series with a 24 h sinusoidal cycle plus a weekly ripple and AR(1)
// noise on both directions. The shares at hour h are a softmax over smooth
// nonlinear functions of the previous hour's relative downlink/uplink and
// the hour of day.
inline BeamSeries generate_synthetic(std::uint64_t seed, std::size_t hours,
                                     const BeamProfile& profile) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  Rng rng(seed);
  BeamSeries series;
  series.beam_id = profile.beam_id;
  series.records.reserve(hours);
  double ar_dl = 0.0;
  double ar_ul = 0.0;
  double prev_u = 1.0;
  double prev_v = 1.0;
  for (std::size_t h = 0; h < hours; ++h) {
    const double t = static_cast<double>(h);
    ar_dl = 0.7 * ar_dl + profile.noise * rng.normal();
    ar_ul = 0.7 * ar_ul + profile.noise * rng.normal();
    const double day = std::sin(two_pi * (t + profile.phase_hours) / 24.0);
    const double day_ul = std::sin(two_pi * (t + profile.phase_hours + 3.0) / 24.0);
    const double week = 0.15 * std::sin(two_pi * t / (24.0 * 7.0));
    const double u = std::max(0.0, 1.0 + profile.diurnal_amplitude * day + week + ar_dl);
    const double v = std::max(0.0, 1.0 + 0.8 * profile.diurnal_amplitude * day_ul + week + ar_ul);

    TrafficRecord r;
    r.hour = static_cast<std::int64_t>(h);
    r.downlink = profile.downlink_level * u;
    r.uplink = profile.uplink_level * v;

    const double hod = two_pi * static_cast<double>(h % 24) / 24.0;
    const double c = std::cos(hod);
    const double s = std::sin(hod);
    std::array<double, kNumCategories> z{
        1.2 * std::sin(2.5 * prev_u) + 0.6 * prev_v * prev_v - 0.4 * c,
        1.5 * std::tanh(3.0 * (prev_u - 1.0)) + 0.5 * s,
        0.9 * std::cos(3.0 * prev_v) + 0.5 * prev_u * prev_v,
        -2.0 * (prev_u - 1.0) * (prev_u - 1.0) + 0.6 * c * s,
    };
    double zmax = z[0];
    for (double& zi : z) {
      zi += 0.05 * rng.normal();
      zmax = std::max(zmax, zi);
    }
    double total = 0.0;
    for (std::size_t k = 0; k < kNumCategories; ++k) {
      r.shares[k] = std::exp(z[k] - zmax);
      total += r.shares[k];
    }
    for (double& sh : r.shares) sh /= total;
    series.records.push_back(r);
    prev_u = u;
    prev_v = v;
  }
  return series;
}

// ---------------------------------------------------------------------------
// Windowing, splitting, scaling
// ---------------------------------------------------------------------------

// Sample t uses hours [t, t+W) as features and the shares of hour t+W as target.
inline std::vector<WindowedSample> make_windows(const BeamSeries& series, std::size_t window) {
  if (window < 1) throw ConfigError("window must be >= 1");
  if (series.size() < window + 1) {
    throw ConfigError("beam '" + series.beam_id + "' has " + std::to_string(series.size()) +
                      " hours; window " + std::to_string(window) + " needs at least " +
                      std::to_string(window + 1));
  }
  std::vector<WindowedSample> out;
  out.reserve(series.size() - window);
  for (std::size_t t = 0; t + window < series.size(); ++t) {
    WindowedSample s;
    s.features.reserve(2 * window);
    for (std::size_t h = t; h < t + window; ++h) {
      s.features.push_back(series.records[h].downlink);
      s.features.push_back(series.records[h].uplink);
    }
    s.target = series.records[t + window].shares;
    out.push_back(std::move(s));
  }
  return out;
}

template <typename T>
struct Split {
  std::vector<T> train;
  std::vector<T> test;
};

// First floor(train_fraction * n) samples train, the rest test. Order kept.
template <typename T>
Split<T> chrono_split(const std::vector<T>& samples, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train_fraction must be in (0, 1)");
  }
  const auto n_train =
      static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(samples.size())));
  if (n_train == 0 || n_train == samples.size()) {
    throw ConfigError("split of " + std::to_string(samples.size()) + " samples at " +
                      format_double(train_fraction) + " leaves one side empty");
  }
  Split<T> s;
  s.train.assign(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test.assign(samples.begin() + static_cast<std::ptrdiff_t>(n_train), samples.end());
  return s;
}

// Per-feature min-max scaling. Targets are left untouched.
struct Scaler {
  std::vector<double> min;
  std::vector<double> max;

  double apply(std::size_t j, double v) const {
    const double range = max[j] - min[j];
    return range > 0.0 ? (v - min[j]) / range : 0.0;
  }

  friend bool operator==(const Scaler&, const Scaler&) = default;
};

inline Scaler fit_scaler(const std::vector<WindowedSample>& train) {
  if (train.empty()) throw ConfigError("fit_scaler: no training samples");
  const std::size_t width = train.front().features.size();
  Scaler s{train.front().features, train.front().features};
  for (const auto& sample : train) {
    if (sample.features.size() != width) throw ContractViolation("fit_scaler: ragged features");
    for (std::size_t j = 0; j < width; ++j) {
      s.min[j] = std::min(s.min[j], sample.features[j]);
      s.max[j] = std::max(s.max[j], sample.features[j]);
    }
  }
  return s;
}

inline std::vector<WindowedSample> apply_scaler(const Scaler& scaler,
                                                std::vector<WindowedSample> samples) {
  for (auto& sample : samples) {
    if (sample.features.size() != scaler.min.size()) {
      throw ContractViolation("apply_scaler: feature width does not match scaler");
    }
    for (std::size_t j = 0; j < sample.features.size(); ++j) {
      sample.features[j] = scaler.apply(j, sample.features[j]);
    }
  }
  return samples;
}

struct Batch {
  Matrix features;
  Matrix targets;
};

// Rows [begin, end) of `samples` as dense matrices.
inline Batch to_batch(const std::vector<WindowedSample>& samples, std::size_t begin,
                      std::size_t end) {
  end = std::min(end, samples.size());
  const std::size_t width = samples.empty() ? 0 : samples.front().features.size();
  Batch b{Matrix(end - begin, width), Matrix(end - begin, kNumCategories)};
  for (std::size_t r = begin; r < end; ++r) {
    std::copy(samples[r].features.begin(), samples[r].features.end(), b.features.row(r - begin).begin());
    std::copy(samples[r].target.begin(), samples[r].target.end(), b.targets.row(r - begin).begin());
  }
  return b;
}

inline Batch to_batch(const std::vector<WindowedSample>& samples) {
  return to_batch(samples, 0, samples.size());
}

}  // namespace fedkan
