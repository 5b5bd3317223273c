#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "fedkan/error.hpp"
#include "fedkan/optim.hpp"

namespace fedkan {

struct Segment {
  std::string name;
  std::vector<std::size_t> shape;
  std::size_t offset = 0;

  std::size_t size() const {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }

  friend bool operator==(const Segment&, const Segment&) = default;
};

inline std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s;
  for (std::size_t j = 0; j < shape.size(); ++j) {
    if (j) s += 'x';
    s += std::to_string(shape[j]);
  }
  return s;
}

// Flat, named-segment view of every trainable scalar of a model. Segments
// are stored in canonical (layer-ascending) order and tile `values`.
class ParameterVector {
 public:
  ParameterVector() = default;

  void add_segment(std::string name, std::vector<std::size_t> shape,
                   std::span<const double> values) {
    for (const auto& s : segments_) {
      if (s.name == name) throw ContractViolation("duplicate parameter segment '" + name + "'");
    }
    Segment seg{std::move(name), std::move(shape), values_.size()};
    if (seg.size() != values.size()) {
      throw ContractViolation("segment '" + seg.name + "' shape " + shape_string(seg.shape) +
                              " does not match " + std::to_string(values.size()) + " values");
    }
    values_.insert(values_.end(), values.begin(), values.end());
    segments_.push_back(std::move(seg));
  }

  const std::vector<Segment>& segments() const { return segments_; }
  std::size_t total_len() const { return values_.size(); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  std::span<const double> segment_values(std::size_t j) const {
    return std::span<const double>(values_).subspan(segments_[j].offset, segments_[j].size());
  }

  const Segment* find(const std::string& name) const {
    for (const auto& s : segments_)
      if (s.name == name) return &s;
    return nullptr;
  }

  // Throws IncompatibleWeights naming the first differing segment on both sides.
  void require_same_layout(const ParameterVector& other, const char* context) const {
    const std::size_t n = std::max(segments_.size(), other.segments_.size());
    for (std::size_t j = 0; j < n; ++j) {
      const Segment* a = j < segments_.size() ? &segments_[j] : nullptr;
      const Segment* b = j < other.segments_.size() ? &other.segments_[j] : nullptr;
      if (a && b && *a == *b) continue;
      auto describe = [](const Segment* s) {
        return s ? "'" + s->name + "' [" + shape_string(s->shape) + "]" : std::string("<missing>");
      };
      throw IncompatibleWeights(std::string(context) + ": segment " + std::to_string(j) +
                                " is " + describe(a) + " on one side and " + describe(b) +
                                " on the other");
    }
  }

  bool same_layout(const ParameterVector& other) const { return segments_ == other.segments_; }

  friend bool operator==(const ParameterVector&, const ParameterVector&) = default;

 private:
  std::vector<Segment> segments_;
  std::vector<double> values_;
};

inline void adam_step(ParameterVector& params, const ParameterVector& grads, AdamState& state) {
  params.require_same_layout(grads, "adam_step");
  adam_step(params.values(), grads.values(), state);
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(std::string_view text, const std::string& context) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw IngestionError(context + ": cannot parse number '" + std::string(text) + "'");
  }
  return v;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline constexpr int kParameterFormatVersion = 1;

// Text format:
//   fedkan-parameters <version>
//   config_hash <16 hex digits>
//   segments <count>
//   <name> <shape, x-separated> <offset> <length>     (one per segment)
//   values <total>
//   <value>                                            (one per line, %.17g)
inline void write_parameters(std::ostream& os, const ParameterVector& pv, std::uint64_t config_hash) {
  os << "fedkan-parameters " << kParameterFormatVersion << '\n';
  os << "config_hash " << hex64(config_hash) << '\n';
  os << "segments " << pv.segments().size() << '\n';
  for (const auto& s : pv.segments()) {
    os << s.name << ' ' << shape_string(s.shape) << ' ' << s.offset << ' ' << s.size() << '\n';
  }
  os << "values " << pv.total_len() << '\n';
  for (double v : pv.values()) os << format_double(v) << '\n';
}

struct LoadedParameters {
  ParameterVector vector;
  std::uint64_t config_hash = 0;
};

inline LoadedParameters read_parameters(std::istream& is) {
  auto fail = [](const std::string& msg) -> IngestionError {
    return IngestionError("parameter file: " + msg);
  };
  std::string tag;
  int version = 0;
  if (!(is >> tag >> version) || tag != "fedkan-parameters") throw fail("missing header");
  if (version != kParameterFormatVersion) {
    throw fail("unsupported format version " + std::to_string(version));
  }
  std::string hash_text;
  if (!(is >> tag >> hash_text) || tag != "config_hash") throw fail("missing config_hash");
  LoadedParameters out;
  out.config_hash = std::stoull(hash_text, nullptr, 16);
  std::size_t nseg = 0;
  if (!(is >> tag >> nseg) || tag != "segments") throw fail("missing segment table");
  struct Row {
    std::string name;
    std::vector<std::size_t> shape;
    std::size_t offset, len;
  };
  std::vector<Row> rows(nseg);
  for (auto& r : rows) {
    std::string shape;
    if (!(is >> r.name >> shape >> r.offset >> r.len)) throw fail("truncated segment table");
    std::stringstream ss(shape);
    std::string dim;
    while (std::getline(ss, dim, 'x')) r.shape.push_back(std::stoull(dim));
  }
  std::size_t total = 0;
  if (!(is >> tag >> total) || tag != "values") throw fail("missing values block");
  std::vector<double> values(total);
  for (std::size_t j = 0; j < total; ++j) {
    std::string tok;
    if (!(is >> tok)) throw fail("expected " + std::to_string(total) + " values");
    values[j] = parse_double(tok, "parameter file value " + std::to_string(j));
  }
  for (const auto& r : rows) {
    if (r.offset + r.len > total) throw fail("segment '" + r.name + "' exceeds value block");
    out.vector.add_segment(r.name, r.shape, std::span<const double>(values).subspan(r.offset, r.len));
    if (out.vector.segments().back().offset != r.offset) {
      throw fail("segment '" + r.name + "' is out of canonical order");
    }
  }
  if (out.vector.total_len() != total) throw fail("segments do not tile the value block");
  return out;
}

}  // namespace fedkan
