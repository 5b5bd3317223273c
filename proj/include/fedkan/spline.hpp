#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fedkan/error.hpp"

namespace fedkan {

// Uniform knot grid for B-splines of a given order over [range_min, range_max].
//
// The extended knot vector has intervals + 2*order + 1 entries: the range is
// cut into `intervals` equal pieces and padded with `order` knots of the same
// spacing beyond each end, giving intervals + order basis functions that form
// a partition of unity on the range.
class SplineGrid {
 public:
  SplineGrid() : SplineGrid(-1.0, 1.0, 5, 3) {}

  SplineGrid(double range_min, double range_max, int intervals, int order)
      : range_min_(range_min), range_max_(range_max), intervals_(intervals), order_(order) {
    if (!(range_min < range_max) || !std::isfinite(range_min) || !std::isfinite(range_max)) {
      throw ConfigError("spline grid: range must satisfy range_min < range_max");
    }
    if (intervals < 1) throw ConfigError("spline grid: intervals must be >= 1");
    if (order < 0) throw ConfigError("spline grid: order must be >= 0");
    const double h = (range_max - range_min) / intervals;
    knots_.resize(static_cast<std::size_t>(intervals + 2 * order + 1));
    for (int j = 0; j < static_cast<int>(knots_.size()); ++j) {
      knots_[j] = range_min + (j - order) * h;
    }
    // Hit the range ends exactly.
    knots_[order] = range_min;
    knots_[order + intervals] = range_max;
  }

  // Builds a grid from explicit knots; rejects anything that is not a valid
  // extended sequence for (intervals, order).
  static SplineGrid from_knots(int intervals, int order, std::vector<double> knots) {
    if (intervals < 1 || order < 0) throw ConfigError("spline grid: bad intervals/order");
    if (knots.size() != static_cast<std::size_t>(intervals + 2 * order + 1)) {
      throw ConfigError("spline grid: expected " + std::to_string(intervals + 2 * order + 1) +
                        " knots, got " + std::to_string(knots.size()));
    }
    for (std::size_t j = 1; j < knots.size(); ++j) {
      if (!(knots[j] > knots[j - 1])) {
        throw ConfigError("spline grid: knots must be strictly increasing (index " +
                          std::to_string(j) + ")");
      }
    }
    SplineGrid g;
    g.intervals_ = intervals;
    g.order_ = order;
    g.range_min_ = knots[order];
    g.range_max_ = knots[order + intervals];
    g.knots_ = std::move(knots);
    return g;
  }

  double range_min() const { return range_min_; }
  double range_max() const { return range_max_; }
  int intervals() const { return intervals_; }
  int order() const { return order_; }
  std::size_t num_basis() const { return static_cast<std::size_t>(intervals_ + order_); }
  const std::vector<double>& knots() const { return knots_; }

  double clamp(double x) const { return std::clamp(x, range_min_, range_max_); }

  // Index j of the knot span [t_j, t_{j+1}) containing x, for x already
  // clamped to the range. The right end of the range belongs to the last
  // span inside it.
  std::size_t span_index(double x) const {
    const auto last = static_cast<std::size_t>(order_ + intervals_ - 1);
    if (x >= range_max_) return last;
    auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
    auto j = static_cast<std::size_t>(it - knots_.begin()) - 1;
    return std::min(std::max(j, static_cast<std::size_t>(order_)), last);
  }

  friend bool operator==(const SplineGrid&, const SplineGrid&) = default;

 private:
  double range_min_ = -1.0;
  double range_max_ = 1.0;
  int intervals_ = 5;
  int order_ = 3;
  std::vector<double> knots_;
};

namespace detail {

// Cox-de Boor triangle. After the call `table` holds the basis values of
// order `upto` for knot-index 0 .. knots-upto-2; entries beyond that are
// scratch.
inline void cox_de_boor(double x, const std::vector<double>& t, std::size_t span, int upto,
                        std::vector<double>& table) {
  const std::size_t n0 = t.size() - 1;
  table.assign(n0, 0.0);
  table[span] = 1.0;
  for (int p = 1; p <= upto; ++p) {
    const std::size_t np = n0 - static_cast<std::size_t>(p);
    for (std::size_t m = 0; m < np; ++m) {
      double v = 0.0;
      const double left = t[m + p] - t[m];
      const double right = t[m + p + 1] - t[m + 1];
      if (table[m] != 0.0) v += (x - t[m]) / left * table[m];
      if (table[m + 1] != 0.0) v += (t[m + p + 1] - x) / right * table[m + 1];
      table[m] = v;
    }
  }
}

}  // namespace detail

// Values of the num_basis() B-splines of the grid's order at x. Inputs
// outside the range are clamped to its boundary.
inline void bspline_basis(double x, const SplineGrid& grid, std::span<double> out) {
  if (out.size() != grid.num_basis()) throw ContractViolation("bspline_basis: output size");
  const double xc = grid.clamp(x);
  std::vector<double> table;
  detail::cox_de_boor(xc, grid.knots(), grid.span_index(xc), grid.order(), table);
  std::copy_n(table.begin(), out.size(), out.begin());
}

inline std::vector<double> bspline_basis(double x, const SplineGrid& grid) {
  std::vector<double> out(grid.num_basis());
  bspline_basis(x, grid, out);
  return out;
}

// Basis values and their derivatives d/dx at x. The derivative follows
//   B'_{m,k} = k (B_{m,k-1} / (t_{m+k} - t_m) - B_{m+1,k-1} / (t_{m+k+1} - t_{m+1}))
// and is zero where x was clamped (strictly outside the range).
inline void bspline_basis_with_derivative(double x, const SplineGrid& grid,
                                          std::span<double> values,
                                          std::span<double> derivatives) {
  const std::size_t nb = grid.num_basis();
  if (values.size() != nb || derivatives.size() != nb) {
    throw ContractViolation("bspline_basis_with_derivative: output size");
  }
  const int k = grid.order();
  const auto& t = grid.knots();
  const double xc = grid.clamp(x);
  const std::size_t span = grid.span_index(xc);
  std::vector<double> table;
  if (k == 0) {
    detail::cox_de_boor(xc, t, span, 0, table);
    std::copy_n(table.begin(), nb, values.begin());
    std::fill(derivatives.begin(), derivatives.end(), 0.0);
    return;
  }
  detail::cox_de_boor(xc, t, span, k - 1, table);
  const bool clamped = x < grid.range_min() || x > grid.range_max();
  for (std::size_t m = 0; m < nb; ++m) {
    const double a = table[m] / (t[m + k] - t[m]);
    const double b = table[m + 1] / (t[m + k + 1] - t[m + 1]);
    derivatives[m] = clamped ? 0.0 : k * (a - b);
  }
  // Raise the same table one more order for the values.
  const std::size_t np = t.size() - 1 - static_cast<std::size_t>(k);
  for (std::size_t m = 0; m < np; ++m) {
    double v = 0.0;
    if (table[m] != 0.0) v += (xc - t[m]) / (t[m + k] - t[m]) * table[m];
    if (table[m + 1] != 0.0) v += (t[m + k + 1] - xc) / (t[m + k + 1] - t[m + 1]) * table[m + 1];
    table[m] = v;
  }
  std::copy_n(table.begin(), nb, values.begin());
}

}  // namespace fedkan
