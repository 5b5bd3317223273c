#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace fedkan {

// Central differences (f(theta + h e_i) - f(theta - h e_i)) / 2h for every
// coordinate. `loss_fn` must be deterministic.
template <typename LossFn>
std::vector<double> finite_difference_gradient(LossFn&& loss_fn, std::vector<double> params,
                                               double step) {
  std::vector<double> grad(params.size(), 0.0);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + step;
    const double up = loss_fn(std::span<const double>(params));
    params[i] = saved - step;
    const double down = loss_fn(std::span<const double>(params));
    params[i] = saved;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor). The floor keeps coordinates
// whose true gradient is zero from dividing rounding noise by zero.
inline double max_relative_error(std::span<const double> a, std::span<const double> b,
                                 double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return a.size() == b.size() ? worst : INFINITY;
}

}  // namespace fedkan
