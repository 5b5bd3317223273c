#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedkan/error.hpp"
#include "fedkan/layers.hpp"

namespace fedkan {

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step_count = 0;
  double learning_rate = 1e-3;
  double weight_decay = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_size(std::size_t n, double lr = 1e-3, double wd = 1e-5) {
    AdamState s;
    s.first_moment.assign(n, 0.0);
    s.second_moment.assign(n, 0.0);
    s.learning_rate = lr;
    s.weight_decay = wd;
    return s;
  }
};

// One Adam update in place. Weight decay is folded into the gradient
// (g <- g + wd * theta) before the moment updates.
inline void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state) {
  if (grads.size() != params.size()) {
    throw ContractViolation("adam_step: " + std::to_string(grads.size()) + " gradients for " +
                            std::to_string(params.size()) + " parameters");
  }
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw ContractViolation("adam_step: optimizer state not sized for these parameters");
  }
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t j = 0; j < params.size(); ++j) {
    const double g = grads[j] + state.weight_decay * params[j];
    double& m = state.first_moment[j];
    double& v = state.second_moment[j];
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g * g;
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    params[j] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

// Rescales every tensor so the global L2 norm is at most max_norm.
inline GradientBundle clip_gradient_norm(GradientBundle grads, double max_norm) {
  if (!(max_norm > 0.0)) throw ConfigError("clip_gradient_norm: max_norm must be positive");
  const double norm = grads.global_norm();
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& t : grads.tensors)
      for (double& v : t.values) v *= scale;
  }
  return grads;
}

}  // namespace fedkan
