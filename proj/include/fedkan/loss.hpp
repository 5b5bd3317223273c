#pragma once

#include "fedkan/tensor.hpp"

namespace fedkan {

struct LossResult {
  double loss = 0.0;
  Matrix grad;
};

// Mean squared error over every element, with its gradient w.r.t. pred.
inline LossResult mse_loss(const Matrix& pred, const Matrix& target) {
  require_shape(target, pred.rows, pred.cols, "mse_loss target");
  LossResult res;
  res.grad = Matrix(pred.rows, pred.cols);
  const double n = static_cast<double>(pred.size());
  if (pred.size() == 0) return res;
  double sum = 0.0;
  for (std::size_t j = 0; j < pred.size(); ++j) {
    const double d = pred.data[j] - target.data[j];
    sum += d * d;
    res.grad.data[j] = 2.0 * d / n;
  }
  res.loss = sum / n;
  return res;
}

}  // namespace fedkan
