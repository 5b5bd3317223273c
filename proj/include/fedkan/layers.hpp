#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "fedkan/error.hpp"
#include "fedkan/random.hpp"
#include "fedkan/spline.hpp"
#include "fedkan/tensor.hpp"

namespace fedkan {

enum class Mode { train, eval };

// One gradient (or parameter) tensor, flattened row-major.
struct GradientTensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;
};

// Gradients for a layer or a whole model, in canonical parameter order.
struct GradientBundle {
  std::vector<GradientTensor> tensors;

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.values.size();
    return n;
  }

  double global_norm() const {
    double sq = 0.0;
    for (const auto& t : tensors)
      for (double v : t.values) sq += v * v;
    return std::sqrt(sq);
  }

  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(total_size());
    for (const auto& t : tensors) out.insert(out.end(), t.values.begin(), t.values.end());
    return out;
  }

  void append(GradientBundle&& other) {
    for (auto& t : other.tensors) tensors.push_back(std::move(t));
  }
};

inline double silu(double x) { return x / (1.0 + std::exp(-x)); }

inline double silu_derivative(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

// ---------------------------------------------------------------------------
// KAN layer
//
// Every edge (i -> o) carries phi(x) = base_weight * silu(x) + sum_m c_m B_m(x)
// and each output sums its incoming edges. No biases.
// ---------------------------------------------------------------------------

struct KanLayerParams {
  std::size_t in_width = 0;
  std::size_t out_width = 0;
  SplineGrid grid;
  std::vector<double> spline_coeffs;  // [in][out][num_basis]
  std::vector<double> base_weights;   // [in][out]

  KanLayerParams() = default;
  KanLayerParams(std::size_t in, std::size_t out, SplineGrid g)
      : in_width(in),
        out_width(out),
        grid(std::move(g)),
        spline_coeffs(in * out * grid.num_basis(), 0.0),
        base_weights(in * out, 0.0) {}

  std::size_t num_basis() const { return grid.num_basis(); }
  std::size_t num_parameters() const { return spline_coeffs.size() + base_weights.size(); }

  double& coeff(std::size_t i, std::size_t o, std::size_t m) {
    return spline_coeffs[(i * out_width + o) * num_basis() + m];
  }
  double coeff(std::size_t i, std::size_t o, std::size_t m) const {
    return spline_coeffs[(i * out_width + o) * num_basis() + m];
  }

  void validate() const {
    if (in_width == 0 || out_width == 0) throw ConfigError("kan layer: widths must be positive");
    if (spline_coeffs.size() != in_width * out_width * num_basis() ||
        base_weights.size() != in_width * out_width) {
      throw ContractViolation("kan layer: parameter shapes inconsistent with widths/grid");
    }
    if (!all_finite(spline_coeffs) || !all_finite(base_weights)) {
      throw NumericError("kan layer: non-finite parameter");
    }
  }
};

struct KanCache {
  KanLayerParams params;  // snapshot of the weights used in forward
  Matrix inputs;          // batch x in
  Matrix basis;           // (batch*in) x num_basis
  Matrix basis_deriv;     // (batch*in) x num_basis
  bool valid = false;
};

struct KanForward {
  Matrix outputs;
  KanCache cache;
};

inline KanForward kan_layer_forward(const KanLayerParams& params, const Matrix& inputs,
                                    Mode /*mode*/ = Mode::eval) {
  if (inputs.cols != params.in_width) {
    throw ContractViolation("kan_layer_forward: input width " + std::to_string(inputs.cols) +
                            " != layer in_width " + std::to_string(params.in_width));
  }
  const std::size_t batch = inputs.rows;
  const std::size_t nin = params.in_width;
  const std::size_t nout = params.out_width;
  const std::size_t nb = params.num_basis();

  KanForward res;
  res.outputs = Matrix(batch, nout);
  auto& cache = res.cache;
  cache.params = params;
  cache.inputs = inputs;
  cache.basis = Matrix(batch * nin, nb);
  cache.basis_deriv = Matrix(batch * nin, nb);

  for (std::size_t b = 0; b < batch; ++b) {
    auto out = res.outputs.row(b);
    for (std::size_t i = 0; i < nin; ++i) {
      const double x = inputs(b, i);
      auto basis = cache.basis.row(b * nin + i);
      bspline_basis_with_derivative(x, params.grid, basis, cache.basis_deriv.row(b * nin + i));
      const double base = silu(x);
      for (std::size_t o = 0; o < nout; ++o) {
        const double* c = &params.spline_coeffs[(i * nout + o) * nb];
        double acc = params.base_weights[i * nout + o] * base;
        for (std::size_t m = 0; m < nb; ++m) acc += c[m] * basis[m];
        out[o] += acc;
      }
    }
  }
  cache.valid = true;
  return res;
}

struct LayerBackward {
  Matrix input_grad;
  GradientBundle param_grads;
};

inline LayerBackward kan_layer_backward(const KanCache& cache, const Matrix& upstream) {
  if (!cache.valid) throw ContractViolation("kan_layer_backward: cache is empty");
  const auto& p = cache.params;
  const std::size_t batch = cache.inputs.rows;
  const std::size_t nin = p.in_width;
  const std::size_t nout = p.out_width;
  const std::size_t nb = p.num_basis();
  if (cache.basis.rows != batch * nin || cache.basis.cols != nb) {
    throw ContractViolation("kan_layer_backward: cache does not match its parameters");
  }
  require_shape(upstream, batch, nout, "kan_layer_backward upstream");

  LayerBackward res;
  res.input_grad = Matrix(batch, nin);
  GradientTensor dcoeff{{nin, nout, nb}, std::vector<double>(nin * nout * nb, 0.0)};
  GradientTensor dbase{{nin, nout}, std::vector<double>(nin * nout, 0.0)};

  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < nin; ++i) {
      const double x = cache.inputs(b, i);
      const double base = silu(x);
      const double dbase_dx = silu_derivative(x);
      auto basis = cache.basis.row(b * nin + i);
      auto dbasis = cache.basis_deriv.row(b * nin + i);
      double gx = 0.0;
      for (std::size_t o = 0; o < nout; ++o) {
        const double g = upstream(b, o);
        if (g == 0.0) continue;
        const std::size_t edge = i * nout + o;
        dbase.values[edge] += g * base;
        double* dc = &dcoeff.values[edge * nb];
        const double* c = &p.spline_coeffs[edge * nb];
        double dphi = p.base_weights[edge] * dbase_dx;
        for (std::size_t m = 0; m < nb; ++m) {
          dc[m] += g * basis[m];
          dphi += c[m] * dbasis[m];
        }
        gx += g * dphi;
      }
      res.input_grad(b, i) = gx;
    }
  }
  res.param_grads.tensors.push_back(std::move(dcoeff));
  res.param_grads.tensors.push_back(std::move(dbase));
  return res;
}

// ---------------------------------------------------------------------------
// Linear layer: y = W x + b
// ---------------------------------------------------------------------------

struct LinearLayerParams {
  std::size_t in_width = 0;
  std::size_t out_width = 0;
  std::vector<double> weights;  // [out][in]
  std::vector<double> biases;   // [out]

  LinearLayerParams() = default;
  LinearLayerParams(std::size_t in, std::size_t out)
      : in_width(in), out_width(out), weights(in * out, 0.0), biases(out, 0.0) {}

  std::size_t num_parameters() const { return weights.size() + biases.size(); }

  double& weight(std::size_t o, std::size_t i) { return weights[o * in_width + i]; }
  double weight(std::size_t o, std::size_t i) const { return weights[o * in_width + i]; }

  void validate() const {
    if (in_width == 0 || out_width == 0) throw ConfigError("linear layer: widths must be positive");
    if (weights.size() != in_width * out_width || biases.size() != out_width) {
      throw ContractViolation("linear layer: parameter shapes inconsistent with widths");
    }
    if (!all_finite(weights) || !all_finite(biases)) {
      throw NumericError("linear layer: non-finite parameter");
    }
  }
};

struct LinearCache {
  LinearLayerParams params;
  Matrix inputs;
  bool valid = false;
};

struct LinearForward {
  Matrix outputs;
  LinearCache cache;
};

inline LinearForward linear_forward(const LinearLayerParams& params, const Matrix& inputs,
                                    Mode /*mode*/ = Mode::eval) {
  if (inputs.cols != params.in_width) {
    throw ContractViolation("linear_forward: input width " + std::to_string(inputs.cols) +
                            " != layer in_width " + std::to_string(params.in_width));
  }
  LinearForward res;
  res.outputs = Matrix(inputs.rows, params.out_width);
  for (std::size_t b = 0; b < inputs.rows; ++b) {
    auto x = inputs.row(b);
    for (std::size_t o = 0; o < params.out_width; ++o) {
      const double* w = &params.weights[o * params.in_width];
      double acc = params.biases[o];
      for (std::size_t i = 0; i < params.in_width; ++i) acc += w[i] * x[i];
      res.outputs(b, o) = acc;
    }
  }
  res.cache = LinearCache{params, inputs, true};
  return res;
}

inline LayerBackward linear_backward(const LinearCache& cache, const Matrix& upstream) {
  if (!cache.valid) throw ContractViolation("linear_backward: cache is empty");
  const auto& p = cache.params;
  const std::size_t batch = cache.inputs.rows;
  if (cache.inputs.cols != p.in_width) {
    throw ContractViolation("linear_backward: cache does not match its parameters");
  }
  require_shape(upstream, batch, p.out_width, "linear_backward upstream");

  LayerBackward res;
  res.input_grad = Matrix(batch, p.in_width);
  GradientTensor dw{{p.out_width, p.in_width}, std::vector<double>(p.weights.size(), 0.0)};
  GradientTensor db{{p.out_width}, std::vector<double>(p.out_width, 0.0)};
  for (std::size_t b = 0; b < batch; ++b) {
    auto x = cache.inputs.row(b);
    auto gin = res.input_grad.row(b);
    for (std::size_t o = 0; o < p.out_width; ++o) {
      const double g = upstream(b, o);
      db.values[o] += g;
      double* dwr = &dw.values[o * p.in_width];
      const double* w = &p.weights[o * p.in_width];
      for (std::size_t i = 0; i < p.in_width; ++i) {
        dwr[i] += g * x[i];
        gin[i] += g * w[i];
      }
    }
  }
  res.param_grads.tensors.push_back(std::move(dw));
  res.param_grads.tensors.push_back(std::move(db));
  return res;
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

inline Matrix relu(const Matrix& inputs) {
  Matrix out = inputs;
  for (double& v : out.data) v = relu(v);
  return out;
}

// Gradient through relu given the pre-activation inputs.
inline Matrix relu_backward(const Matrix& inputs, const Matrix& upstream) {
  require_shape(upstream, inputs.rows, inputs.cols, "relu_backward upstream");
  Matrix g = upstream;
  for (std::size_t j = 0; j < g.size(); ++j) {
    if (!(inputs.data[j] > 0.0)) g.data[j] = 0.0;
  }
  return g;
}

struct DropoutResult {
  Matrix outputs;
  Matrix mask;         // 1 for kept elements, 0 for dropped
  double scale = 1.0;  // applied to survivors
};

inline void check_dropout_probability(double p) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw ConfigError("dropout probability must be in [0, 1), got " + std::to_string(p));
  }
}

// Inverted dropout. In eval mode (or p == 0) this is the identity and the
// rng is not consumed.
inline DropoutResult dropout(const Matrix& inputs, double p, Mode mode, Rng* rng) {
  check_dropout_probability(p);
  DropoutResult res;
  res.mask = Matrix(inputs.rows, inputs.cols, 1.0);
  if (mode == Mode::eval || p == 0.0) {
    res.outputs = inputs;
    return res;
  }
  if (rng == nullptr) throw ContractViolation("dropout: train mode requires an rng");
  res.scale = 1.0 / (1.0 - p);
  res.outputs = Matrix(inputs.rows, inputs.cols);
  for (std::size_t j = 0; j < inputs.size(); ++j) {
    const bool keep = !rng->bernoulli(p);
    res.mask.data[j] = keep ? 1.0 : 0.0;
    res.outputs.data[j] = keep ? inputs.data[j] * res.scale : 0.0;
  }
  return res;
}

inline Matrix dropout_backward(const DropoutResult& fwd, const Matrix& upstream) {
  require_shape(upstream, fwd.mask.rows, fwd.mask.cols, "dropout_backward upstream");
  Matrix g = upstream;
  for (std::size_t j = 0; j < g.size(); ++j) g.data[j] *= fwd.mask.data[j] * fwd.scale;
  return g;
}

}  // namespace fedkan
