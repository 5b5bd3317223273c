#include <gtest/gtest.h>

#include "fedkan/fedkan.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace fedkan;

namespace {

KanLayerParams random_kan(std::size_t in, std::size_t out, Rng& rng) {
  KanLayerParams p(in, out, SplineGrid(-1.0, 1.0, 5, 3));
  for (double& c : p.spline_coeffs) c = rng.uniform(-0.5, 0.5);
  for (double& w : p.base_weights) w = rng.uniform(-1.0, 1.0);
  return p;
}

// sum(out * weights) as a scalar loss whose upstream gradient is `weights`.
double weighted_sum(const Matrix& out, const Matrix& weights) {
  double s = 0.0;
  for (std::size_t j = 0; j < out.size(); ++j) s += out.data[j] * weights.data[j];
  return s;
}

}  // namespace

TEST(KanLayer, ZeroParametersGiveZeroOutput) {
  Rng rng(1);
  KanLayerParams p(3, 2, SplineGrid());
  auto out = kan_layer_forward(p, testutil::random_matrix(5, 3, rng, -3, 3)).outputs;
  for (double v : out.data) EXPECT_EQ(v, 0.0);
}

TEST(KanLayer, RowsAreIndependent) {
  Rng rng(2);
  auto p = random_kan(3, 4, rng);
  Matrix x(2, 3);
  for (std::size_t i = 0; i < 3; ++i) x(0, i) = x(1, i) = rng.uniform(-1, 1);
  auto out = kan_layer_forward(p, x).outputs;
  for (std::size_t o = 0; o < 4; ++o) EXPECT_EQ(out(0, o), out(1, o));
}

TEST(KanLayer, SplineFitReproducesIdentity) {
  SplineGrid grid(-1.0, 1.0, 5, 3);
  const std::size_t nb = grid.num_basis();
  const std::size_t n = 401;
  std::vector<double> a(n * nb), b(n);
  const auto knots = oracle::uniform_knots(-1.0, 1.0, 5, 3);
  for (std::size_t r = 0; r < n; ++r) {
    const double x = -1.0 + 2.0 * r / (n - 1);
    for (std::size_t m = 0; m < nb; ++m) a[r * nb + m] = oracle::cox_de_boor(knots, m, 3, x, 1.0);
    b[r] = x;
  }
  const auto coeffs = oracle::least_squares(a, b, n, nb);

  KanLayerParams p(1, 1, grid);
  p.spline_coeffs = coeffs;
  Matrix x(181, 1);
  for (std::size_t r = 0; r < x.rows; ++r) x(r, 0) = -0.9 + 1.8 * r / (x.rows - 1);
  auto out = kan_layer_forward(p, x).outputs;
  for (std::size_t r = 0; r < x.rows; ++r) EXPECT_NEAR(out(r, 0), x(r, 0), 1e-3);
}

TEST(KanLayer, ShapeMismatchIsContractViolation) {
  KanLayerParams p(3, 2, SplineGrid());
  EXPECT_THROW(kan_layer_forward(p, Matrix(4, 2)), ContractViolation);
  auto fwd = kan_layer_forward(p, Matrix(4, 3));
  EXPECT_THROW(kan_layer_backward(fwd.cache, Matrix(4, 3)), ContractViolation);
  EXPECT_THROW(kan_layer_backward(KanCache{}, Matrix(4, 2)), ContractViolation);
}

TEST(KanLayer, ZeroUpstreamGivesZeroGradients) {
  Rng rng(3);
  auto p = random_kan(2, 3, rng);
  auto fwd = kan_layer_forward(p, testutil::random_matrix(4, 2, rng));
  auto back = kan_layer_backward(fwd.cache, Matrix(4, 3));
  for (double v : back.input_grad.data) EXPECT_EQ(v, 0.0);
  for (double v : back.param_grads.flatten()) EXPECT_EQ(v, 0.0);
}

TEST(KanLayer, BaseWeightGradientClosedForm) {
  KanLayerParams p(1, 1, SplineGrid());
  p.base_weights[0] = 0.7;
  Matrix x(3, 1);
  x.data = {-0.5, 0.2, 0.9};
  Matrix up(3, 1);
  up.data = {1.5, -2.0, 0.25};
  auto back = kan_layer_backward(kan_layer_forward(p, x).cache, up);
  double expected = 0.0;
  for (std::size_t b = 0; b < 3; ++b) expected += up.data[b] * x.data[b] / (1.0 + std::exp(-x.data[b]));
  EXPECT_NEAR(back.param_grads.tensors[1].values[0], expected, 1e-14);
}

TEST(KanLayer, BackwardMatchesFiniteDifferences) {
  Rng rng(4);
  const auto params = random_kan(2, 3, rng);
  const Matrix x = testutil::random_matrix(4, 2, rng, -0.95, 0.95);
  const Matrix up = testutil::random_matrix(4, 3, rng);

  auto back = kan_layer_backward(kan_layer_forward(params, x).cache, up);

  // theta = [spline_coeffs, base_weights, inputs]
  std::vector<double> theta = params.spline_coeffs;
  theta.insert(theta.end(), params.base_weights.begin(), params.base_weights.end());
  theta.insert(theta.end(), x.data.begin(), x.data.end());
  auto f = [&](std::span<const double> t) {
    KanLayerParams q = params;
    std::copy_n(t.begin(), q.spline_coeffs.size(), q.spline_coeffs.begin());
    std::copy_n(t.begin() + q.spline_coeffs.size(), q.base_weights.size(), q.base_weights.begin());
    Matrix xi = x;
    std::copy_n(t.begin() + q.spline_coeffs.size() + q.base_weights.size(), xi.size(), xi.data.begin());
    return weighted_sum(kan_layer_forward(q, xi).outputs, up);
  };
  auto numeric = finite_difference_gradient(f, theta, 1e-5);
  std::vector<double> analytic = back.param_grads.flatten();
  analytic.insert(analytic.end(), back.input_grad.data.begin(), back.input_grad.data.end());
  EXPECT_LT(max_relative_error(analytic, numeric), 1e-4);
}

TEST(Linear, IdentityPassesInputThrough) {
  LinearLayerParams p(3, 3);
  for (std::size_t i = 0; i < 3; ++i) p.weight(i, i) = 1.0;
  Rng rng(5);
  Matrix x = testutil::random_matrix(4, 3, rng);
  EXPECT_EQ(linear_forward(p, x).outputs, x);
}

TEST(Linear, BiasGradientIsColumnSum) {
  Rng rng(6);
  LinearLayerParams p(3, 2);
  for (double& w : p.weights) w = rng.uniform(-1, 1);
  Matrix up = testutil::random_matrix(5, 2, rng);
  auto back = linear_backward(linear_forward(p, testutil::random_matrix(5, 3, rng)).cache, up);
  for (std::size_t o = 0; o < 2; ++o) {
    double s = 0.0;
    for (std::size_t b = 0; b < 5; ++b) s += up(b, o);
    EXPECT_NEAR(back.param_grads.tensors[1].values[o], s, 1e-15);
  }
}

TEST(Linear, BackwardMatchesFiniteDifferences) {
  Rng rng(7);
  LinearLayerParams params(4, 3);
  for (double& w : params.weights) w = rng.uniform(-1, 1);
  for (double& b : params.biases) b = rng.uniform(-1, 1);
  const Matrix x = testutil::random_matrix(5, 4, rng);
  const Matrix up = testutil::random_matrix(5, 3, rng);
  auto back = linear_backward(linear_forward(params, x).cache, up);

  std::vector<double> theta = params.weights;
  theta.insert(theta.end(), params.biases.begin(), params.biases.end());
  theta.insert(theta.end(), x.data.begin(), x.data.end());
  auto f = [&](std::span<const double> t) {
    LinearLayerParams q = params;
    std::copy_n(t.begin(), q.weights.size(), q.weights.begin());
    std::copy_n(t.begin() + q.weights.size(), q.biases.size(), q.biases.begin());
    Matrix xi = x;
    std::copy_n(t.begin() + q.weights.size() + q.biases.size(), xi.size(), xi.data.begin());
    return weighted_sum(linear_forward(q, xi).outputs, up);
  };
  auto numeric = finite_difference_gradient(f, theta, 1e-5);
  std::vector<double> analytic = back.param_grads.flatten();
  analytic.insert(analytic.end(), back.input_grad.data.begin(), back.input_grad.data.end());
  EXPECT_LT(max_relative_error(analytic, numeric), 1e-4);
}

TEST(Linear, ShapeMismatch) {
  LinearLayerParams p(3, 2);
  EXPECT_THROW(linear_forward(p, Matrix(1, 4)), ContractViolation);
  auto fwd = linear_forward(p, Matrix(2, 3));
  EXPECT_THROW(linear_backward(fwd.cache, Matrix(3, 2)), ContractViolation);
}

TEST(Activations, Relu) {
  EXPECT_EQ(relu(-2.0), 0.0);
  EXPECT_EQ(relu(3.5), 3.5);
  Matrix x(1, 3);
  x.data = {-1.0, 0.0, 2.0};
  Matrix up(1, 3, 1.0);
  EXPECT_EQ(relu_backward(x, up).data, (std::vector<double>{0.0, 0.0, 1.0}));
}

TEST(Activations, DropoutEvalIsIdentity) {
  Rng rng(8);
  Matrix x = testutil::random_matrix(3, 4, rng);
  auto d = dropout(x, 0.5, Mode::eval, &rng);
  EXPECT_EQ(d.outputs, x);
  for (double m : d.mask.data) EXPECT_EQ(m, 1.0);
}

TEST(Activations, DropoutRejectsBadProbability) {
  Matrix x(1, 1, 1.0);
  Rng rng(9);
  EXPECT_THROW(dropout(x, 1.0, Mode::train, &rng), ConfigError);
  EXPECT_THROW(dropout(x, -0.1, Mode::train, &rng), ConfigError);
}

TEST(Activations, DropoutPreservesExpectation) {
  Rng rng(10);
  Matrix ones(1000, 1000, 1.0);
  auto d = dropout(ones, 0.5, Mode::train, &rng);
  double sum = 0.0;
  std::size_t kept = 0;
  for (std::size_t j = 0; j < d.outputs.size(); ++j) {
    sum += d.outputs.data[j];
    kept += d.mask.data[j] == 1.0;
    EXPECT_TRUE(d.outputs.data[j] == 0.0 || d.outputs.data[j] == 2.0);
  }
  EXPECT_NEAR(sum / 1e6, 1.0, 0.01);
  EXPECT_NEAR(kept / 1e6, 0.5, 0.01);
}

TEST(Activations, DropoutBackwardUsesMask) {
  Rng rng(11);
  Matrix x(4, 4, 1.0);
  auto d = dropout(x, 0.25, Mode::train, &rng);
  Matrix up(4, 4, 1.0);
  auto g = dropout_backward(d, up);
  for (std::size_t j = 0; j < g.size(); ++j) EXPECT_DOUBLE_EQ(g.data[j], d.outputs.data[j]);
}
