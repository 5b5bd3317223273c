#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <type_traits>
#include <string>
#include <variant>
#include <vector>

#include "fedkan/error.hpp"
#include "fedkan/layers.hpp"
#include "fedkan/parameter_vector.hpp"
#include "fedkan/random.hpp"

namespace fedkan {

enum class ModelKind { fed_kan, fed_mlp };

inline std::string to_string(ModelKind k) { return k == ModelKind::fed_kan ? "fed_kan" : "fed_mlp"; }

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "fed_kan") return ModelKind::fed_kan;
  if (s == "fed_mlp") return ModelKind::fed_mlp;
  throw ConfigError("model.kind must be 'fed_kan' or 'fed_mlp', got '" + s + "'");
}

// Architecture description. Defaults are the Fed-KAN configuration with a
// 5-hour window of (downlink, uplink) flattened to 10 inputs.
//
// fed_kan: KAN layers over kan_hidden_widths, then the FC head. Every FC
//          head layer but the last is followed by ReLU and dropout; the last
//          entry is the output layer and must equal output_width. An empty
//          head means a single linear output layer.
// fed_mlp: linear layers over mlp_hidden_widths, each followed by ReLU and
//          dropout, then a linear output layer.
struct ModelConfig {
  ModelKind kind = ModelKind::fed_kan;
  std::size_t input_width = 10;
  std::vector<std::size_t> kan_hidden_widths{2, 4, 8};
  std::vector<std::size_t> mlp_hidden_widths{8, 16, 48};
  std::vector<std::size_t> fc_head_widths{8, 4};
  std::size_t output_width = 4;
  int grid_intervals = 5;
  int spline_order = 3;
  double grid_min = -1.0;
  double grid_max = 1.0;
  double dropout_p = 0.5;

  static ModelConfig fed_kan() { return ModelConfig{}; }
  static ModelConfig fed_mlp() {
    ModelConfig c;
    c.kind = ModelKind::fed_mlp;
    return c;
  }

  void validate() const {
    auto positive = [](const std::vector<std::size_t>& ws, const char* field) {
      for (auto w : ws)
        if (w == 0) throw ConfigError(std::string("model.") + field + ": widths must be positive");
    };
    if (input_width == 0) throw ConfigError("model.input_width must be positive");
    if (output_width == 0) throw ConfigError("model.output_width must be positive");
    positive(kan_hidden_widths, "kan_hidden_widths");
    positive(mlp_hidden_widths, "mlp_hidden_widths");
    positive(fc_head_widths, "fc_head_widths");
    if (kind == ModelKind::fed_kan && !fc_head_widths.empty() &&
        fc_head_widths.back() != output_width) {
      throw ConfigError("model.fc_head_widths: last entry " + std::to_string(fc_head_widths.back()) +
                        " must equal output_width " + std::to_string(output_width));
    }
    if (grid_intervals < 1) throw ConfigError("model.grid_intervals must be >= 1");
    if (spline_order < 0) throw ConfigError("model.spline_order must be >= 0");
    if (!(grid_min < grid_max)) throw ConfigError("model.grid range must satisfy min < max");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ConfigError("model.dropout_p must be in [0, 1)");
  }

  // Stable textual form; feeds the config hash in parameter files.
  std::string canonical() const {
    auto list = [](const std::vector<std::size_t>& ws) {
      std::string s = "[";
      for (std::size_t j = 0; j < ws.size(); ++j) s += (j ? "," : "") + std::to_string(ws[j]);
      return s + "]";
    };
    std::string s = "kind=" + to_string(kind) + ";input=" + std::to_string(input_width) +
                    ";output=" + std::to_string(output_width);
    if (kind == ModelKind::fed_kan) {
      s += ";kan=" + list(kan_hidden_widths) + ";head=" + list(fc_head_widths) +
           ";G=" + std::to_string(grid_intervals) + ";k=" + std::to_string(spline_order) +
           ";range=" + format_double(grid_min) + ":" + format_double(grid_max);
    } else {
      s += ";mlp=" + list(mlp_hidden_widths);
    }
    return s + ";dropout=" + format_double(dropout_p);
  }

  std::uint64_t hash() const { return fnv1a(canonical()); }
};

// One entry in the layer stack: parameters plus what follows the affine/KAN map.
struct LayerSpec {
  enum class Type { kan, linear };
  Type type;
  std::size_t in_width;
  std::size_t out_width;
  bool relu;
  bool dropout;
};

inline std::vector<LayerSpec> layer_plan(const ModelConfig& config) {
  config.validate();
  std::vector<LayerSpec> plan;
  std::size_t width = config.input_width;
  auto push = [&](LayerSpec::Type t, std::size_t out, bool act) {
    plan.push_back({t, width, out, act, act});
    width = out;
  };
  if (config.kind == ModelKind::fed_kan) {
    for (auto w : config.kan_hidden_widths) push(LayerSpec::Type::kan, w, false);
    if (config.fc_head_widths.empty()) {
      push(LayerSpec::Type::linear, config.output_width, false);
    } else {
      for (std::size_t j = 0; j < config.fc_head_widths.size(); ++j) {
        const bool last = j + 1 == config.fc_head_widths.size();
        push(LayerSpec::Type::linear, config.fc_head_widths[j], !last);
      }
    }
  } else {
    for (auto w : config.mlp_hidden_widths) push(LayerSpec::Type::linear, w, true);
    push(LayerSpec::Type::linear, config.output_width, false);
  }
  return plan;
}

// Trainable scalars: (G + k + 1) per KAN edge, (in + 1) * out per linear layer.
inline std::size_t count_parameters(const ModelConfig& config) {
  const auto per_edge = static_cast<std::size_t>(config.grid_intervals + config.spline_order + 1);
  std::size_t n = 0;
  for (const auto& l : layer_plan(config)) {
    n += l.type == LayerSpec::Type::kan ? l.in_width * l.out_width * per_edge
                                        : (l.in_width + 1) * l.out_width;
  }
  return n;
}

class Model {
 public:
  struct Layer {
    std::variant<KanLayerParams, LinearLayerParams> params;
    bool relu = false;
    bool dropout = false;
  };

  Model(ModelConfig config, std::vector<Layer> layers)
      : config_(std::move(config)), layers_(std::move(layers)) {}

  const ModelConfig& config() const { return config_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  Mode mode() const { return mode_; }
  void set_mode(Mode m) { mode_ = m; }

  // Runs the stack and keeps what backward() needs. Train mode requires
  // an rng whenever dropout_p > 0.
  Matrix forward(const Matrix& batch, Rng* rng = nullptr) {
    if (batch.cols != config_.input_width) {
      throw ContractViolation("model forward: batch has " + std::to_string(batch.cols) +
                              " columns, model expects " + std::to_string(config_.input_width));
    }
    caches_.clear();
    caches_.reserve(layers_.size());
    Matrix x = batch;
    for (const auto& layer : layers_) {
      StepCache c;
      if (const auto* kan = std::get_if<KanLayerParams>(&layer.params)) {
        auto f = kan_layer_forward(*kan, x, mode_);
        x = std::move(f.outputs);
        c.affine = std::move(f.cache);
      } else {
        auto f = linear_forward(std::get<LinearLayerParams>(layer.params), x, mode_);
        x = std::move(f.outputs);
        c.affine = std::move(f.cache);
      }
      if (layer.relu) {
        c.pre_relu = x;
        x = relu(x);
      }
      if (layer.dropout) {
        auto d = dropout(x, config_.dropout_p, mode_, rng);
        x = std::move(d.outputs);
        d.outputs = Matrix();
        c.drop = std::move(d);
      }
      caches_.push_back(std::move(c));
    }
    return x;
  }

  // Gradients of the last forward pass, in canonical parameter order.
  GradientBundle backward(const Matrix& upstream) {
    if (caches_.size() != layers_.size()) {
      throw ContractViolation("model backward: no matching forward pass");
    }
    std::vector<GradientBundle> per_layer(layers_.size());
    Matrix g = upstream;
    for (std::size_t j = layers_.size(); j-- > 0;) {
      auto& c = caches_[j];
      if (c.drop) g = dropout_backward(*c.drop, g);
      if (c.pre_relu) g = relu_backward(*c.pre_relu, g);
      LayerBackward b = std::visit(
          [&](const auto& cache) -> LayerBackward {
            if constexpr (std::is_same_v<std::decay_t<decltype(cache)>, KanCache>) {
              return kan_layer_backward(cache, g);
            } else {
              return linear_backward(cache, g);
            }
          },
          c.affine);
      g = std::move(b.input_grad);
      per_layer[j] = std::move(b.param_grads);
    }
    caches_.clear();
    GradientBundle all;
    for (auto& b : per_layer) all.append(std::move(b));
    return all;
  }

  ParameterVector export_weights() const {
    ParameterVector pv;
    for (std::size_t j = 0; j < layers_.size(); ++j) {
      const std::string prefix = "layer" + std::to_string(j);
      if (const auto* kan = std::get_if<KanLayerParams>(&layers_[j].params)) {
        pv.add_segment(prefix + ".kan.spline_coeffs", {kan->in_width, kan->out_width, kan->num_basis()},
                       kan->spline_coeffs);
        pv.add_segment(prefix + ".kan.base_weights", {kan->in_width, kan->out_width},
                       kan->base_weights);
      } else {
        const auto& lin = std::get<LinearLayerParams>(layers_[j].params);
        pv.add_segment(prefix + ".linear.weights", {lin.out_width, lin.in_width}, lin.weights);
        pv.add_segment(prefix + ".linear.biases", {lin.out_width}, lin.biases);
      }
    }
    return pv;
  }

  // Same layout as export_weights(), filled from a gradient bundle.
  ParameterVector gradient_vector(const GradientBundle& grads) const {
    ParameterVector layout = export_weights();
    if (grads.tensors.size() != layout.segments().size()) {
      throw ContractViolation("gradient bundle has " + std::to_string(grads.tensors.size()) +
                              " tensors, model has " + std::to_string(layout.segments().size()));
    }
    ParameterVector pv;
    for (std::size_t j = 0; j < grads.tensors.size(); ++j) {
      const auto& seg = layout.segments()[j];
      pv.add_segment(seg.name, seg.shape, grads.tensors[j].values);
    }
    return pv;
  }

  void import_weights(const ParameterVector& pv) {
    export_weights().require_same_layout(pv, "import_weights");
    std::size_t seg = 0;
    auto take = [&](std::vector<double>& dst) {
      auto src = pv.segment_values(seg++);
      dst.assign(src.begin(), src.end());
    };
    for (auto& layer : layers_) {
      if (auto* kan = std::get_if<KanLayerParams>(&layer.params)) {
        take(kan->spline_coeffs);
        take(kan->base_weights);
      } else {
        auto& lin = std::get<LinearLayerParams>(layer.params);
        take(lin.weights);
        take(lin.biases);
      }
    }
    caches_.clear();
  }

  std::vector<std::size_t> layer_widths() const {
    std::vector<std::size_t> w{config_.input_width};
    for (const auto& l : layers_) {
      w.push_back(std::visit([](const auto& p) { return p.out_width; }, l.params));
    }
    return w;
  }

 private:
  struct StepCache {
    std::variant<KanCache, LinearCache> affine;
    std::optional<Matrix> pre_relu;
    std::optional<DropoutResult> drop;
  };

  ModelConfig config_;
  std::vector<Layer> layers_;
  Mode mode_ = Mode::train;
  std::vector<StepCache> caches_;
};

// Deterministic initialization from `seed`:
//   spline coefficients  U(-0.1, 0.1) / sqrt(in)
//   base / linear weights U(-sqrt(6/in), sqrt(6/in))
//   biases 0
inline Model build_model(const ModelConfig& config, std::uint64_t seed) {
  const auto plan = layer_plan(config);
  Rng rng(seed);
  std::vector<Model::Layer> layers;
  for (const auto& spec : plan) {
    const double in = static_cast<double>(spec.in_width);
    const double kaiming = std::sqrt(6.0 / in);
    Model::Layer layer;
    layer.relu = spec.relu;
    layer.dropout = spec.dropout;
    if (spec.type == LayerSpec::Type::kan) {
      KanLayerParams p(spec.in_width, spec.out_width,
                       SplineGrid(config.grid_min, config.grid_max, config.grid_intervals,
                                  config.spline_order));
      const double s = 0.1 / std::sqrt(in);
      for (double& c : p.spline_coeffs) c = rng.uniform(-s, s);
      for (double& w : p.base_weights) w = rng.uniform(-kaiming, kaiming);
      layer.params = std::move(p);
    } else {
      LinearLayerParams p(spec.in_width, spec.out_width);
      for (double& w : p.weights) w = rng.uniform(-kaiming, kaiming);
      layer.params = std::move(p);
    }
    layers.push_back(std::move(layer));
  }
  return Model(config, std::move(layers));
}

}  // namespace fedkan
