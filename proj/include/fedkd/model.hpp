#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fedkd/errors.hpp"
#include "fedkd/matrix.hpp"
#include "fedkd/rng.hpp"

namespace fedkd {

enum class Activation { kRelu, kTanh };

inline std::string to_string(Activation a) {
  return a == Activation::kRelu ? "relu" : "tanh";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "tanh") return Activation::kTanh;
  throw ConfigError("unknown activation '" + s + "' (expected relu or tanh)");
}

// Shape of a dense feed-forward classifier. capacity_tier is a free-form
// label carried through to reports; it never affects computation.
struct ModelSpec {
  int input_dim = 0;
  std::vector<int> hidden_layers;
  int num_classes = 0;
  Activation activation = Activation::kRelu;
  std::string capacity_tier;

  // (fan_in, fan_out) per dense layer, input to output.
  std::vector<std::pair<int, int>> layer_shapes() const {
    std::vector<std::pair<int, int>> shapes;
    int in = input_dim;
    for (int h : hidden_layers) {
      shapes.emplace_back(in, h);
      in = h;
    }
    shapes.emplace_back(in, num_classes);
    return shapes;
  }

  std::int64_t parameter_count() const {
    std::int64_t n = 0;
    for (auto [in, out] : layer_shapes())
      n += static_cast<std::int64_t>(in) * out + out;
    return n;
  }

  void validate() const {
    if (input_dim <= 0) throw ConfigError("ModelSpec: input_dim must be positive");
    if (num_classes < 2) throw ConfigError("ModelSpec: num_classes must be >= 2");
    for (int h : hidden_layers)
      if (h <= 0) throw ConfigError("ModelSpec: hidden layer widths must be positive");
  }

  bool operator==(const ModelSpec&) const = default;
};

// Parameters live in one flat vector, layer-major: for each layer the
// row-major (out x in) weight block, then the out biases.
struct Model {
  ModelSpec spec;
  std::vector<double> parameters;
  std::uint64_t rng_seed = 0;
};

namespace detail {

struct LayerView {
  const double* w;  // row-major, out x in
  const double* b;
  int in;
  int out;
};

inline std::vector<LayerView> layer_views(const ModelSpec& spec,
                                          const std::vector<double>& params) {
  std::vector<LayerView> views;
  std::size_t offset = 0;
  for (auto [in, out] : spec.layer_shapes()) {
    LayerView v;
    v.w = params.data() + offset;
    offset += static_cast<std::size_t>(in) * static_cast<std::size_t>(out);
    v.b = params.data() + offset;
    offset += static_cast<std::size_t>(out);
    v.in = in;
    v.out = out;
    views.push_back(v);
  }
  return views;
}

}  // namespace detail

// Glorot-uniform weights (±sqrt(6/(fan_in+fan_out))) drawn in parameter
// order from a SplitMix64 stream keyed by the seed; biases start at zero.
// Identical (spec, seed) always yields bit-identical parameters.
inline Model init_model(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  Model m;
  m.spec = spec;
  m.rng_seed = seed;
  m.parameters.assign(static_cast<std::size_t>(spec.parameter_count()), 0.0);
  Rng rng(derive_seed(seed, "model-init"));
  std::size_t offset = 0;
  for (auto [in, out] : spec.layer_shapes()) {
    const double bound = std::sqrt(6.0 / (in + out));
    const std::size_t weights = static_cast<std::size_t>(in) * static_cast<std::size_t>(out);
    for (std::size_t i = 0; i < weights; ++i)
      m.parameters[offset + i] = rng.next_uniform(-bound, bound);
    offset += weights + static_cast<std::size_t>(out);  // biases stay zero
  }
  return m;
}

namespace detail {

inline double activate(Activation a, double x) {
  return a == Activation::kRelu ? (x > 0.0 ? x : 0.0) : std::tanh(x);
}

// Derivative expressed in terms of pre-activation x.
inline double activate_grad(Activation a, double x) {
  if (a == Activation::kRelu) return x > 0.0 ? 1.0 : 0.0;
  const double t = std::tanh(x);
  return 1.0 - t * t;
}

// X (n x in) -> X W^T + b (n x out).
inline Matrix affine(const Matrix& x, const LayerView& layer) {
  Matrix out(x.rows(), layer.out);
  for (int r = 0; r < x.rows(); ++r) {
    const double* xr = x.row(r);
    double* yr = out.row(r);
    for (int o = 0; o < layer.out; ++o) {
      const double* wrow = layer.w + static_cast<std::size_t>(o) * layer.in;
      double acc = layer.b[o];
      for (int j = 0; j < layer.in; ++j) acc += xr[j] * wrow[j];
      yr[o] = acc;
    }
  }
  return out;
}

}  // namespace detail

// Per-layer activations kept around for backpropagation. post[0] is the
// input batch; pre[l] the pre-activation of layer l; post[l+1] its output.
struct ForwardTrace {
  std::vector<Matrix> pre;
  std::vector<Matrix> post;
  const Matrix& logits() const { return post.back(); }
};

inline ForwardTrace forward_traced(const Model& model, const Matrix& features) {
  if (features.cols() != model.spec.input_dim)
    throw ShapeError("forward: features have " + std::to_string(features.cols()) +
                     " columns, model expects " + std::to_string(model.spec.input_dim));
  const auto layers = detail::layer_views(model.spec, model.parameters);
  ForwardTrace trace;
  trace.post.push_back(features);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Matrix z = detail::affine(trace.post.back(), layers[l]);
    const bool last = (l + 1 == layers.size());
    trace.pre.push_back(z);
    if (last) {
      trace.post.push_back(std::move(z));  // output layer is linear
    } else {
      Matrix a = z;
      for (double& v : a.data()) v = detail::activate(model.spec.activation, v);
      trace.post.push_back(std::move(a));
    }
  }
  return trace;
}

// Logits for a batch; rows = samples, cols = num_classes. Pure.
inline Matrix forward(const Model& model, const Matrix& features) {
  return forward_traced(model, features).logits();
}

}  // namespace fedkd
