#pragma once

// Dense feed-forward embedding network with hand-written backprop and SGD.
//
// Hidden layers use max(0, x) with derivative 0 at 0; the output layer is
// affine, optionally followed by L2 normalization.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tripdist/errors.hpp"
#include "tripdist/numerics.hpp"

namespace tripdist {

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;  // out x in, row-major
  std::vector<double> bias;     // out

  DenseLayer() = default;
  DenseLayer(std::size_t in_dim, std::size_t out_dim)
      : in(in_dim), out(out_dim), weights(in_dim * out_dim, 0.0), bias(out_dim, 0.0) {}

  double& w(std::size_t row, std::size_t col) { return weights[row * in + col]; }
  double w(std::size_t row, std::size_t col) const { return weights[row * in + col]; }
};

class MlpModel {
 public:
  MlpModel() = default;

  // All-zero weights.
  MlpModel(std::vector<std::size_t> layer_dims, bool normalize_output)
      : dims_(std::move(layer_dims)), normalize_(normalize_output) {
    if (dims_.size() < 2) throw ContractViolation("MlpModel: need at least input and output dims");
    for (std::size_t d : dims_) detail::require(d >= 1, "MlpModel: layer dims must be positive");
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) layers_.emplace_back(dims_[l], dims_[l + 1]);
  }

  // Uniform in [-s, s] with s = sqrt(6 / (fan_in + fan_out)); zero biases.
  static MlpModel glorot(std::vector<std::size_t> layer_dims, bool normalize_output, Rng& rng) {
    MlpModel m(std::move(layer_dims), normalize_output);
    for (auto& layer : m.layers_) {
      const double s = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
      for (double& w : layer.weights) w = rng.uniform(-s, s);
    }
    return m;
  }

  static MlpModel glorot(std::vector<std::size_t> layer_dims, bool normalize_output,
                         std::uint64_t seed) {
    Rng rng(seed);
    return glorot(std::move(layer_dims), normalize_output, rng);
  }

  const std::vector<std::size_t>& layer_dims() const { return dims_; }
  std::size_t input_dim() const { return dims_.front(); }
  std::size_t output_dim() const { return dims_.back(); }
  bool normalize_output() const { return normalize_; }
  std::size_t n_layers() const { return layers_.size(); }

  const std::vector<DenseLayer>& layers() const { return layers_; }
  // Mutable access invalidates outstanding forward caches.
  std::vector<DenseLayer>& mutable_layers() {
    ++version_;
    return layers_;
  }

  std::uint64_t version() const { return version_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
    return n;
  }

  // FNV-1a over the raw bytes of every parameter.
  std::uint64_t weight_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const std::vector<double>& v) {
      for (double d : v) {
        unsigned char bytes[sizeof(double)];
        std::memcpy(bytes, &d, sizeof d);
        for (unsigned char c : bytes) {
          h ^= c;
          h *= 0x100000001b3ULL;
        }
      }
    };
    for (const auto& l : layers_) {
      mix(l.weights);
      mix(l.bias);
    }
    return h;
  }

  friend bool operator==(const MlpModel& a, const MlpModel& b) {
    if (a.dims_ != b.dims_ || a.normalize_ != b.normalize_) return false;
    for (std::size_t l = 0; l < a.layers_.size(); ++l) {
      if (a.layers_[l].weights != b.layers_[l].weights || a.layers_[l].bias != b.layers_[l].bias)
        return false;
    }
    return true;
  }

 private:
  std::vector<std::size_t> dims_;
  bool normalize_ = true;
  std::vector<DenseLayer> layers_;
  std::uint64_t version_ = 0;
};

struct ForwardCache {
  std::vector<Vector> inputs;  // input to each layer
  std::vector<Vector> pre;     // pre-activation of each layer
  double z_norm = 0.0;         // norm of the final pre-activation (when normalizing)
  Vector output;
  std::vector<std::size_t> dims;
  std::uint64_t model_version = 0;
};

inline std::pair<Vector, ForwardCache> forward(const MlpModel& model, std::span<const double> x) {
  if (x.size() != model.input_dim()) {
    throw ContractViolation("forward: input dim " + std::to_string(x.size()) + " != model input " +
                            std::to_string(model.input_dim()));
  }
  ForwardCache cache;
  cache.dims = model.layer_dims();
  cache.model_version = model.version();
  Vector act(x.begin(), x.end());
  const auto& layers = model.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const DenseLayer& layer = layers[l];
    Vector z(layer.out);
    for (std::size_t r = 0; r < layer.out; ++r) {
      double s = layer.bias[r];
      const double* row = &layer.weights[r * layer.in];
      for (std::size_t c = 0; c < layer.in; ++c) s += row[c] * act[c];
      z[r] = s;
    }
    cache.inputs.push_back(std::move(act));
    cache.pre.push_back(z);
    if (l + 1 < layers.size()) {
      for (double& v : z) v = v > 0.0 ? v : 0.0;
    }
    act = std::move(z);
  }
  if (model.normalize_output()) {
    cache.z_norm = l2_norm(act);
    if (!(cache.z_norm > 0.0)) throw DegenerateInput("forward: zero-norm output cannot be normalized");
    for (double& v : act) v /= cache.z_norm;
  }
  cache.output = act;
  return {std::move(act), std::move(cache)};
}

inline Vector embed(const MlpModel& model, std::span<const double> x) {
  return forward(model, x).first;
}

// Parameter-shaped gradient (or velocity) buffers.
struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> bias;

  static Gradients zeros_like(const MlpModel& model) {
    Gradients g;
    for (const auto& l : model.layers()) {
      g.weights.emplace_back(l.weights.size(), 0.0);
      g.bias.emplace_back(l.bias.size(), 0.0);
    }
    return g;
  }

  bool same_shape(const MlpModel& model) const {
    const auto& layers = model.layers();
    if (weights.size() != layers.size() || bias.size() != layers.size()) return false;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      if (weights[l].size() != layers[l].weights.size() || bias[l].size() != layers[l].bias.size())
        return false;
    }
    return true;
  }
};

// Adds d(loss)/d(params) for one forward pass into `into`, given
// d(loss)/d(embedding).
inline void backward_accumulate(const MlpModel& model, const ForwardCache& cache,
                                std::span<const double> grad_embedding, Gradients& into) {
  if (cache.dims != model.layer_dims() || cache.model_version != model.version()) {
    throw ContractViolation("backward: cache does not belong to the current model state");
  }
  if (grad_embedding.size() != model.output_dim()) {
    throw ContractViolation("backward: gradient dim does not match model output");
  }
  if (!into.same_shape(model)) throw ContractViolation("backward: gradient buffer shape mismatch");

  Vector g(grad_embedding.begin(), grad_embedding.end());
  if (model.normalize_output()) {
    // J = (I - e e^T) / |z|
    const Vector& e = cache.output;
    const double eg = dot(e, g);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = (g[i] - e[i] * eg) / cache.z_norm;
  }
  const auto& layers = model.layers();
  for (std::size_t l = layers.size(); l-- > 0;) {
    const DenseLayer& layer = layers[l];
    if (l + 1 < layers.size()) {
      const Vector& pre = cache.pre[l];
      for (std::size_t r = 0; r < layer.out; ++r)
        if (!(pre[r] > 0.0)) g[r] = 0.0;
    }
    const Vector& in = cache.inputs[l];
    auto& gw = into.weights[l];
    auto& gb = into.bias[l];
    Vector g_in(layer.in, 0.0);
    for (std::size_t r = 0; r < layer.out; ++r) {
      const double gr = g[r];
      if (gr == 0.0) continue;
      gb[r] += gr;
      double* gw_row = &gw[r * layer.in];
      const double* w_row = &layer.weights[r * layer.in];
      for (std::size_t c = 0; c < layer.in; ++c) {
        gw_row[c] += gr * in[c];
        g_in[c] += w_row[c] * gr;
      }
    }
    g = std::move(g_in);
  }
}

inline Gradients backward(const MlpModel& model, const ForwardCache& cache,
                          std::span<const double> grad_embedding) {
  Gradients g = Gradients::zeros_like(model);
  backward_accumulate(model, cache, grad_embedding, g);
  return g;
}

struct SgdState {
  double learning_rate = 0.001;
  double momentum = 0.9;
  Gradients velocity;
  std::uint64_t iteration = 0;

  SgdState() = default;
  SgdState(const MlpModel& model, double lr, double mom)
      : learning_rate(lr), momentum(mom), velocity(Gradients::zeros_like(model)) {
    detail::require(lr > 0.0, "SgdState: learning rate must be > 0");
    detail::require(mom >= 0.0 && mom < 1.0, "SgdState: momentum must be in [0, 1)");
  }
};

// v <- momentum * v - lr * g;  w <- w + v
inline void sgd_step(SgdState& state, MlpModel& model, const Gradients& grads) {
  if (!grads.same_shape(model) || !state.velocity.same_shape(model)) {
    throw ContractViolation("sgd_step: gradient/velocity shape does not match model");
  }
  auto& layers = model.mutable_layers();
  auto update = [&](std::vector<double>& w, std::vector<double>& v, const std::vector<double>& g) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = state.momentum * v[i] - state.learning_rate * g[i];
      w[i] += v[i];
    }
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].weights, state.velocity.weights[l], grads.weights[l]);
    update(layers[l].bias, state.velocity.bias[l], grads.bias[l]);
  }
  ++state.iteration;
}

}  // namespace tripdist
