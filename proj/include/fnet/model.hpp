#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fnet/layers.hpp"
#include "fnet/tensor.hpp"

namespace fnet {

/// Conv -> MaxPool -> [Dropout] -> Conv -> MaxPool -> [Dropout] -> Flatten ->
/// Dense(ReLU) -> Dense(softmax). Both convolutions are valid, stride 1, ReLU.
struct ModelSpec {
  std::size_t conv_filters = 64;
  std::size_t kernel_size = 5;
  std::size_t dense_units = 160;
  double dropout_rate = 0.0;
  std::size_t input_side = 100;
  std::size_t input_channels = 3;
  std::size_t classes = 3;

  /// 64 filters, 5x5 kernels, 160 dense units on 100x100x3 input.
  static ModelSpec tuned() { return {}; }

  void validate() const;

  std::size_t conv1_side() const { return input_side - kernel_size + 1; }
  std::size_t pool1_side() const { return conv1_side() / 2; }
  std::size_t conv2_side() const { return pool1_side() - kernel_size + 1; }
  std::size_t pool2_side() const { return conv2_side() / 2; }
  std::size_t flatten_dim() const { return pool2_side() * pool2_side() * conv_filters; }

  std::size_t conv_parameter_count() const;
  std::size_t dense1_parameter_count() const;
  std::size_t dense2_parameter_count() const;
  std::size_t parameter_count() const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

template <typename T>
struct BasicParams {
  BasicTensor<T> conv1_w, conv1_b;
  BasicTensor<T> conv2_w, conv2_b;
  BasicTensor<T> dense1_w, dense1_b;
  BasicTensor<T> dense2_w, dense2_b;

  static BasicParams zeros(const ModelSpec& spec);

  /// Visits every tensor in a fixed order with its stable name.
  template <typename F>
  void for_each(F&& f) {
    f("conv1.w", conv1_w); f("conv1.b", conv1_b);
    f("conv2.w", conv2_w); f("conv2.b", conv2_b);
    f("dense1.w", dense1_w); f("dense1.b", dense1_b);
    f("dense2.w", dense2_w); f("dense2.b", dense2_b);
  }
  template <typename F>
  void for_each(F&& f) const {
    f("conv1.w", conv1_w); f("conv1.b", conv1_b);
    f("conv2.w", conv2_w); f("conv2.b", conv2_b);
    f("dense1.w", dense1_w); f("dense1.b", dense1_b);
    f("dense2.w", dense2_w); f("dense2.b", dense2_b);
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each([&](const char*, const BasicTensor<T>& t) { n += t.size(); });
    return n;
  }

  /// Throws ShapeError naming the first tensor whose shape disagrees with spec.
  void check_shapes(const ModelSpec& spec) const;

  friend bool operator==(const BasicParams&, const BasicParams&) = default;
};

using Params = BasicParams<float>;
using Params64 = BasicParams<double>;

Params64 widen(const Params& p);

/// He-uniform conv kernels, Glorot-uniform dense kernels, zero biases. Each
/// tensor draws from its own sub-seed of `seed`.
Params init_params(const ModelSpec& spec, std::uint64_t seed);

/// Per-layer outputs of one forward pass; batch-major, channel-last.
template <typename T>
struct BasicActivationTrace {
  BasicTensor<T> input;    // [B, S, S, Cin]
  BasicTensor<T> conv1;    // [B, c1, c1, F] after ReLU
  BasicTensor<T> pool1;    // [B, p1, p1, F]
  BasicTensor<T> drop1;    // like pool1; only populated when dropout is active
  BasicTensor<T> conv2;    // [B, c2, c2, F] after ReLU
  BasicTensor<T> pool2;    // [B, p2, p2, F]
  BasicTensor<T> drop2;
  BasicTensor<T> flatten;  // [B, p2*p2*F]
  BasicTensor<T> dense1;   // [B, units] after ReLU
  BasicTensor<T> output;   // [B, classes] softmax probabilities

  std::vector<std::uint32_t> pool1_argmax, pool2_argmax;  // per-sample flat indices
  std::vector<std::uint8_t> drop1_keep, drop2_keep;

  std::size_t batch() const { return input.empty() ? 0 : input.dim(0); }
  bool dropout_active() const { return !drop1_keep.empty(); }
};

using ActivationTrace = BasicActivationTrace<float>;

/// `seed` drives the dropout masks in training mode and is ignored otherwise.
template <typename T>
BasicActivationTrace<T> model_forward(const ModelSpec& spec, const BasicParams<T>& params,
                                      const BasicTensor<T>& x, Mode mode, std::uint64_t seed);

/// Gradients of the mean sparse cross-entropy of `trace.output` against
/// `labels`, reusing the trace's pooling indices and dropout masks.
template <typename T>
BasicParams<T> model_backward(const ModelSpec& spec, const BasicParams<T>& params,
                              const BasicActivationTrace<T>& trace, std::span<const int> labels);

template <typename T>
struct StepGradients {
  double loss = 0.0;
  BasicParams<T> grads;
  BasicTensor<T> probs;
};

/// Forward in the given mode, loss, backward.
template <typename T>
StepGradients<T> loss_and_gradients(const ModelSpec& spec, const BasicParams<T>& params,
                                    const BasicTensor<T>& x, std::span<const int> labels,
                                    Mode mode, std::uint64_t seed);

void save_model(const ModelSpec& spec, const Params& params, const std::filesystem::path& path);
std::pair<ModelSpec, Params> load_model(const std::filesystem::path& path);

}  // namespace fnet
