#pragma once

#include <cstdint>
#include <filesystem>

#include "fnet/model.hpp"

namespace fnet {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;

  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

/// Bias-corrected Adam. Moments mirror the parameter tensors and start at 0.
template <typename T>
struct BasicAdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  BasicParams<T> m;
  BasicParams<T> v;

  static BasicAdamState fresh(const BasicParams<T>& like, AdamConfig config = {});

  friend bool operator==(const BasicAdamState&, const BasicAdamState&) = default;
};

using AdamState = BasicAdamState<float>;

/// t += 1; m = b1 m + (1-b1) g; v = b2 v + (1-b2) g^2;
/// p -= lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps).
/// Rejects shape mismatches and non-finite gradients before touching anything.
template <typename T>
void adam_step(BasicParams<T>& params, const BasicParams<T>& grads, BasicAdamState<T>& state);

/// Model plus optimizer state, in the model container format (kind=checkpoint).
void save_checkpoint(const ModelSpec& spec, const Params& params, const AdamState& state,
                     const std::filesystem::path& path);
struct Checkpoint {
  ModelSpec spec;
  Params params;
  AdamState adam;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace fnet
