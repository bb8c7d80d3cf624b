#pragma once

#include <cstdint>
#include <vector>

#include "fnet/tensor.hpp"

namespace fnet {

enum class Mode { Train, Eval };

/// Uniform on [-sqrt(6 / fan_in), +sqrt(6 / fan_in)].
Tensor he_uniform_init(const Shape& shape, std::size_t fan_in, std::uint64_t seed);
/// Uniform on [-sqrt(6 / (fan_in + fan_out)), +...]; the dense-layer default.
Tensor glorot_uniform_init(const Shape& shape, std::size_t fan_in, std::size_t fan_out,
                           std::uint64_t seed);

// Single-example kernels. Layouts are channel-last: x [H, W, C],
// conv weights [k, k, Cin, Cout].

/// Valid cross-correlation, stride 1, bias per output channel. No activation.
template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& x, const BasicTensor<T>& w,
                              const BasicTensor<T>& b);

template <typename T>
struct PoolResult {
  BasicTensor<T> out;
  std::vector<std::uint32_t> argmax;  // flat input index per output element
};

/// 2x2 windows, stride 2; trailing odd rows/columns are dropped.
template <typename T>
PoolResult<T> maxpool2d_forward(const BasicTensor<T>& x);

/// x [n] . w [n, m] + b [m]
template <typename T>
BasicTensor<T> dense_forward(const BasicTensor<T>& x, const BasicTensor<T>& w,
                             const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x);

/// Softmax over the last axis with max subtraction.
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits);

template <typename T>
struct DropoutResult {
  BasicTensor<T> out;
  std::vector<std::uint8_t> keep;  // empty when dropout is a no-op
};

/// Inverted dropout: survivors scaled by 1 / (1 - rate). Identity in eval
/// mode or at rate 0.
template <typename T>
DropoutResult<T> dropout_forward(const BasicTensor<T>& x, double rate, Mode mode,
                                 std::uint64_t seed);

template <typename T>
struct LossResult {
  double loss = 0.0;
  BasicTensor<T> grad_logits;  // [B, C], softmax folded in
};

/// Mean of -ln(clamp(p[label], 1e-7, 1)) and (probs - onehot) / B.
template <typename T>
LossResult<T> sparse_ce_loss(const BasicTensor<T>& probs, std::span<const int> labels);

// Building blocks shared with the model's backward pass.
namespace kernels {

/// col [Ho*Wo, k*k*C] from x [H, W, C].
template <typename T>
void im2col(const T* x, std::size_t h, std::size_t w, std::size_t c, std::size_t k, T* col);

/// Scatter-add of col back into dx (which must be zeroed by the caller).
template <typename T>
void col2im(const T* col, std::size_t h, std::size_t w, std::size_t c, std::size_t k, T* dx);

}  // namespace kernels

}  // namespace fnet
