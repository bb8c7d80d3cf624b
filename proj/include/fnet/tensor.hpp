#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "fnet/error.hpp"

namespace fnet {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

/// Dense row-major array. The shape is fixed at construction; reshaped()
/// returns a new value sharing nothing with the original.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape, T fill = T{0})
      : shape_(std::move(shape)), data_(checked_size(shape_), fill) {}

  BasicTensor(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != checked_size(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_to_string(shape_));
    }
  }

  static BasicTensor from(Shape shape, std::initializer_list<T> values) {
    return BasicTensor(std::move(shape), std::vector<T>(values));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  T* raw() noexcept { return data_.data(); }
  const T* raw() const noexcept { return data_.data(); }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  template <typename... Idx>
  T& at(Idx... idx) {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }
  template <typename... Idx>
  const T& at(Idx... idx) const {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }

  BasicTensor reshaped(Shape shape) const {
    if (checked_size(shape) != data_.size()) {
      throw ShapeError("cannot reshape " + shape_to_string(shape_) + " to " +
                       shape_to_string(shape));
    }
    return BasicTensor(std::move(shape), data_);
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

 private:
  static std::size_t checked_size(const Shape& shape) {
    for (std::size_t d : shape) {
      if (d == 0) throw ShapeError("zero-length dimension in shape " + shape_to_string(shape));
    }
    return shape_size(shape);
  }

  std::size_t offset(std::initializer_list<std::size_t> idx) const {
    if (idx.size() != shape_.size()) {
      throw ShapeError("index rank " + std::to_string(idx.size()) + " for tensor of shape " +
                       shape_to_string(shape_));
    }
    std::size_t off = 0;
    std::size_t axis = 0;
    for (std::size_t i : idx) {
      if (i >= shape_[axis]) {
        throw ShapeError("index out of range on axis " + std::to_string(axis) + " of shape " +
                         shape_to_string(shape_));
      }
      off = off * shape_[axis] + i;
      ++axis;
    }
    return off;
  }

  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

// c[i,j] = sum_p a[i,p] * b[p,j]
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor64 matmul(const Tensor64& a, const Tensor64& b);

template <typename T>
BasicTensor<T> map(const BasicTensor<T>& a, const std::function<T(T)>& f) {
  BasicTensor<T> out = a;
  for (T& v : out.data()) v = f(v);
  return out;
}

template <typename T>
BasicTensor<T> zip(const BasicTensor<T>& a, const BasicTensor<T>& b,
                   const std::function<T(T, T)>& f) {
  if (a.shape() != b.shape()) {
    throw ShapeError("zip shape mismatch: " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
  BasicTensor<T> out = a;
  auto dst = out.data();
  auto rhs = b.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = f(dst[i], rhs[i]);
  return out;
}

/// Index of the maximum along the last axis; ties go to the lowest index.
/// The result has one entry per leading position (a rank-1 input gives one entry).
std::vector<std::size_t> argmax_last_axis(const Tensor& a);

/// Raw GEMM on row-major buffers: C = alpha * op(A) * op(B) + beta * C.
/// Shared by the layer kernels. Deterministic for identical arguments.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          float alpha, const float* a, std::size_t lda, const float* b, std::size_t ldb,
          float beta, float* c, std::size_t ldc);
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          double alpha, const double* a, std::size_t lda, const double* b, std::size_t ldb,
          double beta, double* c, std::size_t ldc);

}  // namespace fnet
