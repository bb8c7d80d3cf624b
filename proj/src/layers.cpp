#include "fnet/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "fnet/rng.hpp"

namespace fnet {
namespace {

Tensor uniform_init(const Shape& shape, double limit, std::uint64_t seed) {
  Tensor t(shape);
  Rng rng(seed);
  for (float& v : t.data()) v = static_cast<float>(rng.uniform(-limit, limit));
  return t;
}

}  // namespace

Tensor he_uniform_init(const Shape& shape, std::size_t fan_in, std::uint64_t seed) {
  if (fan_in == 0) throw UsageError("he_uniform_init: fan_in must be at least 1");
  return uniform_init(shape, std::sqrt(6.0 / static_cast<double>(fan_in)), seed);
}

Tensor glorot_uniform_init(const Shape& shape, std::size_t fan_in, std::size_t fan_out,
                           std::uint64_t seed) {
  if (fan_in + fan_out == 0) throw UsageError("glorot_uniform_init: empty fan");
  return uniform_init(shape, std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)), seed);
}

namespace kernels {

template <typename T>
void im2col(const T* x, std::size_t h, std::size_t w, std::size_t c, std::size_t k, T* col) {
  const std::size_t ho = h - k + 1;
  const std::size_t wo = w - k + 1;
  const std::size_t span = k * c;  // one kernel row is contiguous in x
  for (std::size_t oy = 0; oy < ho; ++oy) {
    for (std::size_t ox = 0; ox < wo; ++ox) {
      T* dst = col + (oy * wo + ox) * k * span;
      for (std::size_t ky = 0; ky < k; ++ky) {
        std::memcpy(dst + ky * span, x + ((oy + ky) * w + ox) * c, span * sizeof(T));
      }
    }
  }
}

template <typename T>
void col2im(const T* col, std::size_t h, std::size_t w, std::size_t c, std::size_t k, T* dx) {
  const std::size_t ho = h - k + 1;
  const std::size_t wo = w - k + 1;
  const std::size_t span = k * c;
  for (std::size_t oy = 0; oy < ho; ++oy) {
    for (std::size_t ox = 0; ox < wo; ++ox) {
      const T* src = col + (oy * wo + ox) * k * span;
      for (std::size_t ky = 0; ky < k; ++ky) {
        T* dst = dx + ((oy + ky) * w + ox) * c;
        const T* s = src + ky * span;
        for (std::size_t j = 0; j < span; ++j) dst[j] += s[j];
      }
    }
  }
}

template void im2col<float>(const float*, std::size_t, std::size_t, std::size_t, std::size_t,
                            float*);
template void im2col<double>(const double*, std::size_t, std::size_t, std::size_t, std::size_t,
                             double*);
template void col2im<float>(const float*, std::size_t, std::size_t, std::size_t, std::size_t,
                            float*);
template void col2im<double>(const double*, std::size_t, std::size_t, std::size_t, std::size_t,
                             double*);

}  // namespace kernels

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& x, const BasicTensor<T>& w,
                              const BasicTensor<T>& b) {
  if (x.rank() != 3 || w.rank() != 4 || b.rank() != 1) {
    throw ShapeError("conv2d expects x [H,W,C], w [k,k,Cin,Cout], b [Cout]; got " +
                     shape_to_string(x.shape()) + ", " + shape_to_string(w.shape()) + ", " +
                     shape_to_string(b.shape()));
  }
  const std::size_t h = x.dim(0), wd = x.dim(1), c = x.dim(2);
  const std::size_t k = w.dim(0), cout = w.dim(3);
  if (w.dim(1) != k || w.dim(2) != c || b.dim(0) != cout) {
    throw ShapeError("conv2d weight " + shape_to_string(w.shape()) + " / bias " +
                     shape_to_string(b.shape()) + " do not fit input " +
                     shape_to_string(x.shape()));
  }
  if (h < k || wd < k) {
    throw ShapeError("conv2d kernel " + std::to_string(k) + "x" + std::to_string(k) +
                     " larger than input " + shape_to_string(x.shape()));
  }
  const std::size_t ho = h - k + 1, wo = wd - k + 1, kk = k * k * c;
  std::vector<T> col(ho * wo * kk);
  kernels::im2col(x.raw(), h, wd, c, k, col.data());
  BasicTensor<T> out({ho, wo, cout});
  for (std::size_t i = 0; i < ho * wo; ++i) {
    std::copy(b.raw(), b.raw() + cout, out.raw() + i * cout);
  }
  gemm(false, false, ho * wo, cout, kk, T{1}, col.data(), kk, w.raw(), cout, T{1}, out.raw(),
       cout);
  return out;
}

template <typename T>
PoolResult<T> maxpool2d_forward(const BasicTensor<T>& x) {
  if (x.rank() != 3 || x.dim(0) < 2 || x.dim(1) < 2) {
    throw ShapeError("maxpool2d needs an [H,W,C] input of at least 2x2, got " +
                     shape_to_string(x.shape()));
  }
  const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  const std::size_t ho = h / 2, wo = w / 2;
  PoolResult<T> r{BasicTensor<T>({ho, wo, c}), std::vector<std::uint32_t>(ho * wo * c)};
  for (std::size_t oy = 0; oy < ho; ++oy) {
    for (std::size_t ox = 0; ox < wo; ++ox) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        std::size_t best = ((2 * oy) * w + 2 * ox) * c + ch;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = ((2 * oy + dy) * w + 2 * ox + dx) * c + ch;
            if (x[idx] > x[best]) best = idx;
          }
        }
        const std::size_t o = (oy * wo + ox) * c + ch;
        r.out[o] = x[best];
        r.argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return r;
}

template <typename T>
BasicTensor<T> dense_forward(const BasicTensor<T>& x, const BasicTensor<T>& w,
                             const BasicTensor<T>& b) {
  if (w.rank() != 2 || b.rank() != 1 || x.size() != w.dim(0) || b.dim(0) != w.dim(1)) {
    throw ShapeError("dense shape mismatch: x " + shape_to_string(x.shape()) + ", w " +
                     shape_to_string(w.shape()) + ", b " + shape_to_string(b.shape()));
  }
  const std::size_t n = w.dim(0), m = w.dim(1);
  BasicTensor<T> out = b;
  gemm(false, false, 1, m, n, T{1}, x.raw(), n, w.raw(), m, T{1}, out.raw(), m);
  return out;
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
  BasicTensor<T> out = x;
  for (T& v : out.data()) v = v > T{0} ? v : T{0};
  return out;
}

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits) {
  if (logits.rank() == 0 || logits.empty()) throw ShapeError("softmax of an empty tensor");
  const std::size_t width = logits.shape().back();
  BasicTensor<T> out = logits;
  for (std::size_t r = 0; r < out.size() / width; ++r) {
    T* row = out.raw() + r * width;
    const T top = *std::max_element(row, row + width);
    T sum{0};
    for (std::size_t i = 0; i < width; ++i) {
      row[i] = std::exp(row[i] - top);
      sum += row[i];
    }
    for (std::size_t i = 0; i < width; ++i) row[i] /= sum;
  }
  return out;
}

template <typename T>
DropoutResult<T> dropout_forward(const BasicTensor<T>& x, double rate, Mode mode,
                                 std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw UsageError("dropout rate must lie in [0, 1)");
  DropoutResult<T> r{x, {}};
  if (mode == Mode::Eval || rate == 0.0) return r;
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  Rng rng(seed);
  r.keep.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const bool keep = rng.uniform01() >= rate;
    r.keep[i] = keep ? 1 : 0;
    r.out[i] = keep ? r.out[i] * scale : T{0};
  }
  return r;
}

template <typename T>
LossResult<T> sparse_ce_loss(const BasicTensor<T>& probs, std::span<const int> labels) {
  if (probs.rank() != 2 || probs.dim(0) != labels.size()) {
    throw ShapeError("loss expects probs [B,C] with B labels; got " +
                     shape_to_string(probs.shape()) + " and " + std::to_string(labels.size()) +
                     " labels");
  }
  const std::size_t batch = probs.dim(0), classes = probs.dim(1);
  LossResult<T> r{0.0, probs};
  const T inv_b = T{1} / static_cast<T>(batch);
  double total = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw UsageError("label " + std::to_string(y) + " out of range for " +
                       std::to_string(classes) + " classes");
    }
    const double p = std::clamp(static_cast<double>(probs.at(i, y)), 1e-7, 1.0);
    total -= std::log(p);
    T* g = r.grad_logits.raw() + i * classes;
    g[y] -= T{1};
    for (std::size_t c = 0; c < classes; ++c) g[c] *= inv_b;
  }
  r.loss = total / static_cast<double>(batch);
  return r;
}

#define FNET_INSTANTIATE(T)                                                                      \
  template BasicTensor<T> conv2d_forward<T>(const BasicTensor<T>&, const BasicTensor<T>&,        \
                                            const BasicTensor<T>&);                              \
  template PoolResult<T> maxpool2d_forward<T>(const BasicTensor<T>&);                            \
  template BasicTensor<T> dense_forward<T>(const BasicTensor<T>&, const BasicTensor<T>&,         \
                                           const BasicTensor<T>&);                               \
  template BasicTensor<T> relu<T>(const BasicTensor<T>&);                                        \
  template BasicTensor<T> softmax<T>(const BasicTensor<T>&);                                     \
  template DropoutResult<T> dropout_forward<T>(const BasicTensor<T>&, double, Mode,              \
                                               std::uint64_t);                                   \
  template LossResult<T> sparse_ce_loss<T>(const BasicTensor<T>&, std::span<const int>);

FNET_INSTANTIATE(float)
FNET_INSTANTIATE(double)

#undef FNET_INSTANTIATE

}  // namespace fnet
