#include "fnet/model.hpp"

#include <algorithm>
#include <cstring>

#include "fnet/parallel.hpp"
#include "fnet/rng.hpp"

namespace fnet {

void ModelSpec::validate() const {
  if (conv_filters == 0 || dense_units == 0 || classes < 2 || input_channels == 0) {
    throw UsageError("model spec needs positive filters, units, channels and >= 2 classes");
  }
  if (kernel_size == 0 || kernel_size % 2 == 0) {
    throw UsageError("kernel size must be odd, got " + std::to_string(kernel_size));
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw UsageError("dropout rate must lie in [0, 1)");
  }
  if (input_side < kernel_size || conv1_side() < 2 || pool1_side() < kernel_size ||
      conv2_side() < 2) {
    throw ShapeError("input side " + std::to_string(input_side) + " too small for kernel " +
                     std::to_string(kernel_size));
  }
}

std::size_t ModelSpec::conv_parameter_count() const {
  const std::size_t k2 = kernel_size * kernel_size;
  return (k2 * input_channels * conv_filters + conv_filters) +
         (k2 * conv_filters * conv_filters + conv_filters);
}

std::size_t ModelSpec::dense1_parameter_count() const {
  return flatten_dim() * dense_units + dense_units;
}

std::size_t ModelSpec::dense2_parameter_count() const {
  return dense_units * classes + classes;
}

std::size_t ModelSpec::parameter_count() const {
  return conv_parameter_count() + dense1_parameter_count() + dense2_parameter_count();
}

template <typename T>
BasicParams<T> BasicParams<T>::zeros(const ModelSpec& spec) {
  spec.validate();
  const std::size_t k = spec.kernel_size, f = spec.conv_filters, u = spec.dense_units;
  BasicParams p;
  p.conv1_w = BasicTensor<T>({k, k, spec.input_channels, f});
  p.conv1_b = BasicTensor<T>({f});
  p.conv2_w = BasicTensor<T>({k, k, f, f});
  p.conv2_b = BasicTensor<T>({f});
  p.dense1_w = BasicTensor<T>({spec.flatten_dim(), u});
  p.dense1_b = BasicTensor<T>({u});
  p.dense2_w = BasicTensor<T>({u, spec.classes});
  p.dense2_b = BasicTensor<T>({spec.classes});
  return p;
}

template <typename T>
void BasicParams<T>::check_shapes(const ModelSpec& spec) const {
  const BasicParams expected = zeros(spec);
  const BasicTensor<T>* want[] = {&expected.conv1_w, &expected.conv1_b, &expected.conv2_w,
                                  &expected.conv2_b, &expected.dense1_w, &expected.dense1_b,
                                  &expected.dense2_w, &expected.dense2_b};
  std::size_t i = 0;
  for_each([&](const char* name, const BasicTensor<T>& t) {
    if (t.shape() != want[i]->shape()) {
      throw ShapeError(std::string("parameter ") + name + " has shape " +
                       shape_to_string(t.shape()) + ", model expects " +
                       shape_to_string(want[i]->shape()));
    }
    ++i;
  });
}

template struct BasicParams<float>;
template struct BasicParams<double>;

Params64 widen(const Params& p) {
  Params64 out;
  auto cvt = [](const Tensor& t) {
    std::vector<double> d(t.data().begin(), t.data().end());
    return Tensor64(t.shape(), std::move(d));
  };
  out.conv1_w = cvt(p.conv1_w); out.conv1_b = cvt(p.conv1_b);
  out.conv2_w = cvt(p.conv2_w); out.conv2_b = cvt(p.conv2_b);
  out.dense1_w = cvt(p.dense1_w); out.dense1_b = cvt(p.dense1_b);
  out.dense2_w = cvt(p.dense2_w); out.dense2_b = cvt(p.dense2_b);
  return out;
}

Params init_params(const ModelSpec& spec, std::uint64_t seed) {
  Params p = Params::zeros(spec);
  const std::size_t k2 = spec.kernel_size * spec.kernel_size;
  p.conv1_w = he_uniform_init(p.conv1_w.shape(), k2 * spec.input_channels,
                              derive_seed(seed, "conv1.w"));
  p.conv2_w = he_uniform_init(p.conv2_w.shape(), k2 * spec.conv_filters,
                              derive_seed(seed, "conv2.w"));
  p.dense1_w = glorot_uniform_init(p.dense1_w.shape(), spec.flatten_dim(), spec.dense_units,
                                   derive_seed(seed, "dense1.w"));
  p.dense2_w = glorot_uniform_init(p.dense2_w.shape(), spec.dense_units, spec.classes,
                                   derive_seed(seed, "dense2.w"));
  return p;
}

namespace {

// ---- per-sample pieces -----------------------------------------------------

template <typename T>
void conv_relu(const T* in, std::size_t side, std::size_t cin, std::size_t k, const T* w,
               const T* b, std::size_t cout, T* out, std::vector<T>& col) {
  const std::size_t os = side - k + 1, kk = k * k * cin;
  col.resize(os * os * kk);
  kernels::im2col(in, side, side, cin, k, col.data());
  for (std::size_t i = 0; i < os * os; ++i) std::copy(b, b + cout, out + i * cout);
  gemm(false, false, os * os, cout, kk, T{1}, col.data(), kk, w, cout, T{1}, out, cout);
  for (std::size_t i = 0; i < os * os * cout; ++i) out[i] = out[i] > T{0} ? out[i] : T{0};
}

template <typename T>
void pool(const T* in, std::size_t side, std::size_t c, T* out, std::uint32_t* argmax) {
  const std::size_t os = side / 2;
  for (std::size_t oy = 0; oy < os; ++oy) {
    for (std::size_t ox = 0; ox < os; ++ox) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        std::size_t best = ((2 * oy) * side + 2 * ox) * c + ch;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = ((2 * oy + dy) * side + 2 * ox + dx) * c + ch;
            if (in[idx] > in[best]) best = idx;
          }
        }
        const std::size_t o = (oy * os + ox) * c + ch;
        out[o] = in[best];
        argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
}

// Same stream as dropout_forward so single-example and batched paths agree.
template <typename T>
void dropout(const T* in, std::size_t n, double rate, std::uint64_t seed, T* out,
             std::uint8_t* keep) {
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const bool k = rng.uniform01() >= rate;
    keep[i] = k ? 1 : 0;
    out[i] = k ? in[i] * scale : T{0};
  }
}

template <typename T>
void column_sums_into(const T* m, std::size_t rows, std::size_t cols, T* out) {
  std::fill(out, out + cols, T{0});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c] += m[r * cols + c];
  }
}

constexpr std::size_t kRowChunk = 1024;

}  // namespace

template <typename T>
BasicActivationTrace<T> model_forward(const ModelSpec& spec, const BasicParams<T>& params,
                                      const BasicTensor<T>& x, Mode mode, std::uint64_t seed) {
  spec.validate();
  params.check_shapes(spec);
  const std::size_t s = spec.input_side, cin = spec.input_channels;
  if (x.rank() != 4 || x.dim(1) != s || x.dim(2) != s || x.dim(3) != cin) {
    throw ShapeError("input layer expects [B," + std::to_string(s) + "," + std::to_string(s) +
                     "," + std::to_string(cin) + "], got " + shape_to_string(x.shape()));
  }
  const std::size_t batch = x.dim(0), f = spec.conv_filters, k = spec.kernel_size;
  const std::size_t c1 = spec.conv1_side(), p1 = spec.pool1_side();
  const std::size_t c2 = spec.conv2_side(), p2 = spec.pool2_side();
  const std::size_t d = spec.flatten_dim(), u = spec.dense_units, nc = spec.classes;
  const bool drop = mode == Mode::Train && spec.dropout_rate > 0.0;

  BasicActivationTrace<T> tr;
  tr.input = x;
  tr.conv1 = BasicTensor<T>({batch, c1, c1, f});
  tr.pool1 = BasicTensor<T>({batch, p1, p1, f});
  tr.conv2 = BasicTensor<T>({batch, c2, c2, f});
  tr.pool2 = BasicTensor<T>({batch, p2, p2, f});
  tr.pool1_argmax.resize(batch * p1 * p1 * f);
  tr.pool2_argmax.resize(batch * p2 * p2 * f);
  if (drop) {
    tr.drop1 = BasicTensor<T>(tr.pool1.shape());
    tr.drop2 = BasicTensor<T>(tr.pool2.shape());
    tr.drop1_keep.resize(tr.pool1.size());
    tr.drop2_keep.resize(tr.pool2.size());
  }

  const std::size_t n_in = s * s * cin, n_c1 = c1 * c1 * f, n_p1 = p1 * p1 * f;
  const std::size_t n_c2 = c2 * c2 * f, n_p2 = p2 * p2 * f;
  parallel_for(batch, [&](std::size_t b) {
    thread_local std::vector<T> col;
    conv_relu(x.raw() + b * n_in, s, cin, k, params.conv1_w.raw(), params.conv1_b.raw(), f,
              tr.conv1.raw() + b * n_c1, col);
    pool(tr.conv1.raw() + b * n_c1, c1, f, tr.pool1.raw() + b * n_p1,
         tr.pool1_argmax.data() + b * n_p1);
    const T* next = tr.pool1.raw() + b * n_p1;
    if (drop) {
      dropout(next, n_p1, spec.dropout_rate, mix64(seed, 2 * b), tr.drop1.raw() + b * n_p1,
              tr.drop1_keep.data() + b * n_p1);
      next = tr.drop1.raw() + b * n_p1;
    }
    conv_relu(next, p1, f, k, params.conv2_w.raw(), params.conv2_b.raw(), f,
              tr.conv2.raw() + b * n_c2, col);
    pool(tr.conv2.raw() + b * n_c2, c2, f, tr.pool2.raw() + b * n_p2,
         tr.pool2_argmax.data() + b * n_p2);
    if (drop) {
      dropout(tr.pool2.raw() + b * n_p2, n_p2, spec.dropout_rate, mix64(seed, 2 * b + 1),
              tr.drop2.raw() + b * n_p2, tr.drop2_keep.data() + b * n_p2);
    }
  });

  tr.flatten = (drop ? tr.drop2 : tr.pool2).reshaped({batch, d});

  tr.dense1 = BasicTensor<T>({batch, u});
  for (std::size_t b = 0; b < batch; ++b) {
    std::copy(params.dense1_b.raw(), params.dense1_b.raw() + u, tr.dense1.raw() + b * u);
  }
  gemm(false, false, batch, u, d, T{1}, tr.flatten.raw(), d, params.dense1_w.raw(), u, T{1},
       tr.dense1.raw(), u);
  for (T& v : tr.dense1.data()) v = v > T{0} ? v : T{0};

  BasicTensor<T> logits({batch, nc});
  for (std::size_t b = 0; b < batch; ++b) {
    std::copy(params.dense2_b.raw(), params.dense2_b.raw() + nc, logits.raw() + b * nc);
  }
  gemm(false, false, batch, nc, u, T{1}, tr.dense1.raw(), u, params.dense2_w.raw(), nc, T{1},
       logits.raw(), nc);
  tr.output = softmax(logits);
  return tr;
}

template <typename T>
BasicParams<T> model_backward(const ModelSpec& spec, const BasicParams<T>& params,
                              const BasicActivationTrace<T>& tr, std::span<const int> labels) {
  spec.validate();
  params.check_shapes(spec);
  const std::size_t batch = tr.batch();
  if (batch == 0 || tr.output.empty() || labels.size() != batch) {
    throw ShapeError("backward: trace holds " + std::to_string(batch) + " examples but " +
                     std::to_string(labels.size()) + " labels were given");
  }
  if (tr.input.dim(1) != spec.input_side || tr.conv1.dim(3) != spec.conv_filters) {
    throw ShapeError("backward: trace does not come from this model spec");
  }
  const std::size_t f = spec.conv_filters, k = spec.kernel_size, cin = spec.input_channels;
  const std::size_t s = spec.input_side, c1 = spec.conv1_side(), p1 = spec.pool1_side();
  const std::size_t c2 = spec.conv2_side(), p2 = spec.pool2_side();
  const std::size_t d = spec.flatten_dim(), u = spec.dense_units, nc = spec.classes;
  const bool drop = tr.dropout_active();
  const T scale = drop ? static_cast<T>(1.0 / (1.0 - spec.dropout_rate)) : T{1};

  BasicParams<T> g = BasicParams<T>::zeros(spec);

  // softmax + cross-entropy
  BasicTensor<T> dlogits = tr.output;
  const T inv_b = T{1} / static_cast<T>(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    const int y = labels[b];
    if (y < 0 || static_cast<std::size_t>(y) >= nc) {
      throw UsageError("label " + std::to_string(y) + " out of range");
    }
    T* row = dlogits.raw() + b * nc;
    row[y] -= T{1};
    for (std::size_t c = 0; c < nc; ++c) row[c] *= inv_b;
  }

  // output dense
  gemm(true, false, u, nc, batch, T{1}, tr.dense1.raw(), u, dlogits.raw(), nc, T{0},
       g.dense2_w.raw(), nc);
  column_sums_into(dlogits.raw(), batch, nc, g.dense2_b.raw());
  BasicTensor<T> dh({batch, u});
  gemm(false, true, batch, u, nc, T{1}, dlogits.raw(), nc, params.dense2_w.raw(), nc, T{0},
       dh.raw(), u);
  for (std::size_t i = 0; i < dh.size(); ++i) {
    if (!(tr.dense1[i] > T{0})) dh[i] = T{0};
  }

  // hidden dense; row chunks are fixed so results do not depend on threads
  const std::size_t chunks = (d + kRowChunk - 1) / kRowChunk;
  BasicTensor<T> dflat({batch, d});
  parallel_for(chunks, [&](std::size_t ci) {
    const std::size_t r0 = ci * kRowChunk, rows = std::min(d, r0 + kRowChunk) - r0;
    gemm(true, false, rows, u, batch, T{1}, tr.flatten.raw() + r0, d, dh.raw(), u, T{0},
         g.dense1_w.raw() + r0 * u, u);
    gemm(false, true, batch, rows, u, T{1}, dh.raw(), u, params.dense1_w.raw() + r0 * u, u, T{0},
         dflat.raw() + r0, d);
  });
  column_sums_into(dh.raw(), batch, u, g.dense1_b.raw());

  // convolutional stack, one example at a time
  const std::size_t kk1 = k * k * cin, kk2 = k * k * f;
  const std::size_t n_in = s * s * cin, n_c1 = c1 * c1 * f, n_p1 = p1 * p1 * f;
  const std::size_t n_c2 = c2 * c2 * f, n_p2 = p2 * p2 * f;
  std::vector<T> w2_parts(batch * kk2 * f), b2_parts(batch * f);
  std::vector<T> w1_parts(batch * kk1 * f), b1_parts(batch * f);

  parallel_for(batch, [&](std::size_t b) {
    // scratch reused across samples; these run to tens of megabytes
    thread_local std::vector<T> grad_pool2, dconv2, col, dpool1, dconv1;
    grad_pool2.assign(dflat.raw() + b * n_p2, dflat.raw() + (b + 1) * n_p2);
    if (drop) {
      const std::uint8_t* keep = tr.drop2_keep.data() + b * n_p2;
      for (std::size_t i = 0; i < n_p2; ++i) grad_pool2[i] = keep[i] ? grad_pool2[i] * scale : T{0};
    }
    dconv2.assign(n_c2, T{0});
    const std::uint32_t* arg2 = tr.pool2_argmax.data() + b * n_p2;
    for (std::size_t i = 0; i < n_p2; ++i) dconv2[arg2[i]] += grad_pool2[i];
    const T* conv2 = tr.conv2.raw() + b * n_c2;
    for (std::size_t i = 0; i < n_c2; ++i) {
      if (!(conv2[i] > T{0})) dconv2[i] = T{0};
    }

    const T* in2 = (drop ? tr.drop1 : tr.pool1).raw() + b * n_p1;
    col.resize(c2 * c2 * kk2);
    kernels::im2col(in2, p1, p1, f, k, col.data());
    gemm(true, false, kk2, f, c2 * c2, T{1}, col.data(), kk2, dconv2.data(), f, T{0},
         w2_parts.data() + b * kk2 * f, f);
    column_sums_into(dconv2.data(), c2 * c2, f, b2_parts.data() + b * f);

    // reuse col as d(col)
    gemm(false, true, c2 * c2, kk2, f, T{1}, dconv2.data(), f, params.conv2_w.raw(), f, T{0},
         col.data(), kk2);
    dpool1.assign(n_p1, T{0});
    kernels::col2im(col.data(), p1, p1, f, k, dpool1.data());
    if (drop) {
      const std::uint8_t* keep = tr.drop1_keep.data() + b * n_p1;
      for (std::size_t i = 0; i < n_p1; ++i) dpool1[i] = keep[i] ? dpool1[i] * scale : T{0};
    }

    dconv1.assign(n_c1, T{0});
    const std::uint32_t* arg1 = tr.pool1_argmax.data() + b * n_p1;
    for (std::size_t i = 0; i < n_p1; ++i) dconv1[arg1[i]] += dpool1[i];
    const T* conv1 = tr.conv1.raw() + b * n_c1;
    for (std::size_t i = 0; i < n_c1; ++i) {
      if (!(conv1[i] > T{0})) dconv1[i] = T{0};
    }
    col.resize(c1 * c1 * kk1);
    kernels::im2col(tr.input.raw() + b * n_in, s, s, cin, k, col.data());
    gemm(true, false, kk1, f, c1 * c1, T{1}, col.data(), kk1, dconv1.data(), f, T{0},
         w1_parts.data() + b * kk1 * f, f);
    column_sums_into(dconv1.data(), c1 * c1, f, b1_parts.data() + b * f);
  });

  // fixed-order reduction over the batch
  auto reduce = [batch](const std::vector<T>& parts, BasicTensor<T>& out) {
    const std::size_t n = out.size();
    const std::size_t n_chunks = (n + kRowChunk - 1) / kRowChunk;
    parallel_for(n_chunks, [&](std::size_t ci) {
      const std::size_t lo = ci * kRowChunk, hi = std::min(n, lo + kRowChunk);
      for (std::size_t b = 0; b < batch; ++b) {
        const T* src = parts.data() + b * n;
        for (std::size_t i = lo; i < hi; ++i) out[i] += src[i];
      }
    });
  };
  reduce(w2_parts, g.conv2_w);
  reduce(b2_parts, g.conv2_b);
  reduce(w1_parts, g.conv1_w);
  reduce(b1_parts, g.conv1_b);
  return g;
}

template <typename T>
StepGradients<T> loss_and_gradients(const ModelSpec& spec, const BasicParams<T>& params,
                                    const BasicTensor<T>& x, std::span<const int> labels,
                                    Mode mode, std::uint64_t seed) {
  auto tr = model_forward(spec, params, x, mode, seed);
  StepGradients<T> out;
  out.loss = sparse_ce_loss(tr.output, labels).loss;
  out.grads = model_backward(spec, params, tr, labels);
  out.probs = std::move(tr.output);
  return out;
}

#define FNET_INSTANTIATE(T)                                                                   \
  template BasicActivationTrace<T> model_forward<T>(const ModelSpec&, const BasicParams<T>&,  \
                                                    const BasicTensor<T>&, Mode,              \
                                                    std::uint64_t);                           \
  template BasicParams<T> model_backward<T>(const ModelSpec&, const BasicParams<T>&,          \
                                            const BasicActivationTrace<T>&,                   \
                                            std::span<const int>);                            \
  template StepGradients<T> loss_and_gradients<T>(const ModelSpec&, const BasicParams<T>&,    \
                                                  const BasicTensor<T>&, std::span<const int>, \
                                                  Mode, std::uint64_t);

FNET_INSTANTIATE(float)
FNET_INSTANTIATE(double)

#undef FNET_INSTANTIATE

}  // namespace fnet
