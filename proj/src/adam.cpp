#include "fnet/adam.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include "fnet/model_io.hpp"
#include "fnet/parallel.hpp"

namespace fnet {

template <typename T>
BasicAdamState<T> BasicAdamState<T>::fresh(const BasicParams<T>& like, AdamConfig config) {
  BasicAdamState s;
  s.config = config;
  auto zero_like = [](BasicParams<T>& dst, const BasicParams<T>& src) {
    dst = src;
    dst.for_each([](const char*, BasicTensor<T>& t) { t.fill(T{0}); });
  };
  zero_like(s.m, like);
  zero_like(s.v, like);
  return s;
}

template <typename T>
void adam_step(BasicParams<T>& params, const BasicParams<T>& grads, BasicAdamState<T>& state) {
  struct Slot {
    const char* name;
    BasicTensor<T>* p;
    const BasicTensor<T>* g;
    BasicTensor<T>* m;
    BasicTensor<T>* v;
  };
  std::vector<Slot> slots;
  params.for_each([&](const char* name, BasicTensor<T>& t) {
    slots.push_back({name, &t, nullptr, nullptr, nullptr});
  });
  std::size_t i = 0;
  grads.for_each([&](const char*, const BasicTensor<T>& t) { slots.at(i++).g = &t; });
  i = 0;
  state.m.for_each([&](const char*, BasicTensor<T>& t) { slots.at(i++).m = &t; });
  i = 0;
  state.v.for_each([&](const char*, BasicTensor<T>& t) { slots.at(i++).v = &t; });

  for (const Slot& s : slots) {
    if (s.g->shape() != s.p->shape() || s.m->shape() != s.p->shape() ||
        s.v->shape() != s.p->shape()) {
      throw ShapeError(std::string("adam: shape mismatch for ") + s.name + ": param " +
                       shape_to_string(s.p->shape()) + ", grad " + shape_to_string(s.g->shape()));
    }
    for (T g : s.g->data()) {
      if (!std::isfinite(g)) throw NumericError(std::string("adam: non-finite gradient in ") + s.name);
    }
  }

  const AdamConfig& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const T b1 = static_cast<T>(c.beta1), b2 = static_cast<T>(c.beta2);
  const T one_b1 = static_cast<T>(1.0 - c.beta1), one_b2 = static_cast<T>(1.0 - c.beta2);
  const T corr1 = static_cast<T>(1.0 - std::pow(c.beta1, t));
  const T corr2 = static_cast<T>(1.0 - std::pow(c.beta2, t));
  const T lr = static_cast<T>(c.learning_rate), eps = static_cast<T>(c.epsilon);

  constexpr std::size_t kChunk = 1 << 16;
  for (const Slot& s : slots) {
    const std::size_t n = s.p->size();
    T* p = s.p->raw();
    const T* g = s.g->raw();
    T* m = s.m->raw();
    T* v = s.v->raw();
    parallel_for((n + kChunk - 1) / kChunk, [&](std::size_t ci) {
      const std::size_t hi = std::min(n, (ci + 1) * kChunk);
      for (std::size_t j = ci * kChunk; j < hi; ++j) {
        m[j] = b1 * m[j] + one_b1 * g[j];
        v[j] = b2 * v[j] + one_b2 * g[j] * g[j];
        const T m_hat = m[j] / corr1;
        const T v_hat = v[j] / corr2;
        p[j] -= lr * m_hat / (std::sqrt(v_hat) + eps);
      }
    });
  }
}

template struct BasicAdamState<float>;
template struct BasicAdamState<double>;
template void adam_step<float>(Params&, const Params&, AdamState&);
template void adam_step<double>(Params64&, const Params64&, BasicAdamState<double>&);

namespace {

std::string exact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%a", v);  // hex float: bit-exact round trip
  return buf;
}

}  // namespace

void save_checkpoint(const ModelSpec& spec, const Params& params, const AdamState& state,
                     const std::filesystem::path& path) {
  Container c = model_container(spec, params);
  c.set("kind", "checkpoint");
  c.set("adam.step", std::to_string(state.step));
  c.set("adam.learning_rate", exact(state.config.learning_rate));
  c.set("adam.beta1", exact(state.config.beta1));
  c.set("adam.beta2", exact(state.config.beta2));
  c.set("adam.epsilon", exact(state.config.epsilon));
  state.m.for_each([&](const char* name, const Tensor& t) {
    c.tensors.emplace_back(std::string("adam.m.") + name, t);
  });
  state.v.for_each([&](const char* name, const Tensor& t) {
    c.tensors.emplace_back(std::string("adam.v.") + name, t);
  });
  write_container(path, c);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const Container c = read_container(path);
  if (c.field("kind") != "checkpoint") {
    throw FormatError(path.string() + ": not a training checkpoint");
  }
  auto [spec, params] = model_from_container(c, path.string());
  Checkpoint ck{spec, std::move(params), {}};
  try {
    ck.adam.step = std::stoull(c.field("adam.step"));
    ck.adam.config.learning_rate = std::strtod(c.field("adam.learning_rate").c_str(), nullptr);
    ck.adam.config.beta1 = std::strtod(c.field("adam.beta1").c_str(), nullptr);
    ck.adam.config.beta2 = std::strtod(c.field("adam.beta2").c_str(), nullptr);
    ck.adam.config.epsilon = std::strtod(c.field("adam.epsilon").c_str(), nullptr);
  } catch (const std::invalid_argument&) {
    throw FormatError(path.string() + ": bad optimizer header");
  }
  ck.adam.m.for_each([&](const char* name, Tensor& t) { t = c.tensor(std::string("adam.m.") + name); });
  ck.adam.v.for_each([&](const char* name, Tensor& t) { t = c.tensor(std::string("adam.v.") + name); });
  return ck;
}

}  // namespace fnet
