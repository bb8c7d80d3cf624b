#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fnet/adam.hpp"
#include "support.hpp"

using namespace fnet;
using fnet::testing::TempDir;

namespace {

// Every tensor holds a single scalar; adam_step only needs matching shapes.
template <typename T>
BasicParams<T> scalars(T value) {
  BasicParams<T> p;
  p.for_each([&](const char*, BasicTensor<T>& t) { t = BasicTensor<T>({1}, value); });
  return p;
}

ModelSpec small_spec() {
  ModelSpec s;
  s.conv_filters = 2;
  s.kernel_size = 3;
  s.dense_units = 4;
  s.input_side = 10;
  return s;
}

Params random_like(const Params& like, std::uint64_t seed) {
  Params g = like;
  g.for_each([&](const char*, Tensor& t) {
    t = fnet::testing::random_tensor<float>(t.shape(), seed++, -0.5, 0.5);
  });
  return g;
}

}  // namespace

TEST_CASE("zero gradient from a fresh state leaves parameters alone") {
  Params p = init_params(small_spec(), 3);
  const Params before = p;
  AdamState s = AdamState::fresh(p);
  adam_step(p, Params::zeros(small_spec()), s);
  CHECK(p == before);
  CHECK(s.step == 1);
}

TEST_CASE("two scalar steps match a hand-rolled oracle in double") {
  auto p = scalars<double>(0.0);
  auto s = BasicAdamState<double>::fresh(p, {0.1, 0.9, 0.999, 1e-7});
  const auto g = scalars<double>(1.0);

  double op = 0, om = 0, ov = 0;
  for (int t = 1; t <= 2; ++t) {
    adam_step(p, g, s);
    om = 0.9 * om + 0.1 * 1.0;
    ov = 0.999 * ov + 0.001 * 1.0;
    const double mh = om / (1 - std::pow(0.9, t));
    const double vh = ov / (1 - std::pow(0.999, t));
    op -= 0.1 * mh / (std::sqrt(vh) + 1e-7);
    CHECK(std::abs(p.conv1_w[0] - op) < 1e-12);
    CHECK(std::abs(s.m.conv1_w[0] - om) < 1e-12);
    CHECK(std::abs(s.v.conv1_w[0] - ov) < 1e-12);
    CHECK(s.step == static_cast<std::uint64_t>(t));
  }
  // m_hat = v_hat = 1 at both steps, so each step is lr / (1 + eps)
  CHECK(std::abs(p.conv1_w[0] + 0.2 / (1 + 1e-7)) < 1e-12);
}

TEST_CASE("first step has magnitude lr for non-tiny gradients") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const double mag = std::pow(10.0, rng.uniform(-3.0, 3.0));
    const double g = rng.below(2) ? mag : -mag;
    auto p = scalars<double>(0.5);
    auto s = BasicAdamState<double>::fresh(p, {1e-4, 0.9, 0.999, 1e-7});
    adam_step(p, scalars<double>(g), s);
    const double step = p.dense1_w[0] - 0.5;
    CHECK(std::abs(std::abs(step) - 1e-4) <= 1e-4 * 1e-3);
    CHECK((step < 0) == (g > 0));
  }
}

TEST_CASE("first step is nearly invariant to gradient rescaling") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const double g = rng.uniform(1e-3, 2.0) * (rng.below(2) ? 1 : -1);
    auto a = scalars<double>(0.0), b = scalars<double>(0.0);
    auto sa = BasicAdamState<double>::fresh(a), sb = BasicAdamState<double>::fresh(b);
    adam_step(a, scalars<double>(g), sa);
    adam_step(b, scalars<double>(10 * g), sb);
    CHECK(std::abs(a.conv2_b[0] - b.conv2_b[0]) < 1e-3 * std::abs(a.conv2_b[0]));
  }
}

TEST_CASE("second moments stay non-negative") {
  Params p = init_params(small_spec(), 1);
  AdamState s = AdamState::fresh(p);
  for (std::uint64_t k = 0; k < 5; ++k) {
    adam_step(p, random_like(p, 100 * k), s);
    s.v.for_each([](const char*, const Tensor& t) {
      for (float x : t.data()) REQUIRE(x >= 0.0f);
    });
  }
  CHECK(s.step == 5);
}

TEST_CASE("float and double updates agree") {
  Params p = init_params(small_spec(), 9);
  Params64 q;
  {
    std::size_t i = 0;
    std::vector<const Tensor*> src;
    p.for_each([&](const char*, const Tensor& t) { src.push_back(&t); });
    q.for_each([&](const char*, BasicTensor<double>& t) {
      const Tensor& f = *src[i++];
      t = BasicTensor<double>(f.shape(), std::vector<double>(f.data().begin(), f.data().end()));
    });
  }
  AdamState s = AdamState::fresh(p, {1e-2});
  auto s64 = BasicAdamState<double>::fresh(q, {1e-2});
  for (std::uint64_t k = 0; k < 3; ++k) {
    const Params g = random_like(p, k + 50);
    Params64 g64 = q;
    std::size_t i = 0;
    std::vector<const Tensor*> src;
    g.for_each([&](const char*, const Tensor& t) { src.push_back(&t); });
    g64.for_each([&](const char*, BasicTensor<double>& t) {
      const Tensor& f = *src[i++];
      t = BasicTensor<double>(f.shape(), std::vector<double>(f.data().begin(), f.data().end()));
    });
    adam_step(p, g, s);
    adam_step(q, g64, s64);
  }
  for (std::size_t j = 0; j < p.dense1_w.size(); ++j) {
    REQUIRE(std::abs(p.dense1_w[j] - q.dense1_w[j]) < 1e-6);
  }
}

TEST_CASE("errors leave state untouched") {
  Params p = init_params(small_spec(), 2);
  AdamState s = AdamState::fresh(p);
  const Params p0 = p;
  const AdamState s0 = s;

  Params bad = Params::zeros(small_spec());
  bad.conv2_b[1] = std::nanf("");
  try {
    adam_step(p, bad, s);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("conv2.b") != std::string::npos);
  }
  CHECK(p == p0);
  CHECK(s == s0);

  bad = Params::zeros(small_spec());
  bad.dense2_w = Tensor({2, 2});
  CHECK_THROWS_AS(adam_step(p, bad, s), ShapeError);
  CHECK(s.step == 0);
}

TEST_CASE("checkpoint round trip is bit exact") {
  TempDir dir("adam");
  const ModelSpec spec = small_spec();
  Params p = init_params(spec, 4);
  AdamState s = AdamState::fresh(p, {3e-4});
  for (std::uint64_t k = 0; k < 3; ++k) adam_step(p, random_like(p, k), s);

  save_checkpoint(spec, p, s, dir / "ck.fnet");
  const Checkpoint ck = load_checkpoint(dir / "ck.fnet");
  CHECK(ck.spec == spec);
  CHECK(ck.params == p);
  CHECK(ck.adam == s);

  // continuing from the checkpoint matches continuing in memory
  Params a = p, b = ck.params;
  AdamState sa = s, sb = ck.adam;
  const Params g = random_like(p, 99);
  adam_step(a, g, sa);
  adam_step(b, g, sb);
  CHECK(a == b);
}
