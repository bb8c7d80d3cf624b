// fnet-synth: writes a small deterministic 3-class texture dataset laid out as
// <out>/{train,test}/{Normal,COVID-19,Pneumonia}/NNNN.png.
//
//   Normal     horizontal sinusoidal stripes
//   COVID-19   bright round spots on a dark field
//   Pneumonia  checkerboard
//
// Every image gets a random intensity offset and additive Gaussian noise.

#include <CLI11.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <vector>

#include "fnet/dataset.hpp"
#include "fnet/error.hpp"
#include "fnet/raster.hpp"
#include "fnet/rng.hpp"

namespace fs = std::filesystem;
using namespace fnet;

namespace {

double gaussian(Rng& rng) {
  const double u1 = 1.0 - rng.uniform01();  // (0, 1]
  const double u2 = rng.uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<double> texture(int cls, std::size_t side, Rng& rng) {
  std::vector<double> v(side * side);
  const double s = static_cast<double>(side);
  if (cls == 0) {
    const double period = rng.uniform(7.0, 12.0), phase = rng.uniform(0.0, 2 * std::numbers::pi);
    for (std::size_t y = 0; y < side; ++y)
      for (std::size_t x = 0; x < side; ++x)
        v[y * side + x] = 0.5 + 0.35 * std::sin(2 * std::numbers::pi * y / period + phase);
  } else if (cls == 1) {
    std::fill(v.begin(), v.end(), 0.2);
    const std::size_t spots = 3 + rng.below(4);
    for (std::size_t i = 0; i < spots; ++i) {
      const double cx = rng.uniform(0.15 * s, 0.85 * s), cy = rng.uniform(0.15 * s, 0.85 * s);
      const double r = rng.uniform(4.0, 8.0);
      for (std::size_t y = 0; y < side; ++y)
        for (std::size_t x = 0; x < side; ++x) {
          const double d = std::hypot(x - cx, y - cy);
          if (d < r) v[y * side + x] = 0.85;
        }
    }
  } else {
    const double cell = rng.uniform(6.0, 10.0);
    const double ox = rng.uniform(0.0, cell), oy = rng.uniform(0.0, cell);
    for (std::size_t y = 0; y < side; ++y)
      for (std::size_t x = 0; x < side; ++x) {
        const long cxi = static_cast<long>(std::floor((x + ox) / cell));
        const long cyi = static_cast<long>(std::floor((y + oy) / cell));
        v[y * side + x] = ((cxi + cyi) % 2 == 0) ? 0.25 : 0.75;
      }
  }
  return v;
}

Raster synth_image(int cls, std::size_t side, double noise, Rng& rng) {
  const auto base = texture(cls, side, rng);
  const double offset = rng.uniform(-0.1, 0.1);
  Raster r(side, side, 0);
  for (std::size_t i = 0; i < side * side; ++i) {
    const double g = (base[i] + offset) * 255.0 + noise * gaussian(rng);
    const auto px = static_cast<std::uint8_t>(std::clamp(std::lround(g), 0L, 255L));
    for (std::size_t c = 0; c < 3; ++c) r.pixels()[i * 3 + c] = px;
  }
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate the synthetic texture dataset"};
  std::string out;
  std::uint64_t seed = 42;
  std::size_t side = 64;
  double noise = 20.0;
  std::array<std::size_t, kNumClasses> train_counts{45, 13, 80}, test_counts{40, 12, 110};
  app.add_option("--out", out, "Output root")->required();
  app.add_option("--seed", seed)->capture_default_str();
  app.add_option("--side", side, "Image side in pixels")->capture_default_str();
  app.add_option("--noise", noise, "Gaussian noise sigma in 8-bit levels")->capture_default_str();
  app.add_option("--train", train_counts, "Per-class train counts")->capture_default_str();
  app.add_option("--test", test_counts, "Per-class test counts")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  try {
    for (Split split : {Split::Train, Split::Test}) {
      const auto& counts = split == Split::Train ? train_counts : test_counts;
      for (int c = 0; c < static_cast<int>(kNumClasses); ++c) {
        const fs::path dir = fs::path(out) / std::string(to_string(split)) /
                             std::string(kClassNames[static_cast<std::size_t>(c)]);
        fs::create_directories(dir);
        Rng rng(mix64(derive_seed(seed, to_string(split)), static_cast<std::uint64_t>(c)));
        for (std::size_t i = 0; i < counts[static_cast<std::size_t>(c)]; ++i) {
          char name[16];
          std::snprintf(name, sizeof name, "%04zu.png", i);
          write_png(dir / name, synth_image(c, side, noise, rng));
        }
      }
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
