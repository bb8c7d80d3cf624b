#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "fnet/dataset.hpp"
#include "fnet/model.hpp"

namespace fnet {

/// Rows are true classes, columns predicted, in (Normal, COVID-19, Pneumonia) order.
struct ConfusionMatrix {
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> counts{};

  std::size_t total() const;
  std::size_t trace() const;
  std::size_t row_sum(std::size_t c) const;
  std::size_t col_sum(std::size_t c) const;
  std::size_t max_count() const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> predicted);

struct ClassMetrics {
  double precision = 0, recall = 0, f1 = 0;
  std::size_t support = 0;
};

/// Per-class precision/recall/F1 with 0/0 reported as 0, plus macro and
/// support-weighted averages.
struct ClassReport {
  std::array<ClassMetrics, kNumClasses> classes;
  ClassMetrics macro_avg, weighted_avg;
  double accuracy = 0;
  std::size_t total = 0;
};

ClassReport classification_report(const ConfusionMatrix& cm);

/// Header row and column carry the class names.
std::string confusion_csv(const ConfusionMatrix& cm);
std::string class_report_json(const ClassReport& report, const ConfusionMatrix& cm);

/// Activations of one layer for a single image, split per channel.
struct LayerMaps {
  std::string name;  // conv1, pool1, conv2, pool2
  std::size_t height = 0, width = 0, channels = 0;
  std::vector<float> values;  // [channels][height][width]
  std::vector<bool> active;   // false iff the channel is identically zero

  std::span<const float> map(std::size_t channel) const {
    return std::span<const float>(values).subspan(channel * height * width, height * width);
  }
};

struct FeatureMapSet {
  std::vector<LayerMaps> layers;
  const LayerMaps& layer(const std::string& name) const;
};

/// Eval-mode forward of one [S, S, Cin] image, capturing both conv and pool outputs.
FeatureMapSet extract_feature_maps(const ModelSpec& spec, const Params& params,
                                   const Tensor& image);

struct InactiveCount {
  std::string layer;
  std::size_t inactive = 0;
  std::size_t total = 0;
};

std::vector<InactiveCount> count_inactive_filters(const FeatureMapSet& f);
/// "layer 2: 34/64 inactive" for the conv layer with the given 1-based index.
std::string format_inactive_line(std::size_t conv_index, const InactiveCount& c);

/// Grid of per-channel maps, 8 per row, 1-pixel separators; each map is
/// min-max normalized to 0..255 on its own (constant maps render black).
struct GrayImage {
  std::size_t width = 0, height = 0;
  std::vector<std::uint8_t> pixels;
};
GrayImage feature_grid(const LayerMaps& layer, std::size_t columns = 8);

}  // namespace fnet
