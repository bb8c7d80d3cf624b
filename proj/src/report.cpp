#include "fnet/report.hpp"

#include <json.hpp>

#include <algorithm>

namespace fnet {

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (const auto& row : counts)
    for (std::size_t v : row) n += v;
  return n;
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t n = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) n += counts[c][c];
  return n;
}

std::size_t ConfusionMatrix::row_sum(std::size_t c) const {
  std::size_t n = 0;
  for (std::size_t v : counts.at(c)) n += v;
  return n;
}

std::size_t ConfusionMatrix::col_sum(std::size_t c) const {
  std::size_t n = 0;
  for (const auto& row : counts) n += row.at(c);
  return n;
}

std::size_t ConfusionMatrix::max_count() const {
  std::size_t m = 0;
  for (const auto& row : counts)
    for (std::size_t v : row) m = std::max(m, v);
  return m;
}

ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) {
    throw UsageError("confusion matrix: " + std::to_string(truth.size()) + " true labels vs " +
                     std::to_string(predicted.size()) + " predictions");
  }
  if (truth.empty()) throw UsageError("confusion matrix: no labels");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i], p = predicted[i];
    if (t < 0 || p < 0 || t >= static_cast<int>(kNumClasses) || p >= static_cast<int>(kNumClasses)) {
      throw UsageError("confusion matrix: label out of range at index " + std::to_string(i));
    }
    ++cm.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
  }
  return cm;
}

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ClassReport classification_report(const ConfusionMatrix& cm) {
  ClassReport r;
  r.total = cm.total();
  if (r.total == 0) throw UsageError("classification report of an empty confusion matrix");
  double weighted[3] = {0, 0, 0};
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    ClassMetrics& m = r.classes[c];
    m.support = cm.row_sum(c);
    m.precision = ratio(cm.counts[c][c], cm.col_sum(c));
    m.recall = ratio(cm.counts[c][c], m.support);
    const double denom = m.precision + m.recall;
    m.f1 = denom == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / denom;

    r.macro_avg.precision += m.precision / kNumClasses;
    r.macro_avg.recall += m.recall / kNumClasses;
    r.macro_avg.f1 += m.f1 / kNumClasses;
    const double w = static_cast<double>(m.support);
    weighted[0] += w * m.precision;
    weighted[1] += w * m.recall;
    weighted[2] += w * m.f1;
  }
  const double n = static_cast<double>(r.total);
  r.macro_avg.support = r.weighted_avg.support = r.total;
  r.weighted_avg.precision = weighted[0] / n;
  r.weighted_avg.recall = weighted[1] / n;
  r.weighted_avg.f1 = weighted[2] / n;
  r.accuracy = ratio(cm.trace(), r.total);
  return r;
}

std::string confusion_csv(const ConfusionMatrix& cm) {
  std::string out = "true\\predicted";
  for (auto name : kClassNames) out += "," + std::string(name);
  out += '\n';
  for (std::size_t t = 0; t < kNumClasses; ++t) {
    out += kClassNames[t];
    for (std::size_t p = 0; p < kNumClasses; ++p) out += "," + std::to_string(cm.counts[t][p]);
    out += '\n';
  }
  return out;
}

std::string class_report_json(const ClassReport& report, const ConfusionMatrix& cm) {
  using nlohmann::json;
  auto metrics = [](const ClassMetrics& m) {
    return json{{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
                {"support", m.support}};
  };
  json classes = json::object();
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    classes[std::string(kClassNames[c])] = metrics(report.classes[c]);
  }
  json matrix = json::array();
  for (const auto& row : cm.counts) matrix.push_back(row);
  json doc = {{"classes", classes},
              {"accuracy", report.accuracy},
              {"macro_avg", metrics(report.macro_avg)},
              {"weighted_avg", metrics(report.weighted_avg)},
              {"total", report.total},
              {"confusion_matrix", matrix}};
  return doc.dump(2) + "\n";
}

const LayerMaps& FeatureMapSet::layer(const std::string& name) const {
  for (const auto& l : layers) {
    if (l.name == name) return l;
  }
  throw UsageError("no feature maps for layer '" + name + "'");
}

namespace {

LayerMaps split_channels(std::string name, const Tensor& batched) {
  // batched is [1, H, W, C]
  LayerMaps l;
  l.name = std::move(name);
  l.height = batched.dim(1);
  l.width = batched.dim(2);
  l.channels = batched.dim(3);
  const std::size_t plane = l.height * l.width;
  l.values.resize(plane * l.channels);
  l.active.assign(l.channels, false);
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < l.channels; ++c) {
      const float v = batched[i * l.channels + c];
      l.values[c * plane + i] = v;
      if (v != 0.0f) l.active[c] = true;
    }
  }
  return l;
}

}  // namespace

FeatureMapSet extract_feature_maps(const ModelSpec& spec, const Params& params,
                                   const Tensor& image) {
  const std::size_t s = spec.input_side;
  if (image.rank() != 3 || image.dim(0) != s || image.dim(1) != s ||
      image.dim(2) != spec.input_channels) {
    throw ShapeError("feature extraction expects a [" + std::to_string(s) + "," +
                     std::to_string(s) + "," + std::to_string(spec.input_channels) +
                     "] image, got " + shape_to_string(image.shape()));
  }
  const auto tr = model_forward(spec, params, image.reshaped({1, s, s, spec.input_channels}),
                                Mode::Eval, 0);
  FeatureMapSet f;
  f.layers.push_back(split_channels("conv1", tr.conv1));
  f.layers.push_back(split_channels("pool1", tr.pool1));
  f.layers.push_back(split_channels("conv2", tr.conv2));
  f.layers.push_back(split_channels("pool2", tr.pool2));
  return f;
}

std::vector<InactiveCount> count_inactive_filters(const FeatureMapSet& f) {
  std::vector<InactiveCount> out;
  for (const auto& l : f.layers) {
    InactiveCount c{l.name, 0, l.channels};
    for (bool a : l.active) c.inactive += a ? 0 : 1;
    out.push_back(c);
  }
  return out;
}

std::string format_inactive_line(std::size_t conv_index, const InactiveCount& c) {
  return "layer " + std::to_string(conv_index) + ": " + std::to_string(c.inactive) + "/" +
         std::to_string(c.total) + " inactive";
}

GrayImage feature_grid(const LayerMaps& layer, std::size_t columns) {
  if (columns == 0) throw UsageError("feature grid needs at least one column");
  const std::size_t cols = std::min(columns, layer.channels);
  const std::size_t rows = (layer.channels + cols - 1) / cols;
  GrayImage g;
  g.width = cols * layer.width + (cols - 1);
  g.height = rows * layer.height + (rows - 1);
  g.pixels.assign(g.width * g.height, 255);  // separators and unused cells are white

  for (std::size_t c = 0; c < layer.channels; ++c) {
    const auto m = layer.map(c);
    const auto [lo_it, hi_it] = std::minmax_element(m.begin(), m.end());
    const float lo = *lo_it, hi = *hi_it;
    const std::size_t ox = (c % cols) * (layer.width + 1);
    const std::size_t oy = (c / cols) * (layer.height + 1);
    for (std::size_t y = 0; y < layer.height; ++y) {
      for (std::size_t x = 0; x < layer.width; ++x) {
        const float v = m[y * layer.width + x];
        const float t = hi > lo ? (v - lo) / (hi - lo) : 0.0f;
        g.pixels[(oy + y) * g.width + ox + x] =
            static_cast<std::uint8_t>(std::clamp(t * 255.0f + 0.5f, 0.0f, 255.0f));
      }
    }
  }
  return g;
}

}  // namespace fnet
