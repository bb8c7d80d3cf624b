#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <nlohmann/json.hpp>

#include "fnet/report.hpp"
#include "support.hpp"

using namespace fnet;

namespace {

ModelSpec tiny_spec() {
  ModelSpec s;
  s.conv_filters = 6;
  s.kernel_size = 3;
  s.dense_units = 5;
  s.input_side = 14;
  return s;
}

}  // namespace

TEST_CASE("confusion matrix basics") {
  const std::vector<int> t{0, 1, 2}, p{0, 1, 2};
  const ConfusionMatrix cm = confusion_matrix(t, p);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(cm.counts[i][j] == (i == j ? 1u : 0u));

  // ten Pneumonia images, one mistaken for Normal
  const std::vector<int> truth(10, 2);
  std::vector<int> pred(10, 2);
  pred[4] = 0;
  const ConfusionMatrix pn = confusion_matrix(truth, pred);
  CHECK(pn.counts[2][0] == 1);
  CHECK(pn.counts[2][2] == 9);
  CHECK(pn.total() == 10);
  CHECK(pn.row_sum(2) == 10);
  CHECK(pn.col_sum(0) == 1);
  CHECK(pn.max_count() == 9);
}

TEST_CASE("confusion matrix agrees with a brute-force pair count") {
  Rng rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<int> t(1000), p(1000);
    for (std::size_t i = 0; i < 1000; ++i) {
      t[i] = static_cast<int>(rng.below(3));
      p[i] = static_cast<int>(rng.below(3));
    }
    const ConfusionMatrix cm = confusion_matrix(t, p);
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        std::size_t n = 0;
        for (std::size_t i = 0; i < 1000; ++i) n += (t[i] == a && p[i] == b);
        CHECK(cm.counts[a][b] == n);
      }
      CHECK(cm.row_sum(a) == static_cast<std::size_t>(std::count(t.begin(), t.end(), a)));
    }
    // row sums do not depend on the order of the pairs
    std::vector<std::size_t> order(1000);
    for (std::size_t i = 0; i < 1000; ++i) order[i] = i;
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<int> t2, p2;
    for (std::size_t i : order) {
      t2.push_back(t[i]);
      p2.push_back(p[i]);
    }
    CHECK(confusion_matrix(t2, p2) == cm);
  }
}

TEST_CASE("confusion matrix errors") {
  const std::vector<int> a{0, 1}, b{0}, bad{0, 3}, empty;
  CHECK_THROWS_AS(confusion_matrix(a, b), UsageError);
  CHECK_THROWS_AS(confusion_matrix(a, bad), UsageError);
  CHECK_THROWS_AS(confusion_matrix(empty, empty), UsageError);
  CHECK_THROWS_AS(classification_report(ConfusionMatrix{}), UsageError);
}

TEST_CASE("classification report closed forms") {
  ConfusionMatrix cm;
  cm.counts[0] = {9, 1, 0};
  cm.counts[1] = {0, 10, 0};
  const ClassReport r = classification_report(cm);
  CHECK(r.classes[0].precision == 1.0);
  CHECK(r.classes[0].recall == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(r.classes[0].f1 == doctest::Approx(18.0 / 19.0).epsilon(1e-15));
  CHECK(r.classes[1].precision == doctest::Approx(10.0 / 11.0).epsilon(1e-15));
  CHECK(r.classes[1].recall == 1.0);
  // Pneumonia is never predicted and never present: 0/0 reads as 0
  CHECK(r.classes[2].precision == 0.0);
  CHECK(r.classes[2].recall == 0.0);
  CHECK(r.classes[2].f1 == 0.0);
  CHECK(r.classes[2].support == 0);
  CHECK(r.accuracy == doctest::Approx(19.0 / 20.0).epsilon(1e-15));
  CHECK(r.total == 20);
  CHECK(r.macro_avg.precision ==
        doctest::Approx((1.0 + 10.0 / 11.0 + 0.0) / 3.0).epsilon(1e-12));
  CHECK(r.weighted_avg.recall == doctest::Approx((10 * 0.9 + 10 * 1.0) / 20.0).epsilon(1e-12));

  ConfusionMatrix perfect;
  perfect.counts[0][0] = 3;
  perfect.counts[1][1] = 4;
  perfect.counts[2][2] = 5;
  for (const auto& m : classification_report(perfect).classes) {
    CHECK(m.precision == 1.0);
    CHECK(m.recall == 1.0);
    CHECK(m.f1 == 1.0);
  }
}

TEST_CASE("report serialization") {
  ConfusionMatrix cm;
  cm.counts[0] = {5, 1, 0};
  cm.counts[1] = {0, 3, 2};
  cm.counts[2] = {1, 0, 7};
  CHECK(confusion_csv(cm) ==
        "true\\predicted,Normal,COVID-19,Pneumonia\n"
        "Normal,5,1,0\n"
        "COVID-19,0,3,2\n"
        "Pneumonia,1,0,7\n");
  const auto j = nlohmann::json::parse(class_report_json(classification_report(cm), cm));
  CHECK(j["total"] == 19);
  CHECK(j["accuracy"].get<double>() == doctest::Approx(15.0 / 19.0));
  CHECK(j["classes"]["COVID-19"]["support"] == 5);
  CHECK(j["confusion_matrix"][2][2] == 7);
  CHECK(j.contains("macro_avg"));
  CHECK(j.contains("weighted_avg"));
}

TEST_CASE("feature map shapes for the tuned model") {
  const ModelSpec spec = ModelSpec::tuned();
  const Params p = init_params(spec, 1);
  const Tensor img = fnet::testing::random_tensor<float>({100, 100, 3}, 2, 0.0, 1.0);
  const FeatureMapSet f = extract_feature_maps(spec, p, img);
  const std::pair<const char*, std::size_t> want[] = {
      {"conv1", 96}, {"pool1", 48}, {"conv2", 44}, {"pool2", 22}};
  REQUIRE(f.layers.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(f.layers[i].name == want[i].first);
    CHECK(f.layers[i].height == want[i].second);
    CHECK(f.layers[i].width == want[i].second);
    CHECK(f.layers[i].channels == 64);
    CHECK(f.layers[i].values.size() == 64 * want[i].second * want[i].second);
  }
  const auto counts = count_inactive_filters(f);
  REQUIRE(counts.size() == 4);
  CHECK(counts[2].total == 64);
  CHECK(counts[2].inactive <= 64);
  CHECK_THROWS_AS(f.layer("dense1"), UsageError);
  CHECK_THROWS_AS(extract_feature_maps(spec, p, Tensor({50, 50, 3})), ShapeError);
}

TEST_CASE("feature map shapes follow the arithmetic for both kernel sizes") {
  for (std::size_t k : {3, 5}) {
    ModelSpec spec = tiny_spec();
    spec.kernel_size = k;
    spec.input_side = 20;
    const FeatureMapSet f = extract_feature_maps(
        spec, init_params(spec, k), fnet::testing::random_tensor<float>({20, 20, 3}, k, 0.0, 1.0));
    CHECK(f.layer("conv1").height == spec.conv1_side());
    CHECK(f.layer("pool1").height == spec.pool1_side());
    CHECK(f.layer("conv2").height == spec.conv2_side());
    CHECK(f.layer("pool2").width == spec.pool2_side());
  }
}

TEST_CASE("zeroed conv2 channels are flagged inactive") {
  const ModelSpec spec = tiny_spec();
  Params p = init_params(spec, 4);
  // conv2_w is [k, k, Cin, Cout]; zero output channels 1, 3 and 4
  const std::size_t cout = spec.conv_filters;
  for (std::size_t i = 0; i < p.conv2_w.size(); ++i) {
    const std::size_t c = i % cout;
    if (c == 1 || c == 3 || c == 4) p.conv2_w[i] = 0.0f;
  }
  for (std::size_t c : {1, 3, 4}) p.conv2_b[c] = 0.0f;
  const Tensor img = fnet::testing::random_tensor<float>({14, 14, 3}, 5, 0.0, 1.0);
  const FeatureMapSet f = extract_feature_maps(spec, p, img);
  const LayerMaps& l = f.layer("conv2");
  CHECK_FALSE(l.active[1]);
  CHECK_FALSE(l.active[3]);
  CHECK_FALSE(l.active[4]);
  for (std::size_t c = 0; c < cout; ++c) {
    const auto m = l.map(c);
    const bool any = std::any_of(m.begin(), m.end(), [](float v) { return v != 0.0f; });
    CHECK(l.active[c] == any);
  }
  const auto counts = count_inactive_filters(f);
  CHECK(counts[2].layer == "conv2");
  CHECK(counts[2].inactive >= 3);
}

TEST_CASE("all-positive weights keep every channel active") {
  const ModelSpec spec = tiny_spec();
  Params p = init_params(spec, 6);
  for (float& v : p.conv1_w.data()) v = std::abs(v) + 0.01f;
  for (float& v : p.conv2_w.data()) v = std::abs(v) + 0.01f;
  const Tensor img = fnet::testing::random_tensor<float>({14, 14, 3}, 7, 0.1, 1.0);
  for (const auto& c : count_inactive_filters(extract_feature_maps(spec, p, img))) {
    CHECK(c.inactive == 0);
  }
}

TEST_CASE("inactive count line") {
  CHECK(format_inactive_line(2, {"conv2", 34, 64}) == "layer 2: 34/64 inactive");
  CHECK(format_inactive_line(1, {"conv1", 0, 64}) == "layer 1: 0/64 inactive");
}

TEST_CASE("feature grid layout and normalization") {
  LayerMaps l;
  l.name = "conv1";
  l.height = 2;
  l.width = 3;
  l.channels = 10;
  l.values.resize(60);
  for (std::size_t c = 0; c < 10; ++c)
    for (std::size_t i = 0; i < 6; ++i) l.values[c * 6 + i] = c == 9 ? 5.0f : static_cast<float>(i) - 2.0f;
  l.active.assign(10, true);

  const GrayImage g = feature_grid(l);
  // 8 columns of width 3 with 7 separators; 2 rows of height 2 with 1 separator
  CHECK(g.width == 8 * 3 + 7);
  CHECK(g.height == 2 * 2 + 1);
  CHECK(g.pixels[0] == 0);
  CHECK(g.pixels[1 * g.width + 2] == 255);
  CHECK(g.pixels[1] == 51);  // (1 - 0) / 5 * 255
  CHECK(g.pixels[3] == 255);  // separator column
  CHECK(g.pixels[2 * g.width] == 255);  // separator row
  // constant channel 9 renders black at row 1, column 1
  CHECK(g.pixels[3 * g.width + 4] == 0);
  // unused grid cells stay white
  CHECK(g.pixels[3 * g.width + 2 * 4 + 1] == 255);
  CHECK_THROWS_AS(feature_grid(l, 0), UsageError);

  LayerMaps full = l;
  full.channels = 64;
  full.values.assign(64 * 6, 1.0f);
  const GrayImage g64 = feature_grid(full);
  CHECK(g64.width == 8 * 3 + 7);
  CHECK(g64.height == 8 * 2 + 7);
}
