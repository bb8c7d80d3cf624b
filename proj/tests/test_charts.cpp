#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "fnet/charts.hpp"
#include "support.hpp"

using namespace fnet;
using fnet::testing::TempDir;

namespace {

Rgb pixel(const Raster& r, long x, long y) {
  const auto ux = static_cast<std::size_t>(x), uy = static_cast<std::size_t>(y);
  return {r.at(ux, uy, 0), r.at(ux, uy, 1), r.at(ux, uy, 2)};
}

std::vector<ChartSeries> curves() {
  ChartSeries train{"train", {}}, val{"validation", {}};
  for (int e = 1; e <= 15; ++e) {
    train.points.push_back({e, 1.0 - 0.6 / e});
    val.points.push_back({e, 0.9 - 0.5 / e});
  }
  return {train, val};
}

int brightness(Rgb c) { return c[0] + c[1] + c[2]; }

}  // namespace

TEST_CASE("line chart renders to an 800x600 png") {
  TempDir dir("chart");
  render_line_chart(curves(), dir / "acc.png");
  const Raster r = load_raster(dir / "acc.png");
  CHECK(r.width() == 800);
  CHECK(r.height() == 600);
  std::set<Rgb> colors;
  for (std::size_t y = 0; y < r.height(); y += 3)
    for (std::size_t x = 0; x < r.width(); x += 3) colors.insert(pixel(r, static_cast<long>(x), static_cast<long>(y)));
  CHECK(colors.size() >= 2);
  CHECK(colors.count(series_color(0)) == 1);
  CHECK(colors.count(series_color(1)) == 1);
  CHECK(r == draw_line_chart(curves()));
}

TEST_CASE("chart output is byte deterministic") {
  TempDir dir("chart-det");
  render_line_chart(curves(), dir / "a.png", 800, 600, "accuracy");
  render_line_chart(curves(), dir / "b.png", 800, 600, "accuracy");
  CHECK(fnet::testing::slurp(dir / "a.png") == fnet::testing::slurp(dir / "b.png"));
  render_heatmap(ConfusionMatrix{{{{3, 1, 0}, {0, 4, 1}, {2, 0, 5}}}}, dir / "h1.png");
  render_heatmap(ConfusionMatrix{{{{3, 1, 0}, {0, 4, 1}, {2, 0, 5}}}}, dir / "h2.png");
  CHECK(fnet::testing::slurp(dir / "h1.png") == fnet::testing::slurp(dir / "h2.png"));
}

TEST_CASE("constant series sits on the middle row") {
  const std::vector<ChartSeries> flat{{"flat", {{1, 0.5}, {2, 0.5}, {3, 0.5}, {4, 0.5}}}};
  const ChartLayout layout = ChartLayout::fit(flat, 800, 600);
  CHECK(layout.y_min == 0.0);
  CHECK(layout.y_max == 1.0);
  const long mid = static_cast<long>(layout.top + (layout.bottom - layout.top) / 2);
  CHECK(std::abs(layout.row(0.5) - mid) <= 1);
  CHECK(layout.row(1.0) == static_cast<long>(layout.top));
  CHECK(layout.row(0.0) == static_cast<long>(layout.bottom));
  CHECK(layout.column(1.0) == static_cast<long>(layout.left));
  CHECK(layout.column(4.0) == static_cast<long>(layout.right));

  const Raster r = draw_line_chart(flat);
  const long x = layout.column(2.5);
  CHECK(pixel(r, x, layout.row(0.5)) == series_color(0));
  CHECK(pixel(r, x, layout.row(0.5) - 4) != series_color(0));
  CHECK(pixel(r, x, layout.row(0.5) + 4) != series_color(0));
}

TEST_CASE("chart input validation") {
  CHECK_THROWS_AS(ChartLayout::fit({}, 800, 600), UsageError);
  CHECK_THROWS_AS(ChartLayout::fit({{"one", {{1, 0.5}}}}, 800, 600), UsageError);
  CHECK_THROWS_AS(ChartLayout::fit({{"back", {{2, 0.5}, {1, 0.6}}}}, 800, 600), UsageError);
  CHECK_THROWS_AS(ChartLayout::fit({{"nan", {{1, 0.5}, {2, std::nan("")}}}}, 800, 600), UsageError);
  CHECK_THROWS_AS(ChartLayout::fit(curves(), 100, 100), UsageError);
}

TEST_CASE("heat color scale") {
  CHECK(heat_color(0, 10) == Rgb{255, 255, 255});
  CHECK(heat_color(10, 10) == Rgb{8, 48, 107});
  CHECK(brightness(heat_color(3, 10)) > brightness(heat_color(7, 10)));
  CHECK(heat_color(0, 0) == Rgb{255, 255, 255});
}

TEST_CASE("heatmap diagonal is darkest for a diagonal-dominant matrix") {
  ConfusionMatrix cm;
  cm.counts[0] = {50, 3, 2};
  cm.counts[1] = {4, 40, 1};
  cm.counts[2] = {9, 2, 60};
  const Raster r = draw_heatmap(cm, "test");
  const HeatmapLayout hl;
  CHECK(r.width() == hl.width());
  CHECK(r.height() == hl.height());
  int darkest_off = 0;
  int lightest_diag = 1000;
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t p = 0; p < 3; ++p) {
      const auto [x, y] = hl.cell_origin(t, p);
      const Rgb c = pixel(r, static_cast<long>(x + 6), static_cast<long>(y + 6));
      CHECK(c == heat_color(cm.counts[t][p], cm.max_count()));
      if (t == p) lightest_diag = std::min(lightest_diag, brightness(c));
      else darkest_off = std::max(darkest_off, 765 - brightness(c));
    }
  }
  CHECK(765 - lightest_diag > darkest_off);
}

TEST_CASE("equal counts give one uniform color") {
  ConfusionMatrix cm;
  for (auto& row : cm.counts) row = {7, 7, 7};
  const Raster r = draw_heatmap(cm);
  const HeatmapLayout hl;
  std::set<Rgb> seen;
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t p = 0; p < 3; ++p) {
      const auto [x, y] = hl.cell_origin(t, p);
      seen.insert(pixel(r, static_cast<long>(x + 6), static_cast<long>(y + 6)));
      seen.insert(pixel(r, static_cast<long>(x + hl.cell - 8), static_cast<long>(y + hl.cell - 8)));
    }
  }
  CHECK(seen.size() == 1);
}

TEST_CASE("unwritable output path") {
  TempDir dir("chart-bad");
  fnet::testing::spit(dir / "file", "x");
  CHECK_THROWS_AS(render_line_chart(curves(), dir / "file/sub/acc.png"), IoError);
  CHECK_THROWS_AS(render_heatmap(ConfusionMatrix{}, dir / "file/sub/cm.png"), IoError);
}
