#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fnet/raster.hpp"
#include "fnet/report.hpp"

namespace fnet {

using Rgb = std::array<std::uint8_t, 3>;

struct ChartSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (epoch, value), x strictly increasing
};

/// Data-to-pixel mapping of a line chart. Plot rows/columns are inclusive.
struct ChartLayout {
  std::size_t width = 0, height = 0;
  std::size_t left = 0, right = 0, top = 0, bottom = 0;  // plot area bounds in pixels
  double x_min = 0, x_max = 1, y_min = 0, y_max = 1;

  /// Axes fit the data; a flat y range is widened by 0.5 on both sides.
  static ChartLayout fit(const std::vector<ChartSeries>& series, std::size_t width,
                         std::size_t height);
  long column(double x) const;
  long row(double y) const;
};

/// Series colors in draw order: blue, pink, then a fixed fallback cycle.
Rgb series_color(std::size_t index);

Raster draw_line_chart(const std::vector<ChartSeries>& series, std::size_t width = 800,
                       std::size_t height = 600, const std::string& title = "");
void render_line_chart(const std::vector<ChartSeries>& series, const std::filesystem::path& out,
                       std::size_t width = 800, std::size_t height = 600,
                       const std::string& title = "");

struct HeatmapLayout {
  std::size_t cell = 120;
  std::size_t left = 110, top = 40;
  std::size_t width() const { return left + 3 * cell + 20; }
  std::size_t height() const { return top + 3 * cell + 50; }
  /// Top-left pixel of the cell for (true row, predicted column).
  std::pair<std::size_t, std::size_t> cell_origin(std::size_t row, std::size_t col) const {
    return {left + col * cell, top + row * cell};
  }
};

/// Linear white-to-navy scale from 0 to the largest count.
Rgb heat_color(std::size_t count, std::size_t max_count);
Raster draw_heatmap(const ConfusionMatrix& cm, const std::string& title = "");
void render_heatmap(const ConfusionMatrix& cm, const std::filesystem::path& out,
                    const std::string& title = "");

}  // namespace fnet
