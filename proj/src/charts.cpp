#include "fnet/charts.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "font6x11.inc"

namespace fnet {
namespace {

constexpr Rgb kWhite{255, 255, 255};
constexpr Rgb kBlack{0, 0, 0};
constexpr Rgb kGrid{225, 225, 225};

class Canvas {
 public:
  Canvas(std::size_t w, std::size_t h) : r_(w, h, 255) {}

  void pixel(long x, long y, const Rgb& c) {
    if (x < 0 || y < 0 || x >= static_cast<long>(r_.width()) || y >= static_cast<long>(r_.height())) {
      return;
    }
    for (std::size_t i = 0; i < 3; ++i) {
      r_.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y), i) = c[i];
    }
  }

  void fill_rect(long x0, long y0, long x1, long y1, const Rgb& c) {
    for (long y = y0; y <= y1; ++y)
      for (long x = x0; x <= x1; ++x) pixel(x, y, c);
  }

  void hline(long x0, long x1, long y, const Rgb& c) { fill_rect(x0, y, x1, y, c); }
  void vline(long x, long y0, long y1, const Rgb& c) { fill_rect(x, y0, x, y1, c); }

  // Bresenham, stamped with a (2*half+1)-pixel square pen
  void line(long x0, long y0, long x1, long y1, const Rgb& c, long half = 1) {
    const long dx = std::labs(x1 - x0), dy = -std::labs(y1 - y0);
    const long sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    long err = dx + dy;
    while (true) {
      fill_rect(x0 - half, y0 - half, x0 + half, y0 + half, c);
      if (x0 == x1 && y0 == y1) break;
      const long e2 = 2 * err;
      if (e2 >= dy) { err += dy; x0 += sx; }
      if (e2 <= dx) { err += dx; y0 += sy; }
    }
  }

  void text(long x, long y, const std::string& s, const Rgb& c) {
    for (char ch : s) {
      const int code = static_cast<unsigned char>(ch);
      if (code >= 0x20 && code <= 0x7e) {
        const auto& glyph = glyphs::kTable[static_cast<std::size_t>(code - 0x20)];
        for (int gy = 0; gy < glyphs::kHeight; ++gy) {
          for (int gx = 0; gx < glyphs::kWidth; ++gx) {
            if (glyph[static_cast<std::size_t>(gy)] & (1 << (glyphs::kWidth - 1 - gx))) {
              pixel(x + gx, y + gy, c);
            }
          }
        }
      }
      x += glyphs::kWidth;
    }
  }

  static long text_width(const std::string& s) {
    return static_cast<long>(s.size()) * glyphs::kWidth;
  }

  Raster take() { return std::move(r_); }

 private:
  Raster r_;
};

std::string fmt(const char* pattern, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

}  // namespace

ChartLayout ChartLayout::fit(const std::vector<ChartSeries>& series, std::size_t width,
                             std::size_t height) {
  if (series.empty()) throw UsageError("line chart needs at least one series");
  if (width < 200 || height < 150) throw UsageError("line chart must be at least 200x150");
  ChartLayout l;
  l.width = width;
  l.height = height;
  l.left = 70;
  l.right = width - 25;
  l.top = 40;
  l.bottom = height - 45;
  bool first = true;
  for (const auto& s : series) {
    if (s.points.size() < 2) {
      throw UsageError("series '" + s.label + "' needs at least 2 points");
    }
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      const auto [x, y] = s.points[i];
      if (!std::isfinite(x) || !std::isfinite(y)) {
        throw UsageError("series '" + s.label + "' has a non-finite point");
      }
      if (i > 0 && !(x > s.points[i - 1].first)) {
        throw UsageError("series '" + s.label + "' x values must strictly increase");
      }
      if (first) {
        l.x_min = l.x_max = x;
        l.y_min = l.y_max = y;
        first = false;
      }
      l.x_min = std::min(l.x_min, x);
      l.x_max = std::max(l.x_max, x);
      l.y_min = std::min(l.y_min, y);
      l.y_max = std::max(l.y_max, y);
    }
  }
  if (l.y_max == l.y_min) {
    l.y_min -= 0.5;
    l.y_max += 0.5;
  }
  return l;
}

long ChartLayout::column(double x) const {
  const double t = (x - x_min) / (x_max - x_min);
  return static_cast<long>(left) + std::lround(t * static_cast<double>(right - left));
}

long ChartLayout::row(double y) const {
  const double t = (y_max - y) / (y_max - y_min);
  return static_cast<long>(top) + std::lround(t * static_cast<double>(bottom - top));
}

Rgb series_color(std::size_t index) {
  static constexpr Rgb kPalette[] = {
      {31, 119, 180},   // blue
      {227, 119, 194},  // pink
      {44, 160, 44},    {255, 127, 14}, {148, 103, 189}, {140, 86, 75},
  };
  return kPalette[index % std::size(kPalette)];
}

Raster draw_line_chart(const std::vector<ChartSeries>& series, std::size_t width,
                       std::size_t height, const std::string& title) {
  const ChartLayout l = ChartLayout::fit(series, width, height);
  Canvas cv(width, height);
  const long left = static_cast<long>(l.left), right = static_cast<long>(l.right);
  const long top = static_cast<long>(l.top), bottom = static_cast<long>(l.bottom);

  constexpr int kYTicks = 5;
  for (int i = 0; i <= kYTicks; ++i) {
    const double y = l.y_min + (l.y_max - l.y_min) * i / kYTicks;
    const long row = l.row(y);
    if (i > 0 && i < kYTicks) cv.hline(left + 1, right, row, kGrid);
    cv.hline(left - 4, left, row, kBlack);
    const std::string label = fmt("%.3f", y);
    cv.text(left - 8 - Canvas::text_width(label), row - glyphs::kHeight / 2, label, kBlack);
  }
  const double span = l.x_max - l.x_min;
  const long step = std::max(1L, static_cast<long>(std::ceil(span / 15.0)));
  for (double x = std::ceil(l.x_min); x <= l.x_max; x += static_cast<double>(step)) {
    const long col = l.column(x);
    cv.vline(col, bottom, bottom + 4, kBlack);
    const std::string label = fmt("%.0f", x);
    cv.text(col - Canvas::text_width(label) / 2, bottom + 8, label, kBlack);
  }
  cv.vline(left, top, bottom, kBlack);
  cv.hline(left, right, bottom, kBlack);
  const std::string xlabel = "epoch";
  cv.text((left + right) / 2 - Canvas::text_width(xlabel) / 2, bottom + 24, xlabel, kBlack);
  if (!title.empty()) {
    cv.text(static_cast<long>(width) / 2 - Canvas::text_width(title) / 2, 12, title, kBlack);
  }

  for (std::size_t si = 0; si < series.size(); ++si) {
    const Rgb color = series_color(si);
    const auto& pts = series[si].points;
    for (std::size_t i = 1; i < pts.size(); ++i) {
      cv.line(l.column(pts[i - 1].first), l.row(pts[i - 1].second), l.column(pts[i].first),
              l.row(pts[i].second), color);
    }
  }

  // legend, top-right inside the plot
  long ly = top + 8;
  for (std::size_t si = 0; si < series.size(); ++si) {
    const std::string& label = series[si].label;
    const long lx = right - 30 - Canvas::text_width(label);
    cv.fill_rect(lx, ly + 2, lx + 14, ly + 8, series_color(si));
    cv.text(lx + 20, ly, label, kBlack);
    ly += glyphs::kHeight + 6;
  }
  return cv.take();
}

void render_line_chart(const std::vector<ChartSeries>& series, const std::filesystem::path& out,
                       std::size_t width, std::size_t height, const std::string& title) {
  write_png(out, draw_line_chart(series, width, height, title));
}

Rgb heat_color(std::size_t count, std::size_t max_count) {
  static constexpr Rgb kHot{8, 48, 107};
  const double t = max_count == 0 ? 0.0 : static_cast<double>(count) / static_cast<double>(max_count);
  Rgb c;
  for (std::size_t i = 0; i < 3; ++i) {
    c[i] = static_cast<std::uint8_t>(std::lround(255.0 + t * (kHot[i] - 255.0)));
  }
  return c;
}

Raster draw_heatmap(const ConfusionMatrix& cm, const std::string& title) {
  const HeatmapLayout l;
  Canvas cv(l.width(), l.height());
  const std::size_t peak = cm.max_count();
  const long cell = static_cast<long>(l.cell);
  for (std::size_t t = 0; t < kNumClasses; ++t) {
    for (std::size_t p = 0; p < kNumClasses; ++p) {
      const auto [x0, y0] = l.cell_origin(t, p);
      const long x = static_cast<long>(x0), y = static_cast<long>(y0);
      const std::size_t n = cm.counts[t][p];
      cv.fill_rect(x, y, x + cell - 1, y + cell - 1, heat_color(n, peak));
      const bool dark = peak > 0 && 2 * n > peak;
      const std::string label = std::to_string(n);
      cv.text(x + cell / 2 - Canvas::text_width(label) / 2, y + cell / 2 - glyphs::kHeight / 2,
              label, dark ? kWhite : kBlack);
    }
  }
  const long left = static_cast<long>(l.left), top = static_cast<long>(l.top);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const std::string name(kClassNames[c]);
    const long mid = static_cast<long>(c) * cell + cell / 2;
    cv.text(left - 8 - Canvas::text_width(name), top + mid - glyphs::kHeight / 2, name, kBlack);
    cv.text(left + mid - Canvas::text_width(name) / 2, top + 3 * cell + 8, name, kBlack);
  }
  cv.text(left + 3 * cell / 2 - Canvas::text_width("predicted") / 2, top + 3 * cell + 28,
          "predicted", kBlack);
  cv.text(4, top - 16, "true", kBlack);
  if (!title.empty()) cv.text(left, 10, title, kBlack);
  return cv.take();
}

void render_heatmap(const ConfusionMatrix& cm, const std::filesystem::path& out,
                    const std::string& title) {
  write_png(out, draw_heatmap(cm, title));
}

}  // namespace fnet
