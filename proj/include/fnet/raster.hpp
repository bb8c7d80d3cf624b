#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fnet/tensor.hpp"

namespace fnet {

/// 8-bit RGB image, row-major, channel-last.
class Raster {
 public:
  Raster() = default;
  Raster(std::size_t width, std::size_t height, std::uint8_t fill = 0);
  Raster(std::size_t width, std::size_t height, std::vector<std::uint8_t> pixels);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }
  std::span<std::uint8_t> pixels() noexcept { return pixels_; }

  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) {
    return pixels_[(y * width_ + x) * 3 + c];
  }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const {
    return pixels_[(y * width_ + x) * 3 + c];
  }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

enum class Turn { Left90, Right90, Half };

enum class FilterName { Contour, EdgeEnhanceMore, FindEdges, Sharpen };

/// 3x3 integer kernel: out = clamp(round(sum(w * px) / divisor + offset)).
struct FilterSpec {
  FilterName name;
  std::array<int, 9> weights;
  int divisor;
  int offset;
};

const FilterSpec& filter_spec(FilterName name);
std::string_view to_string(FilterName name);
/// Parses "contour", "edge-enhance-more", "find-edges", "sharpen";
/// "none" yields std::nullopt. Anything else is a UsageError.
std::optional<FilterName> parse_filter(std::string_view text);

Raster load_raster(const std::filesystem::path& path);
/// Decodes an in-memory PNG or JPEG.
Raster decode_raster(std::span<const std::uint8_t> bytes, const std::string& origin);

/// Writes an 8-bit PNG; gray rasters can be passed with channels = 1.
void write_png(const std::filesystem::path& path, std::size_t width, std::size_t height,
               std::size_t channels, std::span<const std::uint8_t> pixels);
void write_png(const std::filesystem::path& path, const Raster& raster);

/// Bilinear resample with half-pixel centers; identity when sizes match.
Raster resize(const Raster& r, std::size_t width, std::size_t height);
Raster rotate(const Raster& r, Turn turn);
Raster apply_filter(const Raster& r, const FilterSpec& f);

/// [height, width, 3] with every byte mapped to b / 255.
Tensor to_tensor(const Raster& r);

}  // namespace fnet
