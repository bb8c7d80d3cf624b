#include "fnet/raster.hpp"

#include <png.h>
// jpeglib.h needs FILE and size_t declared first
#include <cstdio>
#include <jpeglib.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <fstream>
#include <iterator>

namespace fnet {

Raster::Raster(std::size_t width, std::size_t height, std::uint8_t fill)
    : width_(width), height_(height), pixels_(width * height * 3, fill) {
  if (width == 0 || height == 0) throw ShapeError("raster with zero dimension");
}

Raster::Raster(std::size_t width, std::size_t height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width == 0 || height == 0) throw ShapeError("raster with zero dimension");
  if (pixels_.size() != width * height * 3) {
    throw ShapeError("raster buffer of " + std::to_string(pixels_.size()) + " bytes for " +
                     std::to_string(width) + "x" + std::to_string(height) + " RGB");
  }
}

// ---------------------------------------------------------------------------
// Filters

namespace {

constexpr FilterSpec kContour{FilterName::Contour, {-1, -1, -1, -1, 8, -1, -1, -1, -1}, 1, 255};
constexpr FilterSpec kEdgeEnhanceMore{
    FilterName::EdgeEnhanceMore, {-1, -1, -1, -1, 9, -1, -1, -1, -1}, 1, 0};
constexpr FilterSpec kFindEdges{FilterName::FindEdges, {-1, -1, -1, -1, 8, -1, -1, -1, -1}, 1, 0};
constexpr FilterSpec kSharpen{FilterName::Sharpen, {-2, -2, -2, -2, 32, -2, -2, -2, -2}, 16, 0};

// round(num / den) with halves away from zero, den > 0
long round_div(long num, long den) {
  if (num >= 0) return (2 * num + den) / (2 * den);
  return -((-2 * num + den) / (2 * den));
}

std::uint8_t clamp_byte(long v) { return static_cast<std::uint8_t>(std::clamp(v, 0L, 255L)); }

}  // namespace

const FilterSpec& filter_spec(FilterName name) {
  switch (name) {
    case FilterName::Contour: return kContour;
    case FilterName::EdgeEnhanceMore: return kEdgeEnhanceMore;
    case FilterName::FindEdges: return kFindEdges;
    case FilterName::Sharpen: return kSharpen;
  }
  throw UsageError("unknown filter");
}

std::string_view to_string(FilterName name) {
  switch (name) {
    case FilterName::Contour: return "contour";
    case FilterName::EdgeEnhanceMore: return "edge-enhance-more";
    case FilterName::FindEdges: return "find-edges";
    case FilterName::Sharpen: return "sharpen";
  }
  return "?";
}

std::optional<FilterName> parse_filter(std::string_view text) {
  if (text == "none") return std::nullopt;
  for (FilterName f : {FilterName::Contour, FilterName::EdgeEnhanceMore, FilterName::FindEdges,
                       FilterName::Sharpen}) {
    if (text == to_string(f)) return f;
  }
  throw UsageError("unknown filter '" + std::string(text) +
                   "' (expected none|contour|edge-enhance-more|find-edges|sharpen)");
}

Raster apply_filter(const Raster& r, const FilterSpec& f) {
  if (f.divisor <= 0) throw UsageError("filter divisor must be positive");
  const std::size_t w = r.width();
  const std::size_t h = r.height();
  if (w < 3 || h < 3) {
    throw ShapeError("filter needs at least a 3x3 raster, got " + std::to_string(w) + "x" +
                     std::to_string(h));
  }
  Raster out = r;  // border frame stays as-is
  const long bias = static_cast<long>(f.offset) * f.divisor;
  for (std::size_t y = 1; y + 1 < h; ++y) {
    for (std::size_t x = 1; x + 1 < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        long sum = 0;
        for (std::size_t ky = 0; ky < 3; ++ky) {
          for (std::size_t kx = 0; kx < 3; ++kx) {
            sum += static_cast<long>(f.weights[ky * 3 + kx]) * r.at(x + kx - 1, y + ky - 1, c);
          }
        }
        out.at(x, y, c) = clamp_byte(round_div(sum + bias, f.divisor));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Geometry

Raster resize(const Raster& r, std::size_t width, std::size_t height) {
  if (width == 0 || height == 0) throw UsageError("resize target must be at least 1x1");
  if (width == r.width() && height == r.height()) return r;

  const std::size_t sw = r.width();
  const std::size_t sh = r.height();
  struct Tap {
    std::size_t lo, hi;
    double frac;
  };
  auto taps = [](std::size_t out_len, std::size_t in_len) {
    std::vector<Tap> t(out_len);
    const double scale = static_cast<double>(in_len) / static_cast<double>(out_len);
    for (std::size_t i = 0; i < out_len; ++i) {
      double s = (static_cast<double>(i) + 0.5) * scale - 0.5;
      s = std::clamp(s, 0.0, static_cast<double>(in_len - 1));
      const auto lo = static_cast<std::size_t>(std::floor(s));
      t[i] = {lo, std::min(lo + 1, in_len - 1), s - static_cast<double>(lo)};
    }
    return t;
  };
  const auto xt = taps(width, sw);
  const auto yt = taps(height, sh);

  Raster out(width, height);
  for (std::size_t y = 0; y < height; ++y) {
    const Tap& ty = yt[y];
    for (std::size_t x = 0; x < width; ++x) {
      const Tap& tx = xt[x];
      for (std::size_t c = 0; c < 3; ++c) {
        const double top = (1.0 - tx.frac) * r.at(tx.lo, ty.lo, c) + tx.frac * r.at(tx.hi, ty.lo, c);
        const double bot = (1.0 - tx.frac) * r.at(tx.lo, ty.hi, c) + tx.frac * r.at(tx.hi, ty.hi, c);
        const double v = (1.0 - ty.frac) * top + ty.frac * bot;
        out.at(x, y, c) = clamp_byte(static_cast<long>(std::floor(v + 0.5)));
      }
    }
  }
  return out;
}

Raster rotate(const Raster& r, Turn turn) {
  const std::size_t w = r.width();
  const std::size_t h = r.height();
  const bool swaps = turn != Turn::Half;
  Raster out(swaps ? h : w, swaps ? w : h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      std::size_t nx = 0, ny = 0;
      switch (turn) {
        case Turn::Left90: nx = y; ny = w - 1 - x; break;
        case Turn::Right90: nx = h - 1 - y; ny = x; break;
        case Turn::Half: nx = w - 1 - x; ny = h - 1 - y; break;
      }
      for (std::size_t c = 0; c < 3; ++c) out.at(nx, ny, c) = r.at(x, y, c);
    }
  }
  return out;
}

Tensor to_tensor(const Raster& r) {
  Tensor t({r.height(), r.width(), 3});
  auto src = r.pixels();
  auto dst = t.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<float>(src[i]) / 255.0f;
  return t;
}

// ---------------------------------------------------------------------------
// Codecs

namespace {

Raster decode_png(std::span<const std::uint8_t> bytes, const std::string& origin) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw IoError("cannot decode PNG " + origin + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  if (image.width == 0 || image.height == 0) {
    png_image_free(&image);
    throw IoError("zero-dimension image " + origin);
  }
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot decode PNG " + origin + ": " + msg);
  }
  return Raster(image.width, image.height, std::move(pixels));
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

// warnings are counted and reported by the caller, not printed
void jpeg_quiet(j_common_ptr) {}

Raster decode_jpeg(std::span<const std::uint8_t> bytes, const std::string& origin) {
  jpeg_decompress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  err.base.output_message = jpeg_quiet;
  std::vector<std::uint8_t> pixels;
  std::size_t width = 0, height = 0;

  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw IoError("cannot decode JPEG " + origin + ": " + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  width = cinfo.output_width;
  height = cinfo.output_height;
  if (width > 0 && height > 0) {
    pixels.resize(width * height * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
      JSAMPROW row = pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * 3;
      jpeg_read_scanlines(&cinfo, &row, 1);
    }
  }
  jpeg_finish_decompress(&cinfo);
  const bool truncated = cinfo.err->num_warnings > 0;
  jpeg_destroy_decompress(&cinfo);
  if (width == 0 || height == 0) throw IoError("zero-dimension image " + origin);
  if (truncated) throw IoError("corrupt or truncated JPEG " + origin);
  return Raster(width, height, std::move(pixels));
}

}  // namespace

Raster decode_raster(std::span<const std::uint8_t> bytes, const std::string& origin) {
  static constexpr std::uint8_t kPng[] = {0x89, 'P', 'N', 'G'};
  if (bytes.size() >= 4 && std::equal(std::begin(kPng), std::end(kPng), bytes.begin())) {
    return decode_png(bytes, origin);
  }
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) {
    return decode_jpeg(bytes, origin);
  }
  throw IoError("unsupported image format: " + origin);
}

Raster load_raster(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_raster(bytes, path.string());
}

void write_png(const std::filesystem::path& path, std::size_t width, std::size_t height,
               std::size_t channels, std::span<const std::uint8_t> pixels) {
  if (channels != 1 && channels != 3) throw UsageError("PNG writer supports 1 or 3 channels");
  if (pixels.size() != width * height * channels) {
    throw ShapeError("PNG pixel buffer does not match " + std::to_string(width) + "x" +
                     std::to_string(height) + "x" + std::to_string(channels));
  }
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
    throw IoError("PNG encode failed for " + path.string() + ": " + image.message);
  }
  std::vector<std::uint8_t> encoded(size);
  if (!png_image_write_to_memory(&image, encoded.data(), &size, 0, pixels.data(), 0, nullptr)) {
    throw IoError("PNG encode failed for " + path.string() + ": " + image.message);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(encoded.data()), static_cast<std::streamsize>(size));
  if (!out) throw IoError("cannot write " + path.string());
}

void write_png(const std::filesystem::path& path, const Raster& raster) {
  write_png(path, raster.width(), raster.height(), 3, raster.pixels());
}

}  // namespace fnet
