#include "fnet/container.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace fnet {
namespace {

constexpr char kMagic[4] = {'F', 'N', 'E', 'T'};

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in slices
  std::size_t done = 0;
  while (done < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - done, 1u << 30);
    crc = crc32(crc, bytes.data() + done, static_cast<uInt>(n));
    done += n;
  }
  return static_cast<std::uint32_t>(crc);
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

Shape parse_shape(const std::string& text, const std::string& origin) {
  Shape shape;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      const unsigned long long d = std::stoull(part, &used);
      if (used != part.size() || d == 0) throw std::invalid_argument(part);
      shape.push_back(static_cast<std::size_t>(d));
    } catch (const std::exception&) {
      throw FormatError(origin + ": bad tensor shape '" + text + "'");
    }
  }
  if (shape.empty()) throw FormatError(origin + ": empty tensor shape");
  return shape;
}

}  // namespace

void Container::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : fields) {
    if (k == key) {
      v = value;
      return;
    }
  }
  fields.emplace_back(key, value);
}

const std::string& Container::field(const std::string& key) const {
  for (const auto& [k, v] : fields) {
    if (k == key) return v;
  }
  throw FormatError("missing header field '" + key + "'");
}

bool Container::has_field(const std::string& key) const {
  for (const auto& [k, v] : fields) {
    if (k == key) return true;
  }
  return false;
}

const Tensor& Container::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw FormatError("missing tensor '" + name + "'");
}

std::vector<std::uint8_t> encode_container(const Container& c) {
  std::ostringstream header;
  for (const auto& [k, v] : c.fields) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw UsageError("header field '" + k + "' cannot contain '=' or newlines");
    }
    header << k << '=' << v << '\n';
  }
  std::size_t offset = 0;
  for (const auto& [name, t] : c.tensors) {
    header << "tensor " << name << ' ';
    for (std::size_t i = 0; i < t.rank(); ++i) header << (i ? "," : "") << t.dim(i);
    header << ' ' << offset << '\n';
    offset += t.size() * sizeof(float);
  }
  header << "end\n";
  const std::string text = header.str();

  std::vector<std::uint8_t> out;
  out.reserve(5 + text.size() + offset + 4);
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  out.push_back(kContainerVersion);
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& [name, t] : c.tensors) {
    for (float v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  put_u32(out, crc32_of(out));
  return out;
}

Container decode_container(std::span<const std::uint8_t> bytes, const std::string& origin) {
  if (bytes.size() < 5 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError(origin + ": not a model file (bad magic)");
  }
  if (bytes[4] != kContainerVersion) {
    throw FormatError(origin + ": format version " + std::to_string(bytes[4]) +
                      " is not supported (expected " + std::to_string(kContainerVersion) + ")");
  }

  Container c;
  std::vector<std::size_t> offsets;
  std::size_t pos = 5;
  bool ended = false;
  while (!ended) {
    const auto* begin = bytes.data() + pos;
    const auto* nl = static_cast<const std::uint8_t*>(
        std::memchr(begin, '\n', bytes.size() - pos));
    if (!nl) throw FormatError(origin + ": truncated header");
    std::string line(reinterpret_cast<const char*>(begin), static_cast<std::size_t>(nl - begin));
    pos += line.size() + 1;
    if (line == "end") {
      ended = true;
    } else if (line.rfind("tensor ", 0) == 0) {
      std::istringstream ls(line.substr(7));
      std::string name, shape_text;
      std::size_t offset = 0;
      if (!(ls >> name >> shape_text >> offset)) {
        throw FormatError(origin + ": bad tensor line '" + line + "'");
      }
      const Shape shape = parse_shape(shape_text, origin);
      c.tensors.emplace_back(name, Tensor(shape));
      offsets.push_back(offset);
    } else {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw FormatError(origin + ": bad header line '" + line + "'");
      c.fields.emplace_back(line.substr(0, eq), line.substr(eq + 1));
    }
  }

  const std::size_t blob_start = pos;
  std::size_t expected = 0;
  for (std::size_t i = 0; i < c.tensors.size(); ++i) {
    if (offsets[i] != expected) throw FormatError(origin + ": tensor table offsets are not contiguous");
    expected += c.tensors[i].second.size() * sizeof(float);
  }
  if (bytes.size() < blob_start + expected + 4) {
    throw FormatError(origin + ": truncated blob (" + std::to_string(bytes.size()) + " bytes, need " +
                      std::to_string(blob_start + expected + 4) + ")");
  }
  if (bytes.size() > blob_start + expected + 4) {
    throw FormatError(origin + ": trailing bytes after checksum");
  }
  const std::size_t body = blob_start + expected;
  if (get_u32(bytes.data() + body) != crc32_of(bytes.first(body))) {
    throw FormatError(origin + ": checksum mismatch");
  }

  const std::uint8_t* p = bytes.data() + blob_start;
  for (auto& [name, t] : c.tensors) {
    for (float& v : t.data()) {
      v = std::bit_cast<float>(get_u32(p));
      p += 4;
    }
  }
  return c;
}

void write_container(const std::filesystem::path& path, const Container& c) {
  const auto bytes = encode_container(c);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("cannot write " + path.string());
}

Container read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_container(bytes, path.string());
}

}  // namespace fnet
