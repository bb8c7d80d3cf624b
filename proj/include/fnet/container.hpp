#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fnet/tensor.hpp"

namespace fnet {

/// On-disk layout shared by model files and training checkpoints:
///
///   "FNET" | version byte | text header | float32 LE blobs | CRC-32 LE
///
/// The header is newline-separated ASCII: `key=value` fields, then one
/// `tensor <name> <d0,d1,...> <byte offset>` line per blob, then `end`.
/// Offsets are relative to the first blob; the CRC covers every byte before it.
struct Container {
  std::vector<std::pair<std::string, std::string>> fields;
  std::vector<std::pair<std::string, Tensor>> tensors;

  void set(const std::string& key, const std::string& value);
  const std::string& field(const std::string& key) const;
  bool has_field(const std::string& key) const;
  const Tensor& tensor(const std::string& name) const;
};

inline constexpr std::uint8_t kContainerVersion = 1;

std::vector<std::uint8_t> encode_container(const Container& c);
Container decode_container(std::span<const std::uint8_t> bytes, const std::string& origin);

void write_container(const std::filesystem::path& path, const Container& c);
Container read_container(const std::filesystem::path& path);

}  // namespace fnet
