#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include "fnet/raster.hpp"
#include "fnet/tensor.hpp"

namespace fnet {

inline constexpr std::size_t kNumClasses = 3;
inline constexpr std::array<std::string_view, kNumClasses> kClassNames = {"Normal", "COVID-19",
                                                                          "Pneumonia"};
inline constexpr std::size_t kInputSide = 100;

enum class Split { Train, Test };
enum class Augmentation { None, Left90, Right90, Half };

std::string_view to_string(Split s);
std::string_view to_string(Augmentation a);
Augmentation parse_augmentation(std::string_view text);
Split parse_split(std::string_view text);
std::optional<Turn> turn_for(Augmentation a);

struct ManifestEntry {
  std::filesystem::path path;
  int class_id = 0;
  Augmentation augmentation = Augmentation::None;
  Split split = Split::Train;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct Manifest {
  std::vector<ManifestEntry> entries;

  std::vector<ManifestEntry> of_split(Split s) const;
  /// Per-class counts within one split.
  std::array<std::size_t, kNumClasses> class_counts(Split s) const;
  /// Throws DataError on duplicate (path, augmentation) pairs, paths shared
  /// between train and test, or class ids outside [0, 3).
  void validate() const;

  friend bool operator==(const Manifest&, const Manifest&) = default;
};

/// Rotations added per class; originals are always kept.
struct AugmentationPlan {
  std::array<std::vector<Augmentation>, kNumClasses> per_class;

  /// Normal: half turn. COVID-19: left, right and half turns. Pneumonia: none.
  static AugmentationPlan standard();
};

struct SplitSpec {
  double validation_fraction = 0.3;
  std::uint64_t seed = 0;
};

/// Scans `<root>/{train,test}/{Normal,COVID-19,Pneumonia}/*.{png,jpg,jpeg}`.
Manifest scan_dataset(const std::filesystem::path& root);
Manifest balance(const Manifest& m, const AugmentationPlan& plan);

void write_manifest(const Manifest& m, const std::filesystem::path& file);
/// Relative paths in the file resolve against the manifest's directory.
Manifest read_manifest(const std::filesystem::path& file);

struct TrainValSplit {
  std::vector<ManifestEntry> train;
  std::vector<ManifestEntry> validation;
};

/// Seeded shuffle, then the last ceil(fraction * N) entries become validation.
TrainValSplit split_train_val(const std::vector<ManifestEntry>& entries, const SplitSpec& spec);

/// rotate -> filter -> resize -> normalize.
Raster preprocess_raster(const Raster& source, Augmentation aug, std::optional<FilterName> filter,
                         std::size_t side = kInputSide);
Tensor load_example(const ManifestEntry& entry, std::optional<FilterName> filter,
                     std::size_t side = kInputSide);

/// Epoch ordering split into batches; the last batch may be short.
std::vector<std::vector<std::size_t>> plan_batches(std::size_t count, std::size_t batch_size,
                                                   std::uint64_t epoch_seed);

struct Batch {
  Tensor images;  // [B, side, side, 3]
  std::vector<int> labels;
};

/// Preprocessed examples held as bytes; decoding happens once per run.
class ExampleCache {
 public:
  ExampleCache(std::vector<ManifestEntry> entries, std::optional<FilterName> filter,
               std::size_t side = kInputSide);

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t side() const noexcept { return side_; }
  const ManifestEntry& entry(std::size_t i) const { return entries_.at(i); }
  int label(std::size_t i) const { return entries_.at(i).class_id; }

  /// Assembles the given examples, in order, into one batch tensor.
  Batch gather(std::span<const std::size_t> indices) const;

 private:
  std::vector<ManifestEntry> entries_;
  std::size_t side_;
  std::vector<std::vector<std::uint8_t>> pixels_;
};

/// Batches for one epoch over every example of `cache`.
class BatchStream {
 public:
  BatchStream(const ExampleCache& cache, std::size_t batch_size, std::uint64_t epoch_seed);

  std::size_t count() const noexcept { return plan_.size(); }
  const std::vector<std::size_t>& indices(std::size_t b) const { return plan_.at(b); }
  Batch batch(std::size_t b) const { return cache_.gather(plan_.at(b)); }

 private:
  const ExampleCache& cache_;
  std::vector<std::vector<std::size_t>> plan_;
};

}  // namespace fnet
