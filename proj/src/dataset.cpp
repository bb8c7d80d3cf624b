#include "fnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "fnet/parallel.hpp"
#include "fnet/rng.hpp"

namespace fs = std::filesystem;

namespace fnet {

std::string_view to_string(Split s) { return s == Split::Train ? "train" : "test"; }

std::string_view to_string(Augmentation a) {
  switch (a) {
    case Augmentation::None: return "none";
    case Augmentation::Left90: return "left90";
    case Augmentation::Right90: return "right90";
    case Augmentation::Half: return "half";
  }
  return "?";
}

Augmentation parse_augmentation(std::string_view text) {
  for (Augmentation a : {Augmentation::None, Augmentation::Left90, Augmentation::Right90,
                         Augmentation::Half}) {
    if (text == to_string(a)) return a;
  }
  throw DataError("unknown augmentation '" + std::string(text) + "'");
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::Train;
  if (text == "test") return Split::Test;
  throw DataError("unknown split '" + std::string(text) + "'");
}

std::optional<Turn> turn_for(Augmentation a) {
  switch (a) {
    case Augmentation::None: return std::nullopt;
    case Augmentation::Left90: return Turn::Left90;
    case Augmentation::Right90: return Turn::Right90;
    case Augmentation::Half: return Turn::Half;
  }
  return std::nullopt;
}

std::vector<ManifestEntry> Manifest::of_split(Split s) const {
  std::vector<ManifestEntry> out;
  std::copy_if(entries.begin(), entries.end(), std::back_inserter(out),
               [s](const ManifestEntry& e) { return e.split == s; });
  return out;
}

std::array<std::size_t, kNumClasses> Manifest::class_counts(Split s) const {
  std::array<std::size_t, kNumClasses> counts{};
  for (const auto& e : entries) {
    if (e.split == s) ++counts.at(static_cast<std::size_t>(e.class_id));
  }
  return counts;
}

void Manifest::validate() const {
  std::set<std::pair<std::string, Augmentation>> seen;
  std::map<std::string, Split> split_of;
  for (const auto& e : entries) {
    if (e.class_id < 0 || e.class_id >= static_cast<int>(kNumClasses)) {
      throw DataError("class id " + std::to_string(e.class_id) + " out of range for " +
                      e.path.string());
    }
    const std::string key = e.path.lexically_normal().string();
    if (!seen.emplace(key, e.augmentation).second) {
      throw DataError("duplicate manifest entry " + key + " (" +
                      std::string(to_string(e.augmentation)) + ")");
    }
    auto [it, inserted] = split_of.emplace(key, e.split);
    if (!inserted && it->second != e.split) {
      throw DataError("path appears in both train and test: " + key);
    }
  }
}

AugmentationPlan AugmentationPlan::standard() {
  AugmentationPlan plan;
  plan.per_class[0] = {Augmentation::Half};
  plan.per_class[1] = {Augmentation::Left90, Augmentation::Right90, Augmentation::Half};
  plan.per_class[2] = {};
  return plan;
}

namespace {

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace

Manifest scan_dataset(const fs::path& root) {
  Manifest m;
  for (Split split : {Split::Train, Split::Test}) {
    const fs::path split_dir = root / to_string(split);
    if (!fs::is_directory(split_dir)) {
      throw DataError("missing split directory " + split_dir.string());
    }
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      const fs::path class_dir = split_dir / kClassNames[c];
      if (!fs::is_directory(class_dir)) {
        throw DataError("missing class directory " + class_dir.string());
      }
      std::vector<fs::path> files;
      for (const auto& item : fs::directory_iterator(class_dir)) {
        if (item.is_regular_file() && is_image_file(item.path())) files.push_back(item.path());
      }
      if (files.empty()) throw DataError("class directory has no images: " + class_dir.string());
      std::sort(files.begin(), files.end());
      for (auto& f : files) {
        m.entries.push_back({std::move(f), static_cast<int>(c), Augmentation::None, split});
      }
    }
  }
  return m;
}

Manifest balance(const Manifest& m, const AugmentationPlan& plan) {
  Manifest out;
  out.entries.reserve(m.entries.size() * 2);
  for (const auto& e : m.entries) {
    if (e.augmentation != Augmentation::None) {
      throw DataError("balance() on an already-augmented manifest (" + e.path.string() + ")");
    }
    out.entries.push_back(e);
    for (Augmentation a : plan.per_class.at(static_cast<std::size_t>(e.class_id))) {
      ManifestEntry copy = e;
      copy.augmentation = a;
      out.entries.push_back(std::move(copy));
    }
  }
  return out;
}

void write_manifest(const Manifest& m, const fs::path& file) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest " + file.string());
  const fs::path base = fs::absolute(file).parent_path();
  for (const auto& e : m.entries) {
    fs::path p = fs::absolute(e.path).lexically_proximate(base);
    out << to_string(e.split) << '\t' << e.class_id << '\t' << to_string(e.augmentation) << '\t'
        << p.generic_string() << '\n';
  }
  if (!out) throw IoError("cannot write manifest " + file.string());
}

Manifest read_manifest(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open manifest " + file.string());
  const fs::path base = fs::absolute(file).parent_path();
  Manifest m;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    if (fields.size() != 4) {
      throw DataError(file.string() + ":" + std::to_string(line_no) +
                      ": expected 4 tab-separated fields");
    }
    ManifestEntry e;
    e.split = parse_split(fields[0]);
    try {
      e.class_id = std::stoi(fields[1]);
    } catch (const std::exception&) {
      throw DataError(file.string() + ":" + std::to_string(line_no) + ": bad class id");
    }
    e.augmentation = parse_augmentation(fields[2]);
    fs::path p(fields[3]);
    e.path = p.is_absolute() ? p : (base / p).lexically_normal();
    m.entries.push_back(std::move(e));
  }
  m.validate();
  return m;
}

TrainValSplit split_train_val(const std::vector<ManifestEntry>& entries, const SplitSpec& spec) {
  if (!(spec.validation_fraction > 0.0 && spec.validation_fraction < 1.0)) {
    throw UsageError("validation fraction must lie strictly between 0 and 1");
  }
  const std::size_t n = entries.size();
  if (n < 2) throw DataError("need at least 2 training entries to split, got " + std::to_string(n));

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(spec.seed);
  rng.shuffle(std::span<std::size_t>(order));

  // the epsilon keeps products like 0.3 * 20 from rounding up past an integer
  auto n_val = static_cast<std::size_t>(
      std::ceil(spec.validation_fraction * static_cast<double>(n) - 1e-9));
  n_val = std::clamp<std::size_t>(n_val, 1, n - 1);

  TrainValSplit out;
  for (std::size_t i = 0; i < n; ++i) {
    (i < n - n_val ? out.train : out.validation).push_back(entries[order[i]]);
  }
  return out;
}

Raster preprocess_raster(const Raster& source, Augmentation aug, std::optional<FilterName> filter,
                         std::size_t side) {
  Raster r = source;
  if (auto turn = turn_for(aug)) r = rotate(r, *turn);
  if (filter) r = apply_filter(r, filter_spec(*filter));
  return resize(r, side, side);
}

Tensor load_example(const ManifestEntry& entry, std::optional<FilterName> filter,
                     std::size_t side) {
  return to_tensor(preprocess_raster(load_raster(entry.path), entry.augmentation, filter, side));
}

std::vector<std::vector<std::size_t>> plan_batches(std::size_t count, std::size_t batch_size,
                                                   std::uint64_t epoch_seed) {
  if (batch_size == 0) throw UsageError("batch size must be at least 1");
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  Rng rng(epoch_seed);
  rng.shuffle(std::span<std::size_t>(order));

  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < count; start += batch_size) {
    const std::size_t end = std::min(count, start + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

ExampleCache::ExampleCache(std::vector<ManifestEntry> entries, std::optional<FilterName> filter,
                           std::size_t side)
    : entries_(std::move(entries)), side_(side), pixels_(entries_.size()) {
  parallel_for(entries_.size(), [&](std::size_t i) {
    const Raster r =
        preprocess_raster(load_raster(entries_[i].path), entries_[i].augmentation, filter, side_);
    auto px = r.pixels();
    pixels_[i].assign(px.begin(), px.end());
  });
}

Batch ExampleCache::gather(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw UsageError("empty batch");
  const std::size_t per = side_ * side_ * 3;
  Batch b{Tensor({indices.size(), side_, side_, 3}), {}};
  b.labels.reserve(indices.size());
  float* dst = b.images.raw();
  for (std::size_t i : indices) {
    const auto& src = pixels_.at(i);
    for (std::size_t j = 0; j < per; ++j) dst[j] = static_cast<float>(src[j]) / 255.0f;
    dst += per;
    b.labels.push_back(entries_[i].class_id);
  }
  return b;
}

BatchStream::BatchStream(const ExampleCache& cache, std::size_t batch_size,
                         std::uint64_t epoch_seed)
    : cache_(cache), plan_(plan_batches(cache.size(), batch_size, epoch_seed)) {}

}  // namespace fnet
