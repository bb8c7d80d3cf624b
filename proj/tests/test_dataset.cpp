#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "fnet/dataset.hpp"
#include "support.hpp"

using namespace fnet;
using fnet::testing::TempDir;
namespace fs = std::filesystem;

namespace {

Raster pattern(std::size_t w, std::size_t h, std::uint64_t seed) {
  Raster r(w, h);
  Rng rng(seed);
  for (auto& b : r.pixels()) b = static_cast<std::uint8_t>(rng.below(256));
  return r;
}

// train: counts[0..2]; test: counts[3..5]
void make_tree(const fs::path& root, std::array<std::size_t, 6> counts) {
  std::uint64_t seed = 1;
  for (std::size_t s = 0; s < 2; ++s) {
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      const fs::path dir = root / (s == 0 ? "train" : "test") / std::string(kClassNames[c]);
      fs::create_directories(dir);
      for (std::size_t i = 0; i < counts[s * 3 + c]; ++i) {
        write_png(dir / ("img" + std::to_string(i) + ".png"), pattern(12, 10, seed++));
      }
    }
  }
}

Manifest synthetic_manifest(std::size_t n) {
  Manifest m;
  for (std::size_t i = 0; i < n; ++i) {
    m.entries.push_back({"f" + std::to_string(i) + ".png", static_cast<int>(i % 3),
                         Augmentation::None, Split::Train});
  }
  return m;
}

}  // namespace

TEST_CASE("scan finds files in lexicographic order with fixed class ids") {
  TempDir dir("scan");
  make_tree(dir.path(), {2, 1, 3, 1, 1, 1});
  fnet::testing::spit(dir / "train/Normal/notes.txt", "ignored");
  const Manifest m = scan_dataset(dir.path());
  const auto train = m.of_split(Split::Train);
  REQUIRE(train.size() == 6);
  std::vector<int> ids;
  for (const auto& e : train) ids.push_back(e.class_id);
  CHECK(ids == std::vector<int>{0, 0, 1, 2, 2, 2});
  CHECK(train[0].path.filename() == "img0.png");
  CHECK(train[1].path.filename() == "img1.png");
  for (const auto& e : m.entries) CHECK(e.augmentation == Augmentation::None);
  CHECK(m.of_split(Split::Test).size() == 3);
  CHECK(scan_dataset(dir.path()) == m);
}

TEST_CASE("scan errors name the missing path") {
  TempDir dir("scan-bad");
  make_tree(dir.path(), {1, 1, 1, 1, 1, 1});
  SUBCASE("missing class directory") {
    fs::remove_all(dir / "test/COVID-19");
    try {
      scan_dataset(dir.path());
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("COVID-19") != std::string::npos);
    }
  }
  SUBCASE("missing split directory") {
    fs::remove_all(dir / "test");
    CHECK_THROWS_AS(scan_dataset(dir.path()), DataError);
  }
  SUBCASE("empty class directory") {
    fs::remove(dir / "train/Pneumonia/img0.png");
    CHECK_THROWS_AS(scan_dataset(dir.path()), DataError);
  }
}

TEST_CASE("standard balancing multiplies class counts by (2, 4, 1) per split") {
  Manifest m;
  const std::array<std::size_t, 6> n{7, 3, 11, 4, 2, 9};
  for (std::size_t s = 0; s < 2; ++s)
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < n[s * 3 + c]; ++i)
        m.entries.push_back({"s" + std::to_string(s) + "c" + std::to_string(c) + "_" + std::to_string(i),
                             static_cast<int>(c), Augmentation::None, s == 0 ? Split::Train : Split::Test});
  const Manifest b = balance(m, AugmentationPlan::standard());
  CHECK(b.class_counts(Split::Train) == std::array<std::size_t, 3>{14, 12, 11});
  CHECK(b.class_counts(Split::Test) == std::array<std::size_t, 3>{8, 8, 9});
  b.validate();
  for (const auto& e : m.entries) {
    CHECK(std::find(b.entries.begin(), b.entries.end(), e) != b.entries.end());
  }
  CHECK_THROWS_AS(balance(b, AugmentationPlan::standard()), DataError);
}

TEST_CASE("balance with an empty plan is the identity") {
  const Manifest m = synthetic_manifest(9);
  CHECK(balance(m, AugmentationPlan{}) == m);
}

TEST_CASE("half-turn plan on Normal entries") {
  Manifest m;
  for (int i = 0; i < 3; ++i) m.entries.push_back({"n" + std::to_string(i), 0, Augmentation::None, Split::Train});
  AugmentationPlan plan;
  plan.per_class[0] = {Augmentation::Half};
  const Manifest b = balance(m, plan);
  REQUIRE(b.entries.size() == 6);
  std::size_t halves = 0;
  for (const auto& e : b.entries) {
    if (e.augmentation == Augmentation::Half) {
      ++halves;
      CHECK(std::count(b.entries.begin(), b.entries.end(),
                       ManifestEntry{e.path, 0, Augmentation::None, Split::Train}) == 1);
    }
  }
  CHECK(halves == 3);
}

TEST_CASE("manifest validation") {
  Manifest m = synthetic_manifest(3);
  m.entries.push_back(m.entries[0]);
  CHECK_THROWS_AS(m.validate(), DataError);
  m = synthetic_manifest(3);
  m.entries.push_back({m.entries[0].path, 0, Augmentation::None, Split::Test});
  CHECK_THROWS_AS(m.validate(), DataError);
  m = synthetic_manifest(3);
  m.entries[1].class_id = 3;
  CHECK_THROWS_AS(m.validate(), DataError);
}

TEST_CASE("manifest file round trip") {
  TempDir dir("manifest");
  make_tree(dir / "data", {2, 1, 2, 1, 1, 1});
  const Manifest m = balance(scan_dataset(dir / "data"), AugmentationPlan::standard());
  write_manifest(m, dir / "data/manifest.tsv");
  CHECK(read_manifest(dir / "data/manifest.tsv") == m);
  const std::string text = fnet::testing::slurp(dir / "data/manifest.tsv");
  CHECK(text.find("train\t1\tleft90\t") != std::string::npos);

  fnet::testing::spit(dir / "bad.tsv", "train\t0\tsideways\tx.png\n");
  CHECK_THROWS_AS(read_manifest(dir / "bad.tsv"), DataError);
  CHECK_THROWS_AS(read_manifest(dir / "missing.tsv"), IoError);
}

TEST_CASE("train/validation split") {
  const auto entries = synthetic_manifest(10).entries;
  const auto s = split_train_val(entries, {0.3, 5});
  CHECK(s.train.size() == 7);
  CHECK(s.validation.size() == 3);
  std::set<std::string> all;
  for (const auto& e : s.train) all.insert(e.path.string());
  for (const auto& e : s.validation) CHECK(all.insert(e.path.string()).second);
  CHECK(all.size() == 10);

  const auto again = split_train_val(entries, {0.3, 5});
  CHECK(again.train == s.train);
  CHECK(again.validation == s.validation);
  CHECK(split_train_val(synthetic_manifest(20).entries, {0.3, 1}).validation.size() == 6);
  CHECK_FALSE(split_train_val(entries, {0.3, 6}).validation == s.validation);
  CHECK_THROWS_AS(split_train_val(synthetic_manifest(1).entries, {0.3, 1}), DataError);
}

TEST_CASE("batch plans") {
  const auto p = plan_batches(7, 3, 11);
  REQUIRE(p.size() == 3);
  CHECK(p[0].size() == 3);
  CHECK(p[1].size() == 3);
  CHECK(p[2].size() == 1);
  std::vector<std::size_t> seen;
  for (const auto& b : p) seen.insert(seen.end(), b.begin(), b.end());
  std::sort(seen.begin(), seen.end());
  CHECK(seen == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6});
  CHECK(plan_batches(7, 3, 11) == p);
  CHECK_FALSE(plan_batches(50, 50, 1) == plan_batches(50, 50, 2));
  CHECK_THROWS_AS(plan_batches(7, 0, 1), UsageError);
}

TEST_CASE("example cache applies rotation before filtering and resizing") {
  TempDir dir("cache");
  const Raster src = pattern(30, 20, 77);
  write_png(dir / "a.png", src);
  const ManifestEntry plain{dir / "a.png", 1, Augmentation::None, Split::Train};
  const ManifestEntry half{dir / "a.png", 1, Augmentation::Half, Split::Train};

  const ExampleCache none(std::vector<ManifestEntry>{half}, std::nullopt, 30);
  const Tensor rotated = to_tensor(resize(rotate(src, Turn::Half), 30, 30));
  const std::size_t idx[] = {0};
  CHECK(none.gather(idx).images.reshaped({30, 30, 3}) == rotated);

  const ExampleCache sharp(std::vector<ManifestEntry>{half}, FilterName::Sharpen, 100);
  const Raster expect =
      resize(apply_filter(rotate(src, Turn::Half), filter_spec(FilterName::Sharpen)), 100, 100);
  CHECK(sharp.gather(idx).images.reshaped({100, 100, 3}) == to_tensor(expect));
  CHECK(load_example(half, FilterName::Sharpen) == to_tensor(expect));

  // identity filter and no rotation: only the resize remains
  CHECK(load_example(plain, std::nullopt, 100) == to_tensor(resize(src, 100, 100)));
}

TEST_CASE("batch stream covers every label once per epoch") {
  TempDir dir("stream");
  std::vector<ManifestEntry> entries;
  for (int i = 0; i < 11; ++i) {
    const fs::path p = dir / ("x" + std::to_string(i) + ".png");
    write_png(p, pattern(8, 8, static_cast<std::uint64_t>(i)));
    entries.push_back({p, i % 3, Augmentation::None, Split::Train});
  }
  const ExampleCache cache(entries, std::nullopt, 8);
  const BatchStream stream(cache, 4, 3);
  CHECK(stream.count() == 3);
  std::vector<int> labels;
  for (std::size_t b = 0; b < stream.count(); ++b) {
    const Batch batch = stream.batch(b);
    CHECK(batch.images.dim(0) == batch.labels.size());
    CHECK(batch.images.dim(1) == 8);
    labels.insert(labels.end(), batch.labels.begin(), batch.labels.end());
  }
  std::vector<int> want;
  for (const auto& e : entries) want.push_back(e.class_id);
  std::sort(labels.begin(), labels.end());
  std::sort(want.begin(), want.end());
  CHECK(labels == want);
}

TEST_CASE("unreadable images name the path") {
  TempDir dir("cache-bad");
  fnet::testing::spit(dir / "broken.png", "not an image");
  try {
    ExampleCache cache({{dir / "broken.png", 0, Augmentation::None, Split::Train}}, std::nullopt);
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("broken.png") != std::string::npos);
  }
}
