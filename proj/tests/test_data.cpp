#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

#include "elda/data.hpp"
#include "elda/metrics.hpp"
#include "support/oracles.hpp"

namespace elda::data {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / name) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

TEST(GenerateScene, Deterministic) {
  SceneSpec spec;
  for (auto domain : {Domain::Source, Domain::Target}) {
    spec.domain = domain;
    const auto a = generate_scene(spec, 5), b = generate_scene(spec, 5);
    EXPECT_EQ(a.label, b.label);
    for (std::size_t i = 0; i < a.image.size(); ++i) ASSERT_EQ(a.image.at(i), b.image.at(i));
  }
  EXPECT_NE(generate_scene(spec, 5).label, generate_scene(spec, 6).label);
}

TEST(GenerateScene, HistogramHasBackgroundAndAShape) {
  SceneSpec spec;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = generate_scene(spec, seed);
    std::set<std::int32_t> classes(s.label.labels.begin(), s.label.labels.end());
    EXPECT_TRUE(classes.count(0)) << seed;
    EXPECT_GE(classes.size(), 2u) << seed;
    for (auto c : classes) EXPECT_LT(c, 5);
    for (double v : s.image.values()) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
    }
  }
}

TEST(GenerateScene, RespectsClassCount) {
  SceneSpec spec;
  spec.num_classes = 3;
  for (std::uint64_t seed = 0; seed < 50; ++seed)
    for (auto v : generate_scene(spec, seed).label.labels) ASSERT_LT(v, 3);
  spec.num_classes = 1;
  EXPECT_THROW(generate_scene(spec, 0), std::invalid_argument);
}

// splitmix64 written out again, independent of the library's helper.
std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

TEST(GenerateScene, TargetDiffersFromSourceExactlyByGap) {
  SceneSpec src_spec, tgt_spec;
  tgt_spec.domain = Domain::Target;
  const GapSpec gap = tgt_spec.gap;
  for (std::uint64_t seed : {0ULL, 17ULL, 123456789ULL}) {
    const auto src = generate_scene(src_spec, seed), tgt = generate_scene(tgt_spec, seed);
    EXPECT_EQ(src.label, tgt.label);
    const std::size_t H = 64, W = 64;
    const std::uint64_t noise_seed = splitmix(seed ^ 0x7a2f3c9d11e4b5a1ULL);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
          const std::size_t i = (c * H + y) * W + x;
          const double u = static_cast<double>(splitmix(noise_seed ^ i) >> 11) / 4503599627370496.0 - 1.0;
          const double tex = gap.texture_amplitude * std::sin(2 * std::numbers::pi * gap.texture_frequency * x / W) *
                             std::cos(2 * std::numbers::pi * gap.texture_frequency * y / H);
          const double expected =
              std::clamp(src.image.at(i) + gap.color_shift[c] + tex + gap.noise_amplitude * u, 0.0, 1.0);
          ASSERT_NEAR(tgt.image.at(i), expected, 1e-15) << "seed " << seed << " index " << i;
        }
  }
}

TEST(HashedUniform, RangeAndSpread) {
  double lo = 1, hi = -1, mean = 0;
  for (std::uint64_t i = 0; i < 10000; ++i) {
    const double u = hashed_uniform(3, i);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    mean += u / 10000;
  }
  EXPECT_GE(lo, -1.0);
  EXPECT_LT(hi, 1.0);
  EXPECT_LT(lo, -0.99);
  EXPECT_GT(hi, 0.99);
  EXPECT_NEAR(mean, 0.0, 0.03);
}

LabelMap make_labels(std::size_t h, std::size_t w, std::vector<std::int32_t> v) {
  LabelMap m(h, w);
  m.labels = std::move(v);
  return m;
}

TEST(Miou, HandComputedTwoByTwo) {
  const auto m = metrics::miou(make_labels(2, 2, {0, 1, 1, 1}), make_labels(2, 2, {0, 0, 1, 1}), 2);
  EXPECT_DOUBLE_EQ(m.per_class_iou[0], 0.5);
  EXPECT_DOUBLE_EQ(m.per_class_iou[1], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.miou, 7.0 / 12.0);
  EXPECT_EQ(m.at(0, 1), 1u);
  EXPECT_EQ(m.total(), 4u);
}

TEST(Miou, PerfectPredictionAndAbsentClasses) {
  const auto t = make_labels(1, 4, {0, 2, 2, 0});
  const auto m = metrics::miou(t, t, 4);
  EXPECT_EQ(m.miou, 1.0);
  EXPECT_TRUE(std::isnan(m.per_class_iou[1]));
  EXPECT_TRUE(std::isnan(m.per_class_iou[3]));
}

TEST(Miou, MatchesSetOracleOnRandomMaps) {
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 100; ++trial) {
    const std::int32_t C = 2 + trial % 5;
    const std::size_t h = 3 + trial % 7, w = 4 + trial % 5;
    std::uniform_int_distribution<std::int32_t> cls(0, C - 1);
    std::bernoulli_distribution ignore(0.1);
    std::vector<std::int32_t> p(h * w), t(h * w);
    for (std::size_t i = 0; i < h * w; ++i) {
      p[i] = cls(rng);
      t[i] = ignore(rng) ? kIgnoreIndex : cls(rng);
    }
    const auto m = metrics::miou(make_labels(h, w, p), make_labels(h, w, t), C);
    const double expected = testing::miou_oracle(p, t, C, kIgnoreIndex);
    if (std::isnan(expected)) {
      EXPECT_TRUE(std::isnan(m.miou));
    } else {
      EXPECT_EQ(m.miou, expected) << "trial " << trial;
    }
  }
}

TEST(Miou, InvariantUnderClassPermutation) {
  std::mt19937_64 rng(72);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<std::int32_t> perm{0, 1, 2, 3, 4};
    std::shuffle(perm.begin(), perm.end(), rng);
    std::uniform_int_distribution<std::int32_t> cls(0, 4);
    std::vector<std::int32_t> p(36), t(36), pp(36), tp(36);
    for (std::size_t i = 0; i < 36; ++i) {
      p[i] = cls(rng);
      t[i] = cls(rng);
      pp[i] = perm[p[i]];
      tp[i] = perm[t[i]];
    }
    EXPECT_NEAR(metrics::miou(make_labels(6, 6, p), make_labels(6, 6, t), 5).miou,
                metrics::miou(make_labels(6, 6, pp), make_labels(6, 6, tp), 5).miou, 1e-15);
  }
}

TEST(Miou, ErrorsAndAccumulation) {
  EXPECT_THROW(metrics::miou(make_labels(1, 2, {0, 3}), make_labels(1, 2, {0, 1}), 2), std::out_of_range);
  EXPECT_THROW(metrics::miou(make_labels(1, 2, {0, 1}), make_labels(1, 2, {0, 2}), 2), std::out_of_range);
  metrics::ConfusionMatrix cm(2);
  cm.add(make_labels(1, 2, {0, 1}), make_labels(1, 2, {0, 1}));
  cm.add(make_labels(1, 2, {1, 1}), make_labels(1, 2, {0, kIgnoreIndex}));
  const auto m = cm.metrics();
  EXPECT_EQ(m.total(), 3u);
  EXPECT_DOUBLE_EQ(m.per_class_iou[0], 0.5);
  EXPECT_DOUBLE_EQ(m.per_class_iou[1], 0.5);
}

TEST(Pnm, RoundTripImagesAndLabels) {
  TempDir dir("elda_pnm_test");
  const auto scene = generate_scene(SceneSpec{}, 9);
  write_pnm(dir.path() / "a.ppm", tensor_to_ppm(scene.image));
  write_pnm(dir.path() / "a.pgm", labels_to_pgm(scene.label));
  const auto img = read_pnm(dir.path() / "a.ppm");
  EXPECT_EQ(img.channels, 3u);
  const auto t = pnm_to_tensor(img);
  for (std::size_t i = 0; i < t.size(); ++i)
    ASSERT_NEAR(t.at(i), std::round(scene.image.at(i) * 255.0) / 255.0, 1e-12);
  EXPECT_EQ(pnm_to_labels(read_pnm(dir.path() / "a.pgm"), dir.path() / "a.pgm"), scene.label);
}

TEST(Pnm, HeaderCommentsAndErrorsNameTheFile) {
  TempDir dir("elda_pnm_err_test");
  {
    std::ofstream os(dir.path() / "ok.pgm", std::ios::binary);
    os << "P5\n# a comment\n2 1\n255\n";
    os.put(char(7));
    os.put(char(9));
  }
  const auto ok = read_pnm(dir.path() / "ok.pgm");
  EXPECT_EQ(ok.width, 2u);
  EXPECT_EQ(ok.data, (std::vector<std::uint8_t>{7, 9}));

  const auto bad = dir.path() / "broken.pgm";
  {
    std::ofstream os(bad, std::ios::binary);
    os << "P5\nxx 1\n255\n";
  }
  try {
    read_pnm(bad);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("broken.pgm"), std::string::npos);
  }
  const auto truncated = dir.path() / "short.ppm";
  {
    std::ofstream os(truncated, std::ios::binary);
    os << "P6\n4 4\n255\nabc";
  }
  EXPECT_THROW(read_pnm(truncated), FormatError);
}

TEST(PairedDataset, EmptyOnePairAndMismatch) {
  TempDir dir("elda_dataset_test");
  EXPECT_TRUE(load_paired_dataset(dir.path()).empty());
  fs::create_directories(dir.path() / "images");
  EXPECT_TRUE(load_paired_dataset(dir.path()).empty());

  const auto scene = generate_scene(SceneSpec{}, 3);
  write_pnm(dir.path() / "images" / "b.ppm", tensor_to_ppm(scene.image));
  auto items = load_paired_dataset(dir.path());
  ASSERT_EQ(items.size(), 1u);
  EXPECT_EQ(items[0].stem, "b");
  EXPECT_FALSE(items[0].label.has_value());

  fs::create_directories(dir.path() / "labels");
  write_pnm(dir.path() / "labels" / "b.pgm", labels_to_pgm(scene.label));
  write_pnm(dir.path() / "images" / "a.ppm", tensor_to_ppm(scene.image));
  items = load_paired_dataset(dir.path());
  ASSERT_EQ(items.size(), 2u);
  EXPECT_EQ(items[0].stem, "a");
  EXPECT_EQ(items[1].stem, "b");
  ASSERT_TRUE(items[1].label.has_value());
  EXPECT_EQ(*items[1].label, scene.label);

  write_pnm(dir.path() / "labels" / "a.pgm", labels_to_pgm(LabelMap(8, 8, 0)));
  EXPECT_THROW(load_paired_dataset(dir.path()), std::exception);
}

}  // namespace
}  // namespace elda::data
