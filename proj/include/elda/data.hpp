#pragma once

// Synthetic source/target scenes, PPM/PGM I/O and paired-dataset loading.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "elda/labels.hpp"
#include "elda/tensor.hpp"

namespace elda::data {

enum class Domain { Source, Target };

/// Image-only appearance change applied to target scenes.
struct GapSpec {
  std::array<double, 3> color_shift{-0.3, 0.25, 0.3};
  double noise_amplitude = 0.08;
  double texture_frequency = 6.0;  // sinusoid periods across the image width
  double texture_amplitude = 0.12;
};

/// Classes: 0 background, 1 rectangle, 2 disk, 3 triangle, 4 stripe.
struct SceneSpec {
  std::size_t size = 64;
  std::size_t num_classes = 5;
  Domain domain = Domain::Source;
  GapSpec gap{};

  void validate() const;
};

struct Scene {
  Tensor image;  // [3,H,W], values in [0,1], no gradient
  LabelMap label;
};

Scene generate_scene(const SceneSpec& spec, std::uint64_t seed);

/// The target-domain appearance transform applied to a clean source image.
/// Noise is a pure function of (seed, pixel, channel).
Tensor apply_domain_gap(const Tensor& image, const GapSpec& gap, std::uint64_t seed);

/// splitmix64 finalizer; the per-pixel noise generator.
std::uint64_t mix64(std::uint64_t x);
/// Uniform in [-1, 1) derived from mix64(seed, index).
double hashed_uniform(std::uint64_t seed, std::uint64_t index);

// ---- PNM ----

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PnmImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;  // 1 (P5) or 3 (P6)
  unsigned maxval = 255;
  std::vector<std::uint8_t> data;  // interleaved, row-major
};

PnmImage read_pnm(const std::filesystem::path& path);
void write_pnm(const std::filesystem::path& path, const PnmImage& image);

/// [3,H,W] tensor from a P6 (or a replicated P5) image scaled by 1/maxval.
Tensor pnm_to_tensor(const PnmImage& image);
PnmImage tensor_to_ppm(const Tensor& image);
/// P5 pixel value = class id.
LabelMap pnm_to_labels(const PnmImage& image, const std::filesystem::path& origin);
PnmImage labels_to_pgm(const LabelMap& labels);

// ---- paired datasets ----

struct DatasetItem {
  std::string stem;
  Tensor image;
  std::optional<LabelMap> label;
};

/// Reads `dir/images/*.ppm` and, when present, `dir/labels/<stem>.pgm`, in
/// lexicographic stem order. A missing `images/` directory yields no items.
std::vector<DatasetItem> load_paired_dataset(const std::filesystem::path& dir);

}  // namespace elda::data
