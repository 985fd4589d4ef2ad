#pragma once

// Classical edge extraction: the label-free supervision targets for the
// auxiliary edge task.

#include <cstdint>
#include <map>
#include <mutex>
#include <tuple>
#include <vector>

#include "elda/tensor.hpp"

namespace elda::edge {

struct GrayImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;  // row-major, each in [0,1]

  double at(std::size_t y, std::size_t x) const { return pixels[y * width + x]; }
};

enum class EdgeKind { BinaryTarget, ContinuousPrediction };

struct EdgeMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;
  EdgeKind kind = EdgeKind::BinaryTarget;

  std::size_t count() const;
};

struct SobelResult {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> gx;
  std::vector<double> gy;
  std::vector<double> magnitude;
  std::vector<double> angle;  // atan2(gy, gx) in (-pi, pi]
};

struct CannyParams {
  double sigma = 1.0;
  double low = 0.1;   // on magnitude normalized by its image maximum
  double high = 0.2;

  void validate() const;
  friend bool operator==(const CannyParams&, const CannyParams&) = default;
};

/// Luminance 0.299R + 0.587G + 0.114B of a [3,H,W] (or [1,3,H,W]) tensor.
GrayImage to_gray(const Tensor& rgb);

/// Half-sample symmetric reflection (x[-1] = x[0]) folded to any offset.
std::size_t reflect_index(std::ptrdiff_t i, std::size_t n);

/// Normalized 1-D Gaussian taps, radius ceil(3 sigma).
std::vector<double> gaussian_kernel(double sigma);

GrayImage gaussian_smooth(const GrayImage& img, double sigma);

SobelResult sobel_gradients(const GrayImage& img);

/// Gradient direction bin used by non-maximum suppression.
enum class Direction { Horizontal, Diagonal45, Vertical, Diagonal135 };
Direction quantize_direction(double gx, double gy);

/// Keeps pixels that are local maxima along their quantized gradient direction.
/// Returns the surviving (normalized) magnitudes, zero elsewhere.
std::vector<double> non_max_suppression(const SobelResult& grad, std::span<const double> magnitude);

/// Double threshold plus 8-connected hysteresis from strong seeds.
std::vector<std::uint8_t> hysteresis(std::size_t height, std::size_t width, std::span<const double> suppressed,
                                     double low, double high);

EdgeMap canny(const GrayImage& img, const CannyParams& params = {});

/// Memoizes canny() targets keyed by (image content hash, sigma, low, high).
/// Thread-safe.
class EdgeCache {
 public:
  const EdgeMap& get(const GrayImage& img, const CannyParams& params);
  std::size_t size() const;
  std::size_t hits() const { return hits_; }

 private:
  using Key = std::tuple<std::uint64_t, std::size_t, std::size_t, double, double, double>;
  mutable std::mutex mutex_;
  std::map<Key, EdgeMap> entries_;
  std::size_t hits_ = 0;
};

std::uint64_t content_hash(std::span<const double> values);

}  // namespace elda::edge
