#include "elda/edge.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace elda::edge {

namespace {

// Normalized magnitudes are snapped to this grid so that mathematically equal
// ridge pixels compare equal and the suppression tie-break is reproducible
// (e.g. under intensity inversion).
constexpr double kMagnitudeQuantum = 1e-9;

// tan(22.5 deg) and tan(67.5 deg)
constexpr double kTan22 = 0.41421356237309503;
constexpr double kTan67 = 2.4142135623730949;

}  // namespace

std::size_t EdgeMap::count() const {
  return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](double v) { return v > 0.5; }));
}

void CannyParams::validate() const {
  if (!(sigma > 0.0)) throw std::invalid_argument("canny: sigma must be positive");
  if (!(low > 0.0 && low < high)) {
    throw std::invalid_argument("canny: thresholds must satisfy 0 < low < high (got low=" + std::to_string(low) +
                                ", high=" + std::to_string(high) + ")");
  }
}

GrayImage to_gray(const Tensor& rgb) {
  const auto& s = rgb.shape();
  const bool chw = s.size() == 3 && s[0] == 3;
  const bool nchw = s.size() == 4 && s[0] == 1 && s[1] == 3;
  if (!chw && !nchw) throw ShapeError("to_gray: expected [3,H,W] image, got " + to_string(s));
  GrayImage out;
  out.height = s[s.size() - 2];
  out.width = s[s.size() - 1];
  const std::size_t plane = out.height * out.width;
  const auto v = rgb.values();
  out.pixels.resize(plane);
  for (std::size_t i = 0; i < plane; ++i) {
    const double y = 0.299 * v[i] + 0.587 * v[plane + i] + 0.114 * v[2 * plane + i];
    out.pixels[i] = std::clamp(y, 0.0, 1.0);
  }
  return out;
}

std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  const auto period = static_cast<std::ptrdiff_t>(2 * n);
  std::ptrdiff_t m = i % period;
  if (m < 0) m += period;
  return static_cast<std::size_t>(m < static_cast<std::ptrdiff_t>(n) ? m : period - 1 - m);
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_smooth: sigma must be positive");
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
    const double w = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
    taps[static_cast<std::size_t>(i + radius)] = w;
    total += w;
  }
  for (auto& w : taps) w /= total;
  return taps;
}

GrayImage gaussian_smooth(const GrayImage& img, double sigma) {
  const auto taps = gaussian_kernel(sigma);
  const auto radius = static_cast<std::ptrdiff_t>(taps.size() / 2);
  const std::size_t H = img.height, W = img.width;

  std::vector<double> rows(H * W);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      double s = 0.0;
      for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
        s += taps[static_cast<std::size_t>(k + radius)] *
             img.pixels[y * W + reflect_index(static_cast<std::ptrdiff_t>(x) + k, W)];
      }
      rows[y * W + x] = s;
    }

  GrayImage out{H, W, std::vector<double>(H * W)};
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      double s = 0.0;
      for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
        s += taps[static_cast<std::size_t>(k + radius)] *
             rows[reflect_index(static_cast<std::ptrdiff_t>(y) + k, H) * W + x];
      }
      out.pixels[y * W + x] = std::clamp(s, 0.0, 1.0);
    }
  return out;
}

SobelResult sobel_gradients(const GrayImage& img) {
  const std::size_t H = img.height, W = img.width;
  if (H < 3 || W < 3) {
    throw std::invalid_argument("sobel_gradients: image " + std::to_string(H) + "x" + std::to_string(W) +
                                " is smaller than 3x3");
  }
  SobelResult r{H, W, std::vector<double>(H * W), std::vector<double>(H * W), std::vector<double>(H * W),
                std::vector<double>(H * W)};
  auto px = [&](std::ptrdiff_t y, std::ptrdiff_t x) { return img.pixels[reflect_index(y, H) * W + reflect_index(x, W)]; };
  for (std::size_t uy = 0; uy < H; ++uy)
    for (std::size_t ux = 0; ux < W; ++ux) {
      const auto y = static_cast<std::ptrdiff_t>(uy), x = static_cast<std::ptrdiff_t>(ux);
      const double gx = (px(y - 1, x + 1) + 2.0 * px(y, x + 1) + px(y + 1, x + 1)) -
                        (px(y - 1, x - 1) + 2.0 * px(y, x - 1) + px(y + 1, x - 1));
      const double gy = (px(y + 1, x - 1) + 2.0 * px(y + 1, x) + px(y + 1, x + 1)) -
                        (px(y - 1, x - 1) + 2.0 * px(y - 1, x) + px(y - 1, x + 1));
      const std::size_t i = uy * W + ux;
      r.gx[i] = gx;
      r.gy[i] = gy;
      r.magnitude[i] = std::sqrt(gx * gx + gy * gy);
      double a = std::atan2(gy, gx);
      if (a <= -std::numbers::pi) a = std::numbers::pi;
      r.angle[i] = a;
    }
  return r;
}

Direction quantize_direction(double gx, double gy) {
  const double ax = std::abs(gx), ay = std::abs(gy);
  if (ay <= ax * kTan22) return Direction::Horizontal;
  if (ay >= ax * kTan67) return Direction::Vertical;
  return (gx > 0.0) == (gy > 0.0) ? Direction::Diagonal45 : Direction::Diagonal135;
}

std::vector<double> non_max_suppression(const SobelResult& grad, std::span<const double> magnitude) {
  const std::size_t H = grad.height, W = grad.width;
  std::vector<double> out(H * W, 0.0);
  auto mag = [&](std::ptrdiff_t y, std::ptrdiff_t x) {
    if (y < 0 || x < 0 || y >= static_cast<std::ptrdiff_t>(H) || x >= static_cast<std::ptrdiff_t>(W)) return 0.0;
    return magnitude[static_cast<std::size_t>(y) * W + static_cast<std::size_t>(x)];
  };
  for (std::size_t uy = 0; uy < H; ++uy)
    for (std::size_t ux = 0; ux < W; ++ux) {
      const std::size_t i = uy * W + ux;
      const double m = magnitude[i];
      if (m <= 0.0) continue;
      const auto y = static_cast<std::ptrdiff_t>(uy), x = static_cast<std::ptrdiff_t>(ux);
      // (dy, dx) of the neighbour on the negative side of the gradient line.
      std::ptrdiff_t dy = 0, dx = 0;
      switch (quantize_direction(grad.gx[i], grad.gy[i])) {
        case Direction::Horizontal: dx = -1; break;
        case Direction::Vertical: dy = -1; break;
        case Direction::Diagonal45: dy = -1; dx = -1; break;
        case Direction::Diagonal135: dy = -1; dx = 1; break;
      }
      // Strict on one side, inclusive on the other: a two-pixel plateau keeps exactly one.
      if (m > mag(y + dy, x + dx) && m >= mag(y - dy, x - dx)) out[i] = m;
    }
  return out;
}

std::vector<std::uint8_t> hysteresis(std::size_t height, std::size_t width, std::span<const double> suppressed,
                                     double low, double high) {
  std::vector<std::uint8_t> keep(height * width, 0);
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < suppressed.size(); ++i) {
    if (suppressed[i] >= high) {
      keep[i] = 1;
      stack.push_back(i);
    }
  }
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    const auto y = static_cast<std::ptrdiff_t>(i / width), x = static_cast<std::ptrdiff_t>(i % width);
    for (std::ptrdiff_t dy = -1; dy <= 1; ++dy)
      for (std::ptrdiff_t dx = -1; dx <= 1; ++dx) {
        const auto ny = y + dy, nx = x + dx;
        if (ny < 0 || nx < 0 || ny >= static_cast<std::ptrdiff_t>(height) || nx >= static_cast<std::ptrdiff_t>(width))
          continue;
        const std::size_t j = static_cast<std::size_t>(ny) * width + static_cast<std::size_t>(nx);
        if (!keep[j] && suppressed[j] >= low) {
          keep[j] = 1;
          stack.push_back(j);
        }
      }
  }
  return keep;
}

EdgeMap canny(const GrayImage& img, const CannyParams& params) {
  params.validate();
  EdgeMap out{img.height, img.width, std::vector<double>(img.height * img.width, 0.0), EdgeKind::BinaryTarget};
  const auto smooth = gaussian_smooth(img, params.sigma);
  const auto grad = sobel_gradients(smooth);
  const double peak = *std::max_element(grad.magnitude.begin(), grad.magnitude.end());
  if (peak <= 0.0) return out;

  std::vector<double> normalized(grad.magnitude.size());
  for (std::size_t i = 0; i < normalized.size(); ++i) {
    normalized[i] = std::round(grad.magnitude[i] / peak / kMagnitudeQuantum) * kMagnitudeQuantum;
  }
  const auto suppressed = non_max_suppression(grad, normalized);
  const auto keep = hysteresis(img.height, img.width, suppressed, params.low, params.high);
  for (std::size_t i = 0; i < keep.size(); ++i) out.values[i] = keep[i] ? 1.0 : 0.0;
  return out;
}

std::uint64_t content_hash(std::span<const double> values) {
  // FNV-1a over the raw bit patterns.
  std::uint64_t h = 1469598103934665603ULL;
  for (double v : values) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffU;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

const EdgeMap& EdgeCache::get(const GrayImage& img, const CannyParams& params) {
  const Key key{content_hash(img.pixels), img.height, img.width, params.sigma, params.low, params.high};
  std::lock_guard lock(mutex_);
  if (auto it = entries_.find(key); it != entries_.end()) {
    ++hits_;
    return it->second;
  }
  return entries_.emplace(key, canny(img, params)).first->second;
}

std::size_t EdgeCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

}  // namespace elda::edge
