#pragma once

// Geometric fixtures shared by the edge unit tests and the acceptance suite.

#include <algorithm>
#include <cstdlib>
#include <random>
#include <vector>

#include "elda/edge.hpp"

namespace elda::testing {

struct RectangleFixture {
  edge::GrayImage image;
  std::size_t y0, x0, y1, x1;  // inclusive bounds of the filled rectangle

  bool on_boundary(std::size_t y, std::size_t x) const {
    const bool inside = y >= y0 && y <= y1 && x >= x0 && x <= x1;
    return inside && (y == y0 || y == y1 || x == x0 || x == x1);
  }
  std::size_t perimeter_pixels() const { return 2 * (y1 - y0 + 1) + 2 * (x1 - x0 + 1) - 4; }
};

inline RectangleFixture make_rectangle(std::size_t h, std::size_t w, std::size_t y0, std::size_t x0, std::size_t y1,
                                       std::size_t x1, double fg = 1.0, double bg = 0.0) {
  RectangleFixture f{{h, w, std::vector<double>(h * w, bg)}, y0, x0, y1, x1};
  for (std::size_t y = y0; y <= y1; ++y)
    for (std::size_t x = x0; x <= x1; ++x) f.image.pixels[y * w + x] = fg;
  return f;
}

/// Random rectangle at least 5 px per side and at least 4 px from the border.
inline RectangleFixture random_rectangle(std::mt19937_64& rng, std::size_t size = 48) {
  auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
  const std::size_t y0 = pick(4, size / 2), x0 = pick(4, size / 2);
  const std::size_t y1 = pick(y0 + 4, size - 5), x1 = pick(x0 + 4, size - 5);
  return make_rectangle(size, size, y0, x0, y1, x1);
}

struct BoundaryScore {
  double boundary_recall = 0.0;       // boundary pixels with an edge within Chebyshev distance 1
  std::size_t stray_edge_pixels = 0;  // edge pixels farther than 1 from every boundary pixel
};

inline BoundaryScore score_rectangle(const RectangleFixture& f, const edge::EdgeMap& edges) {
  const std::size_t H = f.image.height, W = f.image.width;
  auto near = [&](std::size_t y, std::size_t x, auto&& pred) {
    for (long dy = -1; dy <= 1; ++dy)
      for (long dx = -1; dx <= 1; ++dx) {
        const long ny = static_cast<long>(y) + dy, nx = static_cast<long>(x) + dx;
        if (ny < 0 || nx < 0 || ny >= static_cast<long>(H) || nx >= static_cast<long>(W)) continue;
        if (pred(static_cast<std::size_t>(ny), static_cast<std::size_t>(nx))) return true;
      }
    return false;
  };
  std::size_t boundary = 0, covered = 0;
  BoundaryScore s;
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      if (f.on_boundary(y, x)) {
        ++boundary;
        if (near(y, x, [&](std::size_t a, std::size_t b) { return edges.values[a * W + b] > 0.5; })) ++covered;
      }
      if (edges.values[y * W + x] > 0.5 &&
          !near(y, x, [&](std::size_t a, std::size_t b) { return f.on_boundary(a, b); }))
        ++s.stray_edge_pixels;
    }
  s.boundary_recall = boundary ? static_cast<double>(covered) / static_cast<double>(boundary) : 0.0;
  return s;
}

}  // namespace elda::testing
