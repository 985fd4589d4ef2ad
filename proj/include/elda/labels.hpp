#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace elda {

/// Reserved class id for pixels that contribute nothing to losses or metrics.
inline constexpr std::int32_t kIgnoreIndex = 255;

/// Per-pixel class indices, row-major.
struct LabelMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::int32_t> labels;

  LabelMap() = default;
  LabelMap(std::size_t h, std::size_t w, std::int32_t fill = 0) : height(h), width(w), labels(h * w, fill) {}

  std::int32_t at(std::size_t y, std::size_t x) const { return labels[y * width + x]; }
  std::int32_t& at(std::size_t y, std::size_t x) { return labels[y * width + x]; }
  std::size_t size() const { return labels.size(); }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

}  // namespace elda
