#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "elda/labels.hpp"

namespace elda::metrics {

/// Marker for classes that never occur in the ground truth.
inline constexpr double kUndefinedIoU = std::numeric_limits<double>::quiet_NaN();

struct Metrics {
  std::size_t num_classes = 0;
  std::vector<std::uint64_t> confusion;  // row = truth, column = prediction
  std::vector<double> per_class_iou;     // kUndefinedIoU for classes absent from truth
  double miou = kUndefinedIoU;

  std::uint64_t at(std::size_t truth, std::size_t pred) const { return confusion[truth * num_classes + pred]; }
  std::uint64_t total() const;
};

/// Confusion-matrix accumulator over any number of label maps.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes, std::int32_t ignore_index = kIgnoreIndex);

  /// Pixels whose truth is ignore_index are skipped; any other id outside
  /// [0, C) throws std::out_of_range.
  void add(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth);
  void add(const LabelMap& pred, const LabelMap& truth);

  /// IoU_c = TP / (TP + FP + FN); mIoU averages classes present in the truth.
  Metrics metrics() const;

 private:
  std::size_t num_classes_;
  std::int32_t ignore_index_;
  std::vector<std::uint64_t> counts_;
};

Metrics miou(const LabelMap& pred, const LabelMap& truth, std::size_t num_classes,
             std::int32_t ignore_index = kIgnoreIndex);

}  // namespace elda::metrics
