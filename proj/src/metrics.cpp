#include "elda/metrics.hpp"

#include <numeric>
#include <stdexcept>
#include <string>

#include "elda/tensor.hpp"

namespace elda::metrics {

std::uint64_t Metrics::total() const { return std::accumulate(confusion.begin(), confusion.end(), std::uint64_t{0}); }

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes, std::int32_t ignore_index)
    : num_classes_(num_classes), ignore_index_(ignore_index), counts_(num_classes * num_classes, 0) {
  if (num_classes == 0) throw std::invalid_argument("ConfusionMatrix: need at least one class");
}

void ConfusionMatrix::add(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth) {
  if (pred.size() != truth.size()) {
    throw ShapeError("miou: prediction has " + std::to_string(pred.size()) + " pixels, truth has " +
                     std::to_string(truth.size()));
  }
  const auto C = static_cast<std::int32_t>(num_classes_);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto t = truth[i];
    if (t == ignore_index_) continue;
    const auto p = pred[i];
    if (t < 0 || t >= C) throw std::out_of_range("miou: truth class " + std::to_string(t) + " out of range");
    if (p < 0 || p >= C) throw std::out_of_range("miou: predicted class " + std::to_string(p) + " out of range");
    ++counts_[static_cast<std::size_t>(t) * num_classes_ + static_cast<std::size_t>(p)];
  }
}

void ConfusionMatrix::add(const LabelMap& pred, const LabelMap& truth) {
  if (pred.height != truth.height || pred.width != truth.width) {
    throw ShapeError("miou: prediction " + std::to_string(pred.height) + "x" + std::to_string(pred.width) +
                     " vs truth " + std::to_string(truth.height) + "x" + std::to_string(truth.width));
  }
  add(pred.labels, truth.labels);
}

Metrics ConfusionMatrix::metrics() const {
  Metrics m;
  m.num_classes = num_classes_;
  m.confusion = counts_;
  m.per_class_iou.assign(num_classes_, kUndefinedIoU);
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < num_classes_; ++c) {
    std::uint64_t row = 0, col = 0;
    for (std::size_t k = 0; k < num_classes_; ++k) {
      row += m.at(c, k);
      col += m.at(k, c);
    }
    if (row == 0) continue;
    const auto tp = m.at(c, c);
    const double iou = static_cast<double>(tp) / static_cast<double>(row + col - tp);
    m.per_class_iou[c] = iou;
    sum += iou;
    ++present;
  }
  if (present > 0) m.miou = sum / static_cast<double>(present);
  return m;
}

Metrics miou(const LabelMap& pred, const LabelMap& truth, std::size_t num_classes, std::int32_t ignore_index) {
  ConfusionMatrix cm(num_classes, ignore_index);
  cm.add(pred, truth);
  return cm.metrics();
}

}  // namespace elda::metrics
