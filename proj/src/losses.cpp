#include "elda/losses.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

#include "elda/ops.hpp"

namespace elda::losses {

namespace {

std::size_t spatial_size(const Tensor& t) {
  const auto& s = t.shape();
  for (std::size_t i = 0; i + 2 < s.size(); ++i) {
    if (s[i] != 1) throw ShapeError("expected a single-channel map, got " + to_string(s));
  }
  return t.size();
}

void require_binary(std::span<const double> target) {
  for (double v : target) {
    if (v != 0.0 && v != 1.0) throw std::invalid_argument("dice: target edge map must be binary");
  }
}

}  // namespace

double dice_value(std::span<const double> target, std::span<const double> prediction) {
  if (target.size() != prediction.size()) {
    throw ShapeError("dice: target has " + std::to_string(target.size()) + " pixels, prediction has " +
                     std::to_string(prediction.size()));
  }
  double overlap = 0.0, tt = 0.0, pp = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    overlap += target[i] * prediction[i];
    tt += target[i] * target[i];
    pp += prediction[i] * prediction[i];
  }
  return 2.0 * overlap / (tt + pp + kDiceEpsilon);
}

Tensor dice(const edge::EdgeMap& target, const Tensor& prediction) {
  if (spatial_size(prediction) != target.values.size() ||
      (prediction.rank() >= 2 && (prediction.dim(prediction.rank() - 2) != target.height ||
                                  prediction.dim(prediction.rank() - 1) != target.width))) {
    throw ShapeError("dice: target [" + std::to_string(target.height) + "," + std::to_string(target.width) +
                     "] vs prediction " + to_string(prediction.shape()));
  }
  require_binary(target.values);
  const auto p = prediction.values();
  const auto& e = target.values;
  double overlap = 0.0, tt = 0.0, pp = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    overlap += e[i] * p[i];
    tt += e[i] * e[i];
    pp += p[i] * p[i];
  }
  const double denom = tt + pp + kDiceEpsilon;
  const double d = 2.0 * overlap / denom;
  return Tensor::make_result({}, {d}, {prediction}, [e, overlap, denom](detail::Node& self) {
    auto& pred = *self.parents[0];
    const double g = self.grad[0];
    // dD/dp_i = 2 e_i / B - 4 A p_i / B^2
    const double a = 2.0 / denom;
    const double b = 4.0 * overlap / (denom * denom);
    for (std::size_t i = 0; i < e.size(); ++i) pred.grad[i] += g * (a * e[i] - b * pred.values[i]);
  });
}

EdgeLossTerms edge_loss(const edge::EdgeMap& source_target, const edge::EdgeMap& target_target,
                        const EdgePredictions& preds) {
  auto term = [](const edge::EdgeMap& e, const Tensor& p) { return affine(dice(e, p), -1.0, 1.0); };
  EdgeLossTerms out;
  out.init = add(term(source_target, preds.source_init), term(target_target, preds.target_init));
  out.final = add(term(source_target, preds.source_final), term(target_target, preds.target_final));
  return out;
}

Tensor cross_entropy(const LabelMap& labels, const Tensor& probabilities, std::int32_t ignore_index) {
  const auto& s = probabilities.shape();
  const bool ok = (s.size() == 4 && s[0] == 1) || s.size() == 3;
  if (!ok) throw ShapeError("cross_entropy: expected [1,C,H,W] probabilities, got " + to_string(s));
  const std::size_t C = s[s.size() - 3], H = s[s.size() - 2], W = s[s.size() - 1];
  if (H != labels.height || W != labels.width) {
    throw ShapeError("cross_entropy: labels [" + std::to_string(labels.height) + "," + std::to_string(labels.width) +
                     "] vs probabilities " + to_string(s));
  }
  const std::size_t plane = H * W;
  const auto p = probabilities.values();
  std::size_t valid = 0;
  double total = 0.0;
  for (std::size_t i = 0; i < plane; ++i) {
    const auto y = labels.labels[i];
    if (y == ignore_index) continue;
    if (y < 0 || static_cast<std::size_t>(y) >= C) {
      throw std::out_of_range("cross_entropy: class id " + std::to_string(y) + " outside [0," + std::to_string(C) + ")");
    }
    total -= std::log(std::max(p[static_cast<std::size_t>(y) * plane + i], kProbabilityFloor));
    ++valid;
  }
  const double value = valid == 0 ? 0.0 : total / static_cast<double>(valid);
  return Tensor::make_result({}, {value}, {probabilities},
                             [labels = labels.labels, ignore_index, plane, valid](detail::Node& self) {
                               if (valid == 0) return;
                               auto& prob = *self.parents[0];
                               const double g = self.grad[0] / static_cast<double>(valid);
                               for (std::size_t i = 0; i < plane; ++i) {
                                 const auto y = labels[i];
                                 if (y == ignore_index) continue;
                                 const std::size_t j = static_cast<std::size_t>(y) * plane + i;
                                 const double v = prob.values[j];
                                 if (v > kProbabilityFloor) prob.grad[j] -= g / v;
                               }
                             });
}

LossReport total_loss(double l_seg_init, double l_seg_final, double l_edge_init, double l_edge_final, double lambda) {
  LossReport r;
  r.l_seg_init = l_seg_init;
  r.l_seg_final = l_seg_final;
  r.l_edge_init = l_edge_init;
  r.l_edge_final = l_edge_final;
  r.lambda = lambda;
  r.l_total = (l_seg_init + l_seg_final) + lambda * (l_edge_init + l_edge_final);
  return r;
}

Tensor total_loss(const Tensor& l_seg_init, const Tensor& l_seg_final, const Tensor& l_edge_init,
                  const Tensor& l_edge_final, double lambda) {
  Tensor total = add(l_seg_init, l_seg_final);
  if (l_edge_init.defined() && l_edge_final.defined()) {
    total = add(total, scale(add(l_edge_init, l_edge_final), lambda));
  }
  return total;
}

void write_metrics_line(std::ostream& os, std::size_t step, const LossReport& r) {
  const auto flags = os.flags();
  const auto prec = os.precision();
  os << std::setprecision(17) << step << ' ' << r.l_total << ' ' << r.l_seg_init << ' ' << r.l_seg_final << ' '
     << r.l_edge_init << ' ' << r.l_edge_final << '\n';
  os.flags(flags);
  os.precision(prec);
}

}  // namespace elda::losses
