#pragma once

#include <iosfwd>
#include <span>

#include "elda/edge.hpp"
#include "elda/labels.hpp"
#include "elda/tensor.hpp"

namespace elda::losses {

inline constexpr double kDiceEpsilon = 1e-8;
inline constexpr double kProbabilityFloor = 1e-12;

/// D(e, p) = 2 sum(e p) / (sum(e^2) + sum(p^2) + eps). Plain evaluation.
double dice_value(std::span<const double> target, std::span<const double> prediction);

/// Differentiable D(e, p) with respect to the prediction. The prediction may be
/// [H,W], [1,H,W] or [1,1,H,W]; the target must be a binary map of equal size.
Tensor dice(const edge::EdgeMap& target, const Tensor& prediction);

struct EdgePredictions {
  Tensor source_init;
  Tensor target_init;
  Tensor source_final;
  Tensor target_final;
};

struct EdgeLossTerms {
  Tensor init;   // (1 - D(e_s, p_s_init)) + (1 - D(e_t, p_t_init))
  Tensor final;  // same with final predictions
};

EdgeLossTerms edge_loss(const edge::EdgeMap& source_target, const edge::EdgeMap& target_target,
                        const EdgePredictions& preds);

/// Mean over non-ignored pixels of -log(max(p[true class], 1e-12)). `probabilities`
/// is a channel-normalized [1,C,H,W] or [C,H,W] tensor. Returns 0 when every
/// pixel is ignored.
Tensor cross_entropy(const LabelMap& labels, const Tensor& probabilities, std::int32_t ignore_index = kIgnoreIndex);

struct LossReport {
  double l_edge_init = 0.0;
  double l_edge_final = 0.0;
  double l_seg_init = 0.0;
  double l_seg_final = 0.0;
  double lambda = 1.0;
  double l_total = 0.0;
};

/// L_total = (L_seg_init + L_seg_final) + lambda (L_edge_init + L_edge_final).
LossReport total_loss(double l_seg_init, double l_seg_final, double l_edge_init, double l_edge_final, double lambda);

/// Same combination over graph tensors. Undefined edge tensors count as zero.
Tensor total_loss(const Tensor& l_seg_init, const Tensor& l_seg_final, const Tensor& l_edge_init,
                  const Tensor& l_edge_final, double lambda);

/// One metrics-log line: `step l_total l_seg_init l_seg_final l_edge_init l_edge_final`.
void write_metrics_line(std::ostream& os, std::size_t step, const LossReport& report);

}  // namespace elda::losses
