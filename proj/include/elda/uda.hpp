#pragma once

// Target-domain self-training: pseudo-labels, class-mix augmentation and the
// single optimization step over the combined segmentation + edge objective.

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "elda/edge.hpp"
#include "elda/labels.hpp"
#include "elda/losses.hpp"
#include "elda/model.hpp"

namespace elda::uda {

using Rng = std::mt19937_64;

struct PseudoLabelBatch {
  LabelMap labels;                // argmax, or ignore where confidence < threshold
  std::vector<double> confidence;  // per-pixel max class probability
  double coverage = 0.0;           // fraction of non-ignored pixels
};

/// `distribution` is a channel-normalized [1,C,H,W] (or [C,H,W]) tensor. The
/// result holds plain values only, so nothing downstream can backpropagate
/// into the prediction that produced it.
PseudoLabelBatch pseudo_labels(const Tensor& distribution, double threshold, std::int32_t ignore_index = kIgnoreIndex);

struct MixedBatch {
  Tensor image;  // [3,H,W]
  LabelMap label;
  std::vector<std::uint8_t> mask;       // 1 = pixel taken from the source pair
  std::vector<std::int32_t> selected;  // source classes pasted, ascending
};

/// Pastes max(1, floor(K/2)) of the K classes present in the source label onto
/// the target image; labels compose the same way.
MixedBatch class_mix(const Tensor& source_image, const LabelMap& source_label, const Tensor& target_image,
                     const LabelMap& target_pseudo, Rng& rng);

/// Uniform integer in [0, n) by rejection sampling on the raw engine output.
std::size_t uniform_index(Rng& rng, std::size_t n);

struct SgdConfig {
  double lr = 0.01;
  double momentum = 0.9;
  double grad_clip = 5.0;  // global gradient norm cap, 0 disables
};

/// g <- g * min(1, grad_clip / |g|);  v <- momentum * v + g;  p <- p - lr * v
class Sgd {
 public:
  explicit Sgd(SgdConfig config = {}) : config_(config) {}
  void step(model::ModelParams& params);
  const SgdConfig& config() const { return config_; }

 private:
  SgdConfig config_;
  std::map<std::string, std::vector<double>> velocity_;
};

struct StepConfig {
  double threshold = 0.9;  // pseudo-label confidence
};

/// One training example. The target side carries an image only.
struct StepInputs {
  Tensor source_image;
  LabelMap source_label;
  Tensor target_image;
  /// When set, used instead of regenerating pseudo-labels from the model.
  std::optional<PseudoLabelBatch> pseudo;
};

struct StepLoss {
  losses::LossReport report;
  Tensor total;  // graph root for backward()
  PseudoLabelBatch pseudo;
  MixedBatch mixed;
};

/// Builds L_total for one step without touching gradients or weights:
///   1. Canny targets for both images (through `cache`)
///   2. source forward: CE against the source labels, source DICE terms
///   3. target forward with gradients detached -> pseudo-labels
///   4. class-mixed pair forward: CE against the mixed labels
///   5. target forward: target DICE terms
/// Steps 3 and 5 share one target forward when the edge branch is enabled;
/// pseudo-labels only ever read its values.
StepLoss compute_step_loss(const model::Model& model, const StepInputs& inputs, const StepConfig& config, Rng& rng,
                           edge::EdgeCache& cache);

/// compute_step_loss, zero grads, backward, one optimizer update.
losses::LossReport train_step(model::Model& model, Sgd& optimizer, const StepInputs& inputs, const StepConfig& config,
                              Rng& rng, edge::EdgeCache& cache);

}  // namespace elda::uda
