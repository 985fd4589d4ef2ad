#include "elda/uda.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "elda/ops.hpp"

namespace elda::uda {

PseudoLabelBatch pseudo_labels(const Tensor& distribution, double threshold, std::int32_t ignore_index) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw std::invalid_argument("pseudo_labels: threshold " + std::to_string(threshold) + " outside [0,1]");
  }
  const auto& s = distribution.shape();
  if (!((s.size() == 4 && s[0] == 1) || s.size() == 3)) {
    throw ShapeError("pseudo_labels: expected [1,C,H,W], got " + to_string(s));
  }
  const std::size_t C = s[s.size() - 3], H = s[s.size() - 2], W = s[s.size() - 1], plane = H * W;
  const auto v = distribution.values();
  PseudoLabelBatch out;
  out.labels = LabelMap(H, W, ignore_index);
  out.confidence.resize(plane);
  std::size_t kept = 0;
  for (std::size_t i = 0; i < plane; ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < C; ++c) {
      if (v[c * plane + i] > v[best * plane + i]) best = c;
    }
    const double conf = v[best * plane + i];
    out.confidence[i] = conf;
    if (conf >= threshold) {
      out.labels.labels[i] = static_cast<std::int32_t>(best);
      ++kept;
    }
  }
  out.coverage = plane == 0 ? 0.0 : static_cast<double>(kept) / static_cast<double>(plane);
  return out;
}

std::size_t uniform_index(Rng& rng, std::size_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: empty range");
  const std::uint64_t range = n;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<std::size_t>(x % range);
}

MixedBatch class_mix(const Tensor& source_image, const LabelMap& source_label, const Tensor& target_image,
                     const LabelMap& target_pseudo, Rng& rng) {
  if (source_image.shape() != target_image.shape() || source_image.rank() != 3 || source_image.dim(0) != 3) {
    throw ShapeError("class_mix: source image " + to_string(source_image.shape()) + " vs target image " +
                     to_string(target_image.shape()));
  }
  const std::size_t H = source_image.dim(1), W = source_image.dim(2), plane = H * W;
  if (source_label.height != H || source_label.width != W || target_pseudo.height != H || target_pseudo.width != W) {
    throw ShapeError("class_mix: label maps do not match image size " + to_string(source_image.shape()));
  }

  std::set<std::int32_t> present;
  for (auto y : source_label.labels) {
    if (y != kIgnoreIndex) present.insert(y);
  }
  if (present.empty()) throw std::invalid_argument("class_mix: source label contains no class");
  std::vector<std::int32_t> classes(present.begin(), present.end());
  const std::size_t pick = std::max<std::size_t>(1, classes.size() / 2);
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < pick; ++i) std::swap(classes[i], classes[i + uniform_index(rng, classes.size() - i)]);
  classes.resize(pick);
  std::sort(classes.begin(), classes.end());

  MixedBatch out;
  out.selected = classes;
  out.mask.assign(plane, 0);
  out.label = LabelMap(H, W);
  std::vector<double> pixels(3 * plane);
  const auto xs = source_image.values(), xt = target_image.values();
  for (std::size_t i = 0; i < plane; ++i) {
    const bool from_source = std::binary_search(classes.begin(), classes.end(), source_label.labels[i]);
    out.mask[i] = from_source ? 1 : 0;
    out.label.labels[i] = from_source ? source_label.labels[i] : target_pseudo.labels[i];
    for (std::size_t c = 0; c < 3; ++c) pixels[c * plane + i] = from_source ? xs[c * plane + i] : xt[c * plane + i];
  }
  out.image = Tensor::from(source_image.shape(), std::move(pixels));
  return out;
}

void Sgd::step(model::ModelParams& params) {
  double scale = 1.0;
  if (config_.grad_clip > 0.0) {
    double sq = 0.0;
    for (const auto& [name, t] : params)
      for (double g : t.grad()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > config_.grad_clip) scale = config_.grad_clip / norm;
  }
  for (auto& [name, t] : params) {
    auto& v = velocity_[name];
    if (v.size() != t.size()) v.assign(t.size(), 0.0);
    const auto g = t.grad();
    auto w = t.mutable_values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = config_.momentum * v[i] + scale * g[i];
      w[i] -= config_.lr * v[i];
    }
  }
}

StepLoss compute_step_loss(const model::Model& model, const StepInputs& inputs, const StepConfig& config, Rng& rng,
                           edge::EdgeCache& cache) {
  const auto& mc = model.config();
  const bool use_edges = mc.enable_edge_aux;
  StepLoss out;

  // (1) edge targets
  const edge::EdgeMap* e_s = nullptr;
  const edge::EdgeMap* e_t = nullptr;
  if (use_edges) {
    e_s = &cache.get(edge::to_gray(inputs.source_image), mc.canny);
    e_t = &cache.get(edge::to_gray(inputs.target_image), mc.canny);
  }

  // (2) source
  const auto src = model.forward(inputs.source_image);
  Tensor seg_init = losses::cross_entropy(inputs.source_label, src.y_init);
  Tensor seg_final = losses::cross_entropy(inputs.source_label, src.y_final);

  // (3) pseudo-labels from the target prediction, detached
  model::ForwardOutputs tgt;
  if (use_edges) {
    tgt = model.forward(inputs.target_image);
  } else if (!inputs.pseudo) {
    NoGradGuard frozen;
    tgt = model.forward(inputs.target_image);
  }
  out.pseudo = inputs.pseudo ? *inputs.pseudo : pseudo_labels(tgt.y_final.detach(), config.threshold);

  // (4) class-mixed pair
  out.mixed = class_mix(inputs.source_image, inputs.source_label, inputs.target_image, out.pseudo.labels, rng);
  const auto mix = model.forward(out.mixed.image);
  seg_init = add(seg_init, losses::cross_entropy(out.mixed.label, mix.y_init));
  seg_final = add(seg_final, losses::cross_entropy(out.mixed.label, mix.y_final));

  // (5) target edge terms
  Tensor edge_init, edge_final;
  if (use_edges) {
    const auto terms = losses::edge_loss(*e_s, *e_t, {src.e_init, tgt.e_init, src.e_final, tgt.e_final});
    edge_init = terms.init;
    edge_final = terms.final;
  }

  out.total = losses::total_loss(seg_init, seg_final, edge_init, edge_final, mc.lambda);
  out.report = losses::total_loss(seg_init.item(), seg_final.item(), use_edges ? edge_init.item() : 0.0,
                                   use_edges ? edge_final.item() : 0.0, mc.lambda);
  return out;
}

losses::LossReport train_step(model::Model& model, Sgd& optimizer, const StepInputs& inputs, const StepConfig& config,
                              Rng& rng, edge::EdgeCache& cache) {
  auto step = compute_step_loss(model, inputs, config, rng, cache);
  model.zero_grads();
  step.total.backward();
  optimizer.step(model.params());
  return step.report;
}

}  // namespace elda::uda
