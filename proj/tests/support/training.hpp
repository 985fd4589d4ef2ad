#pragma once

// Small models and step inputs for gradient and training tests.

#include <random>

#include "elda/data.hpp"
#include "elda/losses.hpp"
#include "elda/model.hpp"
#include "elda/ops.hpp"
#include "elda/uda.hpp"

namespace elda::testing {

inline model::ModelConfig small_config() {
  model::ModelConfig c;
  c.base_channels = 4;
  c.encoder_depth = 2;
  c.num_classes = 5;
  return c;
}

/// Overwrites the (zero-initialized) correlation-module weights with small
/// random values so that every CM path carries signal.
inline void randomize_cm(model::ModelParams& params, std::uint64_t seed, double scale = 0.2) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& [name, t] : params) {
    if (!name.starts_with("cm.")) continue;
    for (auto& v : t.mutable_values()) v = u(rng);
  }
}

/// Moves a freshly initialized model to a generic point: random biases and CM
/// weights, so no pre-activation sits exactly on a ReLU kink.
inline void randomize_biases_and_cm(model::ModelParams& params, std::uint64_t seed, double bias_scale = 0.1,
                                    double cm_scale = 0.3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& [name, t] : params) {
    const bool cm = name.starts_with("cm.");
    if (!cm && !name.ends_with(".bias")) continue;
    for (auto& v : t.mutable_values()) v = u(rng) * (cm ? cm_scale : bias_scale);
  }
}

/// One source/target pair of `size`x`size` scenes plus pseudo-labels taken
/// from the model once, so that the loss is a fixed function of the weights.
inline uda::StepInputs fixed_step_inputs(const model::Model& m, std::size_t size, std::uint64_t seed,
                                         double threshold = 0.0) {
  data::SceneSpec spec;
  spec.size = size;
  spec.num_classes = m.config().num_classes;
  spec.domain = data::Domain::Source;
  auto src = data::generate_scene(spec, seed);
  spec.domain = data::Domain::Target;
  auto tgt = data::generate_scene(spec, seed + 1);
  uda::StepInputs in{src.image, src.label, tgt.image, std::nullopt};
  NoGradGuard guard;
  in.pseudo = uda::pseudo_labels(m.forward(tgt.image).y_final, threshold);
  return in;
}

inline std::vector<double> flat_gradient(const model::Model& m) {
  std::vector<double> g;
  for (const auto& [name, t] : m.params()) {
    const auto v = t.grad();
    g.insert(g.end(), v.begin(), v.end());
  }
  return g;
}

/// The purely source-supervised objective written out directly: CE of both
/// heads on the source image, plus CE of both heads on the mixed image against
/// source labels on the pasted pixels only. Returns the flattened gradient in
/// parameter-name order.
inline std::vector<double> source_only_gradient(model::Model& m, const uda::StepInputs& in,
                                                const std::vector<std::uint8_t>& mask) {
  const std::size_t H = in.source_label.height, W = in.source_label.width, P = H * W;
  const auto xs = in.source_image.values(), xt = in.target_image.values();
  std::vector<double> mixed(3 * P);
  LabelMap mixed_label(H, W, kIgnoreIndex);
  for (std::size_t i = 0; i < P; ++i) {
    for (std::size_t c = 0; c < 3; ++c) mixed[c * P + i] = mask[i] ? xs[c * P + i] : xt[c * P + i];
    if (mask[i]) mixed_label.labels[i] = in.source_label.labels[i];
  }
  m.zero_grads();
  const auto src = m.forward(in.source_image);
  const auto mix = m.forward(Tensor::from({3, H, W}, mixed));
  auto loss = add(add(losses::cross_entropy(in.source_label, src.y_init),
                      losses::cross_entropy(in.source_label, src.y_final)),
                  add(losses::cross_entropy(mixed_label, mix.y_init), losses::cross_entropy(mixed_label, mix.y_final)));
  loss.backward();
  return flat_gradient(m);
}

}  // namespace elda::testing
