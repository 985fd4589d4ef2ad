#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "json.hpp"

#include "elda/data.hpp"
#include "elda/model.hpp"
#include "elda/uda.hpp"

namespace elda {

/// Every tunable of a run. Serialized as a flat JSON object whose keys are
/// also the command-line flag names.
struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t steps = 2000;
  std::size_t threads = 1;

  std::size_t image_size = 64;
  std::size_t num_classes = 5;
  std::size_t in_channels = 3;
  std::size_t base_channels = 16;
  std::size_t encoder_depth = 3;

  double sigma = 1.0;
  double low = 0.1;
  double high = 0.2;
  double lambda = 1.0;
  double threshold = 0.9;
  double lr = 0.01;
  double momentum = 0.9;
  double grad_clip = 5.0;
  bool enable_edge_aux = true;
  bool enable_cm = true;
  std::size_t pseudo_refresh_interval = 1;

  std::array<double, 3> gap_color_shift = data::GapSpec{}.color_shift;
  double gap_noise = data::GapSpec{}.noise_amplitude;
  double gap_texture_frequency = data::GapSpec{}.texture_frequency;
  double gap_texture_amplitude = data::GapSpec{}.texture_amplitude;

  std::size_t source_pool = 64;
  std::size_t target_pool = 64;
  std::size_t eval_images = 32;
  std::size_t eval_every = 100;
  std::size_t checkpoint_every = 0;

  std::string out_dir = "run";

  /// Throws model::ConfigError naming the offending field.
  void validate() const;

  model::ModelConfig model_config() const;
  data::SceneSpec scene_spec(data::Domain domain) const;
  uda::SgdConfig sgd_config() const { return {lr, momentum, grad_clip}; }
  uda::StepConfig step_config() const { return {threshold}; }
};

nlohmann::json to_json(const RunConfig& config);
/// Starts from defaults; unknown keys and ill-typed values raise ConfigError.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

/// Applies textual overrides keyed by field name ("steps" -> "0",
/// "gap_color_shift" -> "0.1,0.2,0.3").
RunConfig apply_overrides(const RunConfig& base, const std::map<std::string, std::string>& overrides);

}  // namespace elda
