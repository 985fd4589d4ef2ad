#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "elda/edge.hpp"
#include "elda/tensor.hpp"

namespace elda::model {

struct ModelConfig {
  std::size_t in_channels = 3;
  std::size_t base_channels = 16;
  std::size_t num_classes = 5;
  std::size_t encoder_depth = 3;
  edge::CannyParams canny{};
  double lambda = 1.0;
  bool enable_edge_aux = true;
  bool enable_cm = true;

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
  /// Channels of f_shared and of both task features.
  std::size_t feature_channels() const { return base_channels << (encoder_depth - 1); }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Learnable weights addressed by path, e.g. "sdi.enc0.kernel". Sorted by name.
using ModelParams = std::map<std::string, Tensor>;

/// Name and shape of every parameter the forward graph uses for `config`.
std::map<std::string, Shape> parameter_layout(const ModelConfig& config);

/// He-normal kernels with zero biases; correlation-module convolutions start
/// at zero so the module begins as an exact passthrough.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

enum class Branch { Edge, Seg };

struct BranchOutput {
  Tensor features;    // f_edge or f_seg
  Tensor prediction;  // sigmoid edge map [1,1,H,W] or softmax [1,C,H,W]
};

struct CorrelationOutput {
  Tensor edge_cm;
  Tensor seg_cm;
};

struct FinalOutput {
  Tensor edge;  // undefined when the edge branch is disabled
  Tensor seg;
};

struct ForwardOutputs {
  Tensor f_shared;
  Tensor f_edge;
  Tensor f_seg;
  Tensor f_edge_cm;
  Tensor f_seg_cm;
  Tensor e_init;
  Tensor e_final;
  Tensor y_init;
  Tensor y_final;
};

Tensor sdi_encode(const ModelConfig& config, const ModelParams& params, const Tensor& image);
BranchOutput tsb_forward(const ModelConfig& config, const ModelParams& params, const Tensor& f_shared, Branch branch);
CorrelationOutput correlation(const ModelParams& params, const Tensor& f_edge, const Tensor& f_seg);
FinalOutput decode_final(const ModelConfig& config, const ModelParams& params, const Tensor& f_edge,
                         const Tensor& f_seg);
ForwardOutputs forward(const ModelConfig& config, const ModelParams& params, const Tensor& image);

/// Owns a configuration and its parameters.
class Model {
 public:
  Model(ModelConfig config, std::uint64_t seed);
  /// Adopts existing parameters after checking them against parameter_layout().
  Model(ModelConfig config, ModelParams params);

  const ModelConfig& config() const { return config_; }
  const ModelParams& params() const { return params_; }
  ModelParams& params() { return params_; }

  ForwardOutputs forward(const Tensor& image) const { return model::forward(config_, params_, image); }
  void zero_grads();
  std::size_t parameter_count() const;

 private:
  ModelConfig config_;
  ModelParams params_;
};

/// Per-pixel argmax over the class axis of a [1,C,H,W] distribution.
std::vector<std::int32_t> argmax_classes(const Tensor& distribution);

}  // namespace elda::model
