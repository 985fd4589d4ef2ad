#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "elda/config.hpp"
#include "elda/data.hpp"
#include "elda/metrics.hpp"
#include "elda/model.hpp"

namespace elda::train {

/// Labeled source scenes.
struct SourceDomain {
  std::vector<data::Scene> scenes;
};

/// Unlabeled target images. Target labels never enter this type.
class TargetDomain {
 public:
  explicit TargetDomain(std::vector<Tensor> images) : images_(std::move(images)) {}
  std::size_t size() const { return images_.size(); }
  const Tensor& image(std::size_t i) const { return images_.at(i); }

 private:
  std::vector<Tensor> images_;
};

struct Benchmark {
  SourceDomain source;
  TargetDomain target{{}};
  std::vector<data::Scene> eval;  // labeled target scenes, evaluation only
};

/// Source pool, target pool and held-out evaluation scenes for a run; scene
/// seeds derive from config.seed.
Benchmark make_benchmark(const RunConfig& config);

/// Forward without gradients, argmax of the final segmentation head.
LabelMap predict(const model::Model& model, const Tensor& image);
metrics::Metrics evaluate(const model::Model& model, std::span<const data::Scene> scenes);

void write_eval_header(std::ostream& os, std::size_t num_classes);
void write_eval_row(std::ostream& os, std::size_t step, const metrics::Metrics& m);

struct TrainResult {
  std::vector<losses::LossReport> reports;
  metrics::Metrics final_metrics;
  std::filesystem::path final_checkpoint;
};

/// Runs `config.steps` steps, writing into config.out_dir:
///   config.json      fully resolved configuration
///   metrics.log      one loss line per step
///   eval.csv         step,iou_0..iou_{C-1},miou every eval_every steps and at the end
///   checkpoint_<step>.ckpt when checkpoint_every > 0
///   final.ckpt
TrainResult run_training(const RunConfig& config, std::ostream* progress = nullptr);

}  // namespace elda::train
