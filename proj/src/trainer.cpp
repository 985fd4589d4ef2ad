#include "elda/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "elda/checkpoint.hpp"
#include "elda/kernels.hpp"
#include "elda/uda.hpp"

namespace elda::train {

namespace {

// Independent seed streams per purpose.
constexpr std::uint64_t kSourceStream = 0x5005;
constexpr std::uint64_t kTargetStream = 0x7a47;
constexpr std::uint64_t kEvalStream = 0xe7a1;
constexpr std::uint64_t kInitStream = 0x1417;
constexpr std::uint64_t kLoopStream = 0x100b;

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return data::mix64(data::mix64(seed ^ (stream << 40)) + index);
}

}  // namespace

Benchmark make_benchmark(const RunConfig& config) {
  Benchmark b;
  const auto source_spec = config.scene_spec(data::Domain::Source);
  const auto target_spec = config.scene_spec(data::Domain::Target);
  for (std::size_t i = 0; i < config.source_pool; ++i) {
    b.source.scenes.push_back(data::generate_scene(source_spec, stream_seed(config.seed, kSourceStream, i)));
  }
  std::vector<Tensor> target;
  for (std::size_t i = 0; i < config.target_pool; ++i) {
    target.push_back(data::generate_scene(target_spec, stream_seed(config.seed, kTargetStream, i)).image);
  }
  b.target = TargetDomain(std::move(target));
  for (std::size_t i = 0; i < config.eval_images; ++i) {
    b.eval.push_back(data::generate_scene(target_spec, stream_seed(config.seed, kEvalStream, i)));
  }
  return b;
}

LabelMap predict(const model::Model& model, const Tensor& image) {
  NoGradGuard no_grad;
  const auto out = model.forward(image);
  LabelMap pred(out.y_final.dim(2), out.y_final.dim(3));
  pred.labels = model::argmax_classes(out.y_final);
  return pred;
}

metrics::Metrics evaluate(const model::Model& model, std::span<const data::Scene> scenes) {
  metrics::ConfusionMatrix cm(model.config().num_classes);
  for (const auto& s : scenes) cm.add(predict(model, s.image), s.label);
  return cm.metrics();
}

void write_eval_header(std::ostream& os, std::size_t num_classes) {
  os << "step";
  for (std::size_t c = 0; c < num_classes; ++c) os << ",iou_" << c;
  os << ",miou\n";
}

void write_eval_row(std::ostream& os, std::size_t step, const metrics::Metrics& m) {
  auto put = [&](double v) {
    if (std::isnan(v)) {
      os << "nan";
    } else {
      os << std::setprecision(17) << v;
    }
  };
  os << step;
  for (double iou : m.per_class_iou) {
    os << ',';
    put(iou);
  }
  os << ',';
  put(m.miou);
  os << '\n';
}

TrainResult run_training(const RunConfig& config, std::ostream* progress) {
  namespace fs = std::filesystem;
  config.validate();
  kernels::set_num_threads(static_cast<int>(config.threads));
  const fs::path out_dir = config.out_dir;
  fs::create_directories(out_dir);
  {
    std::ofstream echo(out_dir / "config.json");
    echo << to_json(config).dump(2) << '\n';
  }

  const auto bench = make_benchmark(config);
  model::Model model(config.model_config(), stream_seed(config.seed, kInitStream, 0));
  uda::Sgd optimizer(config.sgd_config());
  uda::Rng rng(stream_seed(config.seed, kLoopStream, 0));
  edge::EdgeCache cache;

  std::ofstream metrics_log(out_dir / "metrics.log", std::ios::trunc);
  std::ofstream eval_csv(out_dir / "eval.csv", std::ios::trunc);
  write_eval_header(eval_csv, config.num_classes);

  // Pseudo-label refresh hook: cached per target image for pseudo_refresh_interval steps.
  std::map<std::size_t, std::pair<std::size_t, uda::PseudoLabelBatch>> pseudo_cache;

  TrainResult result;
  for (std::size_t step = 1; step <= config.steps; ++step) {
    const auto& src = bench.source.scenes[uda::uniform_index(rng, bench.source.scenes.size())];
    const std::size_t ti = uda::uniform_index(rng, bench.target.size());
    uda::StepInputs inputs{src.image, src.label, bench.target.image(ti), std::nullopt};
    if (config.pseudo_refresh_interval > 1) {
      auto it = pseudo_cache.find(ti);
      if (it != pseudo_cache.end() && step - it->second.first < config.pseudo_refresh_interval) {
        inputs.pseudo = it->second.second;
      }
    }
    auto loss = uda::compute_step_loss(model, inputs, config.step_config(), rng, cache);
    if (config.pseudo_refresh_interval > 1 && !inputs.pseudo) pseudo_cache[ti] = {step, loss.pseudo};
    model.zero_grads();
    loss.total.backward();
    optimizer.step(model.params());

    result.reports.push_back(loss.report);
    losses::write_metrics_line(metrics_log, step, loss.report);

    const bool eval_now = (config.eval_every > 0 && step % config.eval_every == 0) || step == config.steps;
    if (eval_now && !bench.eval.empty()) {
      result.final_metrics = evaluate(model, bench.eval);
      write_eval_row(eval_csv, step, result.final_metrics);
      eval_csv.flush();
      if (progress) {
        *progress << "step " << step << " loss " << loss.report.l_total << " target mIoU " << result.final_metrics.miou
                  << '\n';
      }
    }
    if (config.checkpoint_every > 0 && step % config.checkpoint_every == 0) {
      model::save_checkpoint(out_dir / ("checkpoint_" + std::to_string(step) + ".ckpt"), model);
    }
  }
  if (config.steps == 0 && !bench.eval.empty()) result.final_metrics = evaluate(model, bench.eval);
  result.final_checkpoint = out_dir / "final.ckpt";
  model::save_checkpoint(result.final_checkpoint, model);
  return result;
}

}  // namespace elda::train
