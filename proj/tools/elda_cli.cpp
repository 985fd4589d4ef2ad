// elda: train, evaluate and extract edge targets.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "elda/checkpoint.hpp"
#include "elda/config.hpp"
#include "elda/data.hpp"
#include "elda/edge.hpp"
#include "elda/trainer.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 2;

const char* kClassNames[] = {"background", "rectangle", "disk", "triangle", "stripe"};

std::string class_name(std::size_t c) { return c < std::size(kClassNames) ? kClassNames[c] : "class_" + std::to_string(c); }

struct TrainArgs {
  std::string config_path;
  std::map<std::string, std::string> overrides;
};

struct EvalArgs {
  std::string checkpoint;
  std::string data_dir;
  std::size_t generate = 0;
  std::uint64_t seed = 0;
  std::string domain = "target";
  std::string config_path;
  std::string dump_dir;
  std::optional<std::size_t> num_classes;
};

struct EdgesArgs {
  std::string input;
  std::string output;
  double sigma = 1.0;
  double low = 0.1;
  double high = 0.2;
};

int cmd_train(const TrainArgs& args) {
  elda::RunConfig config;
  try {
    if (!args.config_path.empty()) config = elda::load_run_config(args.config_path);
    config = elda::apply_overrides(config, args.overrides);
    config.validate();
  } catch (const elda::model::ConfigError& e) {
    std::cerr << "config error in field '" << e.field() << "': " << e.what() << '\n';
    return kExitUsage;
  }
  const auto result = elda::train::run_training(config, &std::cout);
  std::cout << "wrote " << result.final_checkpoint.string() << '\n';
  if (config.steps > 0) std::cout << "final target mIoU " << result.final_metrics.miou << '\n';
  return 0;
}

void print_table(const elda::metrics::Metrics& m) {
  std::cout << std::left << std::setw(6) << "class" << std::setw(12) << "name" << "IoU\n";
  for (std::size_t c = 0; c < m.num_classes; ++c) {
    std::cout << std::left << std::setw(6) << c << std::setw(12) << class_name(c);
    if (std::isnan(m.per_class_iou[c])) {
      std::cout << "n/a\n";
    } else {
      std::cout << std::fixed << std::setprecision(2) << 100.0 * m.per_class_iou[c] << '\n';
    }
  }
  std::cout << "mIoU " << std::fixed << std::setprecision(2) << 100.0 * m.miou << '\n';
}

int cmd_eval(const EvalArgs& args) {
  const auto model = elda::model::load_checkpoint(fs::path(args.checkpoint));
  const auto& mc = model.config();
  if (args.num_classes && *args.num_classes != mc.num_classes) {
    std::cerr << "checkpoint has " << mc.num_classes << " classes, --num_classes requested " << *args.num_classes << '\n';
    return kExitUsage;
  }

  struct Item {
    std::string stem;
    elda::Tensor image;
    std::optional<elda::LabelMap> label;
  };
  std::vector<Item> items;
  if (!args.data_dir.empty()) {
    for (auto& it : elda::data::load_paired_dataset(args.data_dir)) items.push_back({it.stem, it.image, it.label});
  } else {
    elda::RunConfig rc;
    if (!args.config_path.empty()) rc = elda::load_run_config(args.config_path);
    rc.num_classes = mc.num_classes;
    const auto spec = rc.scene_spec(args.domain == "source" ? elda::data::Domain::Source : elda::data::Domain::Target);
    for (std::size_t i = 0; i < args.generate; ++i) {
      auto scene = elda::data::generate_scene(spec, args.seed + i);
      std::ostringstream stem;
      stem << "scene_" << std::setw(4) << std::setfill('0') << i;
      items.push_back({stem.str(), scene.image, scene.label});
    }
  }

  const std::size_t factor = std::size_t{1} << mc.encoder_depth;
  elda::metrics::ConfusionMatrix cm(mc.num_classes);
  bool any_label = false;
  if (!args.dump_dir.empty()) fs::create_directories(args.dump_dir);
  for (const auto& item : items) {
    if (item.image.dim(1) % factor != 0 || item.image.dim(2) % factor != 0) {
      std::cerr << "image '" << item.stem << "' size is incompatible with the checkpoint encoder depth\n";
      return kExitUsage;
    }
    const auto pred = elda::train::predict(model, item.image);
    if (item.label) {
      for (auto v : item.label->labels) {
        if (v != elda::kIgnoreIndex && (v < 0 || static_cast<std::size_t>(v) >= mc.num_classes)) {
          std::cerr << "label '" << item.stem << "' contains class " << v << " unknown to the checkpoint\n";
          return kExitUsage;
        }
      }
      cm.add(pred, *item.label);
      any_label = true;
    }
    if (!args.dump_dir.empty()) {
      elda::data::write_pnm(fs::path(args.dump_dir) / (item.stem + ".pgm"), elda::data::labels_to_pgm(pred));
    }
  }
  std::cout << "evaluated " << items.size() << " images\n";
  if (any_label) print_table(cm.metrics());
  return 0;
}

int cmd_edges(const EdgesArgs& args) {
  elda::edge::CannyParams params{args.sigma, args.low, args.high};
  try {
    params.validate();
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << '\n';
    return kExitUsage;
  }
  const auto pnm = elda::data::read_pnm(args.input);
  elda::edge::GrayImage gray;
  if (pnm.channels == 1) {
    gray = {pnm.height, pnm.width, std::vector<double>(pnm.data.size())};
    for (std::size_t i = 0; i < pnm.data.size(); ++i) gray.pixels[i] = static_cast<double>(pnm.data[i]) / pnm.maxval;
  } else {
    gray = elda::edge::to_gray(elda::data::pnm_to_tensor(pnm));
  }
  const auto edges = elda::edge::canny(gray, params);
  elda::data::PnmImage out{edges.width, edges.height, 1, 255, std::vector<std::uint8_t>(edges.values.size())};
  for (std::size_t i = 0; i < edges.values.size(); ++i) out.data[i] = edges.values[i] > 0.5 ? 255 : 0;
  elda::data::write_pnm(args.output, out);
  std::cout << "edge pixels: " << edges.count() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Edge-guided domain adaptation for semantic segmentation"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Run the self-training loop; writes metrics.log, eval.csv, checkpoints");
  train->add_option("--config", train_args.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  // One flag per configuration field; values are parsed against the field type.
  std::map<std::string, std::string> flag_values;
  const auto defaults = elda::to_json(elda::RunConfig{});
  for (const auto& [key, value] : defaults.items()) {
    train->add_option("--" + key, flag_values[key], "override '" + key + "' (default " + value.dump() + ")");
  }

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint; prints per-class IoU and mIoU");
  eval->add_option("--checkpoint", eval_args.checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  auto* data_opt = eval->add_option("--data", eval_args.data_dir, "dataset dir with images/*.ppm and labels/*.pgm");
  auto* gen_opt = eval->add_option("--generate", eval_args.generate, "evaluate on N generated scenes instead");
  data_opt->excludes(gen_opt);
  eval->add_option("--seed", eval_args.seed, "first scene seed for --generate");
  eval->add_option("--domain", eval_args.domain, "scene domain for --generate")->check(CLI::IsMember({"source", "target"}));
  eval->add_option("--config", eval_args.config_path, "run configuration providing scene/gap settings")
      ->check(CLI::ExistingFile);
  eval->add_option("--dump", eval_args.dump_dir, "write predicted label maps as <stem>.pgm into this directory");
  eval->add_option("--num_classes", eval_args.num_classes, "expected class count; must match the checkpoint");

  EdgesArgs edges_args;
  auto* edges = app.add_subcommand("edges", "Canny edge map of an image as a binary PGM");
  edges->add_option("--input", edges_args.input, "PPM or PGM image")->required()->check(CLI::ExistingFile);
  edges->add_option("--output", edges_args.output, "output PGM (edge = 255)")->required();
  edges->add_option("--sigma", edges_args.sigma, "Gaussian smoothing sigma")->capture_default_str();
  edges->add_option("--low", edges_args.low, "low hysteresis threshold (normalized magnitude)")->capture_default_str();
  edges->add_option("--high", edges_args.high, "high hysteresis threshold (normalized magnitude)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*train) {
      for (const auto& [key, value] : flag_values) {
        if (train->count("--" + key) > 0) train_args.overrides[key] = value;
      }
      return cmd_train(train_args);
    }
    if (*eval) {
      if (data_opt->count() == 0 && gen_opt->count() == 0) {
        std::cerr << "eval: one of --data or --generate is required\n";
        return kExitUsage;
      }
      return cmd_eval(eval_args);
    }
    return cmd_edges(edges_args);
  } catch (const elda::model::CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const elda::model::ConfigError& e) {
    std::cerr << "config error in field '" << e.field() << "': " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
