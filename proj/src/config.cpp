#include "elda/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace elda {

using model::ConfigError;
using nlohmann::json;

namespace {

json parse_scalar_like(const std::string& field, const json& prototype, const std::string& text) {
  try {
    if (prototype.is_boolean()) {
      if (text == "true" || text == "1") return true;
      if (text == "false" || text == "0") return false;
      throw ConfigError(field, "expected true or false, got '" + text + "'");
    }
    if (prototype.is_number_unsigned() || prototype.is_number_integer()) {
      std::size_t pos = 0;
      if (!text.empty() && text[0] == '-') throw ConfigError(field, "must be non-negative");
      const auto v = std::stoull(text, &pos);
      if (pos != text.size()) throw ConfigError(field, "expected an integer, got '" + text + "'");
      return v;
    }
    if (prototype.is_number_float()) {
      std::size_t pos = 0;
      const double v = std::stod(text, &pos);
      if (pos != text.size()) throw ConfigError(field, "expected a number, got '" + text + "'");
      return v;
    }
    if (prototype.is_string()) return text;
    if (prototype.is_array()) {
      json arr = json::array();
      std::stringstream ss(text);
      std::string part;
      while (std::getline(ss, part, ',')) arr.push_back(parse_scalar_like(field, prototype.at(0), part));
      if (arr.size() != prototype.size()) {
        throw ConfigError(field, "expected " + std::to_string(prototype.size()) + " comma-separated values");
      }
      return arr;
    }
  } catch (const std::logic_error& e) {
    if (dynamic_cast<const ConfigError*>(&e)) throw;
    throw ConfigError(field, "cannot parse '" + text + "'");
  }
  throw ConfigError(field, "unsupported field type");
}

template <typename T>
void read_field(const json& j, const char* name, T& out) {
  auto it = j.find(name);
  if (it == j.end()) return;
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw ConfigError(name, "expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_unsigned() && !(it->is_number_integer() && it->template get<long long>() >= 0)) {
        throw ConfigError(name, "expected a non-negative integer");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) throw ConfigError(name, "expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!it->is_string()) throw ConfigError(name, "expected a string");
    }
    out = it->template get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(name, e.what());
  }
}

}  // namespace

void RunConfig::validate() const {
  model_config().validate();
  const std::size_t factor = std::size_t{1} << encoder_depth;
  if (image_size == 0 || image_size % factor != 0) {
    throw ConfigError("image_size", "must be a positive multiple of 2^encoder_depth = " + std::to_string(factor));
  }
  if (image_size < 16) throw ConfigError("image_size", "must be at least 16");
  if (num_classes > 5) throw ConfigError("num_classes", "the scene generator provides at most 5 classes");
  if (in_channels != 3) throw ConfigError("in_channels", "images are RGB; must be 3");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("threshold", "must lie in [0,1]");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr", "must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum", "must lie in [0,1)");
  if (!(grad_clip >= 0.0) || !std::isfinite(grad_clip)) throw ConfigError("grad_clip", "must be non-negative");
  if (threads < 1) throw ConfigError("threads", "must be at least 1");
  if (pseudo_refresh_interval < 1) throw ConfigError("pseudo_refresh_interval", "must be at least 1");
  if (!(gap_noise >= 0.0)) throw ConfigError("gap_noise", "must be non-negative");
  if (!(gap_texture_amplitude >= 0.0)) throw ConfigError("gap_texture_amplitude", "must be non-negative");
  if (source_pool < 1) throw ConfigError("source_pool", "must be at least 1");
  if (target_pool < 1) throw ConfigError("target_pool", "must be at least 1");
  if (out_dir.empty()) throw ConfigError("out_dir", "must not be empty");
}

model::ModelConfig RunConfig::model_config() const {
  model::ModelConfig c;
  c.in_channels = in_channels;
  c.base_channels = base_channels;
  c.num_classes = num_classes;
  c.encoder_depth = encoder_depth;
  c.canny = {sigma, low, high};
  c.lambda = lambda;
  c.enable_edge_aux = enable_edge_aux;
  c.enable_cm = enable_cm;
  return c;
}

data::SceneSpec RunConfig::scene_spec(data::Domain domain) const {
  data::SceneSpec s;
  s.size = image_size;
  s.num_classes = num_classes;
  s.domain = domain;
  s.gap = {gap_color_shift, gap_noise, gap_texture_frequency, gap_texture_amplitude};
  return s;
}

json to_json(const RunConfig& c) {
  return json{{"seed", c.seed},
              {"steps", c.steps},
              {"threads", c.threads},
              {"image_size", c.image_size},
              {"num_classes", c.num_classes},
              {"in_channels", c.in_channels},
              {"base_channels", c.base_channels},
              {"encoder_depth", c.encoder_depth},
              {"sigma", c.sigma},
              {"low", c.low},
              {"high", c.high},
              {"lambda", c.lambda},
              {"threshold", c.threshold},
              {"lr", c.lr},
              {"momentum", c.momentum},
              {"grad_clip", c.grad_clip},
              {"enable_edge_aux", c.enable_edge_aux},
              {"enable_cm", c.enable_cm},
              {"pseudo_refresh_interval", c.pseudo_refresh_interval},
              {"gap_color_shift", c.gap_color_shift},
              {"gap_noise", c.gap_noise},
              {"gap_texture_frequency", c.gap_texture_frequency},
              {"gap_texture_amplitude", c.gap_texture_amplitude},
              {"source_pool", c.source_pool},
              {"target_pool", c.target_pool},
              {"eval_images", c.eval_images},
              {"eval_every", c.eval_every},
              {"checkpoint_every", c.checkpoint_every},
              {"out_dir", c.out_dir}};
}

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("<root>", "configuration must be a JSON object");
  RunConfig c;
  const json known = to_json(c);
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ConfigError(key, "unknown configuration field");
  }
  read_field(j, "seed", c.seed);
  read_field(j, "steps", c.steps);
  read_field(j, "threads", c.threads);
  read_field(j, "image_size", c.image_size);
  read_field(j, "num_classes", c.num_classes);
  read_field(j, "in_channels", c.in_channels);
  read_field(j, "base_channels", c.base_channels);
  read_field(j, "encoder_depth", c.encoder_depth);
  read_field(j, "sigma", c.sigma);
  read_field(j, "low", c.low);
  read_field(j, "high", c.high);
  read_field(j, "lambda", c.lambda);
  read_field(j, "threshold", c.threshold);
  read_field(j, "lr", c.lr);
  read_field(j, "momentum", c.momentum);
  read_field(j, "grad_clip", c.grad_clip);
  read_field(j, "enable_edge_aux", c.enable_edge_aux);
  read_field(j, "enable_cm", c.enable_cm);
  read_field(j, "pseudo_refresh_interval", c.pseudo_refresh_interval);
  if (j.contains("gap_color_shift")) {
    const auto& a = j.at("gap_color_shift");
    if (!a.is_array() || a.size() != 3) throw ConfigError("gap_color_shift", "expected an array of 3 numbers");
    for (std::size_t i = 0; i < 3; ++i) {
      if (!a[i].is_number()) throw ConfigError("gap_color_shift", "expected an array of 3 numbers");
      c.gap_color_shift[i] = a[i].get<double>();
    }
  }
  read_field(j, "gap_noise", c.gap_noise);
  read_field(j, "gap_texture_frequency", c.gap_texture_frequency);
  read_field(j, "gap_texture_amplitude", c.gap_texture_amplitude);
  read_field(j, "source_pool", c.source_pool);
  read_field(j, "target_pool", c.target_pool);
  read_field(j, "eval_images", c.eval_images);
  read_field(j, "eval_every", c.eval_every);
  read_field(j, "checkpoint_every", c.checkpoint_every);
  read_field(j, "out_dir", c.out_dir);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config", "cannot open '" + path.string() + "'");
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
  return run_config_from_json(j);
}

RunConfig apply_overrides(const RunConfig& base, const std::map<std::string, std::string>& overrides) {
  json j = to_json(base);
  for (const auto& [field, text] : overrides) {
    if (!j.contains(field)) throw ConfigError(field, "unknown configuration field");
    j[field] = parse_scalar_like(field, j[field], text);
  }
  return run_config_from_json(j);
}

}  // namespace elda
