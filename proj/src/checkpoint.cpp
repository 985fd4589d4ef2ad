#include "elda/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace elda::model {

namespace {

constexpr std::array<char, 5> kMagic{'E', 'L', 'D', 'A', '1'};
constexpr std::uint64_t kMaxLength = std::uint64_t{1} << 32;

void put_u64(std::ostream& os, std::uint64_t v) {
  std::array<char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffU);
  os.write(b.data(), b.size());
}

void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

void read_exact(std::istream& is, char* dst, std::size_t n, const char* what) {
  is.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n) throw CheckpointError(std::string("truncated checkpoint while reading ") + what);
}

std::uint64_t get_u64(std::istream& is, const char* what) {
  std::array<unsigned char, 8> b{};
  read_exact(is, reinterpret_cast<char*>(b.data()), b.size(), what);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_length(std::istream& is, const char* what) {
  const auto n = get_u64(is, what);
  if (n > kMaxLength) throw CheckpointError(std::string("implausible length for ") + what);
  return n;
}

}  // namespace

nlohmann::json config_to_json(const ModelConfig& c) {
  return nlohmann::json{{"in_channels", c.in_channels},
                        {"base_channels", c.base_channels},
                        {"num_classes", c.num_classes},
                        {"encoder_depth", c.encoder_depth},
                        {"sigma", c.canny.sigma},
                        {"low", c.canny.low},
                        {"high", c.canny.high},
                        {"lambda", c.lambda},
                        {"enable_edge_aux", c.enable_edge_aux},
                        {"enable_cm", c.enable_cm}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.in_channels = j.at("in_channels").get<std::size_t>();
  c.base_channels = j.at("base_channels").get<std::size_t>();
  c.num_classes = j.at("num_classes").get<std::size_t>();
  c.encoder_depth = j.at("encoder_depth").get<std::size_t>();
  c.canny.sigma = j.at("sigma").get<double>();
  c.canny.low = j.at("low").get<double>();
  c.canny.high = j.at("high").get<double>();
  c.lambda = j.at("lambda").get<double>();
  c.enable_edge_aux = j.at("enable_edge_aux").get<bool>();
  c.enable_cm = j.at("enable_cm").get<bool>();
  c.validate();
  return c;
}

void save_checkpoint(std::ostream& os, const Model& model) {
  os.write(kMagic.data(), kMagic.size());
  const std::string json = config_to_json(model.config()).dump();
  put_u64(os, json.size());
  os.write(json.data(), static_cast<std::streamsize>(json.size()));
  put_u64(os, model.params().size());
  for (const auto& [name, t] : model.params()) {
    put_u64(os, name.size());
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u64(os, t.rank());
    for (auto d : t.shape()) put_u64(os, d);
    for (double v : t.values()) put_f64(os, v);
  }
  if (!os) throw CheckpointError("failed to write checkpoint");
}

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CheckpointError("cannot open '" + path.string() + "' for writing");
  save_checkpoint(os, model);
}

Model load_checkpoint(std::istream& is) {
  std::array<char, 5> magic{};
  read_exact(is, magic.data(), magic.size(), "magic");
  if (magic != kMagic) throw CheckpointError("not an ELDA1 checkpoint (bad magic)");

  const auto json_len = get_length(is, "config length");
  std::string json(json_len, '\0');
  read_exact(is, json.data(), json.size(), "config");
  ModelConfig config;
  try {
    config = config_from_json(nlohmann::json::parse(json));
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("invalid checkpoint config: ") + e.what());
  }
  const auto layout = parameter_layout(config);

  const auto count = get_length(is, "parameter count");
  if (count != layout.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(count) + " parameters, config expects " +
                          std::to_string(layout.size()));
  }
  ModelParams params;
  auto expected = layout.begin();
  for (std::uint64_t p = 0; p < count; ++p, ++expected) {
    std::string name(get_length(is, "name length"), '\0');
    read_exact(is, name.data(), name.size(), "parameter name");
    if (name != expected->first) {
      throw CheckpointError("unexpected parameter '" + name + "' (expected '" + expected->first + "')");
    }
    const auto rank = get_length(is, "rank");
    Shape shape(rank);
    for (auto& d : shape) d = get_length(is, "dimension");
    if (shape != expected->second) {
      throw CheckpointError("parameter '" + name + "' has shape " + to_string(shape) + ", expected " +
                            to_string(expected->second));
    }
    std::vector<double> values(numel(shape));
    for (auto& v : values) v = std::bit_cast<double>(get_u64(is, "parameter values"));
    params.emplace(std::move(name), Tensor::from(std::move(shape), std::move(values), true));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw CheckpointError("trailing bytes after checkpoint payload");
  return Model(config, std::move(params));
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  return load_checkpoint(is);
}

}  // namespace elda::model
