#include "elda/model.hpp"

#include <cmath>
#include <random>

#include "elda/labels.hpp"
#include "elda/ops.hpp"

namespace elda::model {

namespace {

constexpr std::size_t kConvSize = 3;

const char* branch_name(Branch b) { return b == Branch::Edge ? "edge" : "seg"; }

const Tensor& param(const ModelParams& params, const std::string& name) {
  auto it = params.find(name);
  if (it == params.end()) throw std::out_of_range("missing model parameter '" + name + "'");
  return it->second;
}

Tensor conv(const ModelParams& params, const std::string& layer, const Tensor& x, std::size_t stride = 1) {
  return bias_add(conv2d(x, param(params, layer + ".kernel"), stride, kConvSize / 2), param(params, layer + ".bias"));
}

void add_conv(std::map<std::string, Shape>& layout, const std::string& layer, std::size_t in, std::size_t out) {
  layout[layer + ".kernel"] = {out, in, kConvSize, kConvSize};
  layout[layer + ".bias"] = {out};
}

// Halving per stage, but never narrower than the first encoder stage.
std::vector<std::size_t> decoder_channels(const ModelConfig& c) {
  std::vector<std::size_t> ch;
  for (std::size_t i = 0; i < c.encoder_depth; ++i)
    ch.push_back(std::max<std::size_t>(c.base_channels, c.feature_channels() >> (i + 1)));
  return ch;
}

void add_decoder(std::map<std::string, Shape>& layout, const ModelConfig& c, const std::string& prefix,
                 std::size_t out_channels) {
  std::size_t in = c.feature_channels();
  const auto ch = decoder_channels(c);
  for (std::size_t i = 0; i < ch.size(); ++i) {
    add_conv(layout, prefix + ".dec" + std::to_string(i), in, ch[i]);
    in = ch[i];
  }
  add_conv(layout, prefix + ".head", in, out_channels);
}

// Upsample-conv-relu stages back to input resolution, then the head conv.
Tensor decode(const ModelConfig& c, const ModelParams& params, const std::string& prefix, const Tensor& features) {
  Tensor x = features;
  for (std::size_t i = 0; i < c.encoder_depth; ++i) x = relu(conv(params, prefix + ".dec" + std::to_string(i), upsample2x(x)));
  return conv(params, prefix + ".head", x);
}

Tensor edge_head(const Tensor& logits) { return sigmoid(logits); }
Tensor seg_head(const Tensor& logits) { return softmax_channels(logits); }

}  // namespace

void ModelConfig::validate() const {
  if (in_channels < 1) throw ConfigError("in_channels", "must be at least 1");
  if (base_channels < 4) throw ConfigError("base_channels", "must be at least 4");
  if (num_classes < 2 || num_classes >= static_cast<std::size_t>(kIgnoreIndex)) {
    throw ConfigError("num_classes", "must be in [2, " + std::to_string(kIgnoreIndex - 1) + "]");
  }
  if (encoder_depth < 1 || encoder_depth > 6) throw ConfigError("encoder_depth", "must be in [1, 6]");
  if (!(canny.sigma > 0.0)) throw ConfigError("sigma", "must be positive");
  if (!(canny.low > 0.0)) throw ConfigError("low", "must be positive");
  if (!(canny.high > canny.low)) throw ConfigError("high", "must exceed low");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda", "must be finite and non-negative");
  if (enable_cm && !enable_edge_aux) throw ConfigError("enable_cm", "the correlation module requires enable_edge_aux");
}

std::map<std::string, Shape> parameter_layout(const ModelConfig& c) {
  c.validate();
  std::map<std::string, Shape> layout;
  std::size_t in = c.in_channels;
  for (std::size_t i = 0; i < c.encoder_depth; ++i) {
    const std::size_t out = c.base_channels << i;
    add_conv(layout, "sdi.enc" + std::to_string(i), in, out);
    in = out;
  }
  const std::size_t F = c.feature_channels();
  for (Branch b : {Branch::Edge, Branch::Seg}) {
    if (b == Branch::Edge && !c.enable_edge_aux) continue;
    const std::string prefix = std::string("tsb.") + branch_name(b);
    add_conv(layout, prefix + ".enc0", F, F);
    add_conv(layout, prefix + ".enc1", F, F);
    add_decoder(layout, c, prefix, b == Branch::Edge ? 1 : c.num_classes);
    add_decoder(layout, c, std::string("final.") + branch_name(b), b == Branch::Edge ? 1 : c.num_classes);
  }
  if (c.enable_cm) {
    for (const char* name : {"cm.seg_mid", "cm.edge_mid", "cm.seg_gate", "cm.edge_gate"}) add_conv(layout, name, F, F);
  }
  return layout;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ModelParams params;
  for (const auto& [name, shape] : parameter_layout(config)) {
    auto t = Tensor::zeros(shape, true);
    const bool is_kernel = name.ends_with(".kernel");
    if (is_kernel && !name.starts_with("cm.")) {
      const double fan_in = static_cast<double>(shape[1] * shape[2] * shape[3]);
      std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
      for (auto& v : t.mutable_values()) v = dist(rng);
    }
    params.emplace(name, std::move(t));
  }
  return params;
}

Tensor sdi_encode(const ModelConfig& c, const ModelParams& params, const Tensor& image) {
  Tensor x = image;
  if (x.rank() == 3) x = reshape(x, {1, x.dim(0), x.dim(1), x.dim(2)});
  if (x.rank() != 4 || x.dim(0) != 1 || x.dim(1) != c.in_channels) {
    throw ShapeError("sdi_encode: expected [" + std::to_string(c.in_channels) + ",H,W] image, got " +
                     to_string(image.shape()));
  }
  const std::size_t factor = std::size_t{1} << c.encoder_depth;
  if (x.dim(2) % factor != 0 || x.dim(3) % factor != 0 || x.dim(2) == 0 || x.dim(3) == 0) {
    throw ShapeError("sdi_encode: spatial size " + std::to_string(x.dim(2)) + "x" + std::to_string(x.dim(3)) +
                     " is not divisible by " + std::to_string(factor));
  }
  for (std::size_t i = 0; i < c.encoder_depth; ++i) x = relu(conv(params, "sdi.enc" + std::to_string(i), x, 2));
  return x;
}

BranchOutput tsb_forward(const ModelConfig& c, const ModelParams& params, const Tensor& f_shared, Branch branch) {
  const std::string prefix = std::string("tsb.") + branch_name(branch);
  Tensor f = relu(conv(params, prefix + ".enc0", f_shared));
  f = relu(conv(params, prefix + ".enc1", f));
  Tensor logits = decode(c, params, prefix, f);
  return {f, branch == Branch::Edge ? edge_head(logits) : seg_head(logits)};
}

CorrelationOutput correlation(const ModelParams& params, const Tensor& f_edge, const Tensor& f_seg) {
  if (f_edge.shape() != f_seg.shape()) {
    throw ShapeError("correlation: f_edge " + to_string(f_edge.shape()) + " vs f_seg " + to_string(f_seg.shape()));
  }
  const Tensor seg_mid = conv(params, "cm.seg_mid", f_seg);
  const Tensor edge_mid = conv(params, "cm.edge_mid", f_edge);
  CorrelationOutput out;
  out.seg_cm = add(f_seg, mul(edge_mid, sigmoid(conv(params, "cm.edge_gate", f_edge))));
  out.edge_cm = add(f_edge, mul(seg_mid, sigmoid(conv(params, "cm.seg_gate", f_seg))));
  return out;
}

FinalOutput decode_final(const ModelConfig& c, const ModelParams& params, const Tensor& f_edge, const Tensor& f_seg) {
  FinalOutput out;
  if (f_edge.defined()) out.edge = edge_head(decode(c, params, "final.edge", f_edge));
  out.seg = seg_head(decode(c, params, "final.seg", f_seg));
  return out;
}

ForwardOutputs forward(const ModelConfig& c, const ModelParams& params, const Tensor& image) {
  ForwardOutputs out;
  out.f_shared = sdi_encode(c, params, image);
  auto seg = tsb_forward(c, params, out.f_shared, Branch::Seg);
  out.f_seg = seg.features;
  out.y_init = seg.prediction;
  if (c.enable_edge_aux) {
    auto edge = tsb_forward(c, params, out.f_shared, Branch::Edge);
    out.f_edge = edge.features;
    out.e_init = edge.prediction;
  }
  if (c.enable_cm) {
    auto cm = correlation(params, out.f_edge, out.f_seg);
    out.f_edge_cm = cm.edge_cm;
    out.f_seg_cm = cm.seg_cm;
  } else {
    out.f_edge_cm = out.f_edge;
    out.f_seg_cm = out.f_seg;
  }
  auto fin = decode_final(c, params, out.f_edge_cm, out.f_seg_cm);
  out.e_final = fin.edge;
  out.y_final = fin.seg;
  return out;
}

Model::Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)), params_(init_params(config_, seed)) {}

Model::Model(ModelConfig config, ModelParams params) : config_(std::move(config)), params_(std::move(params)) {
  const auto layout = parameter_layout(config_);
  if (layout.size() != params_.size()) {
    throw std::invalid_argument("model has " + std::to_string(params_.size()) + " parameters, configuration expects " +
                                std::to_string(layout.size()));
  }
  for (const auto& [name, shape] : layout) {
    const auto& t = param(params_, name);
    if (t.shape() != shape) {
      throw ShapeError("parameter '" + name + "' has shape " + to_string(t.shape()) + ", expected " + to_string(shape));
    }
    if (!t.requires_grad()) throw std::invalid_argument("parameter '" + name + "' is not trainable");
  }
}

void Model::zero_grads() {
  for (auto& [_, t] : params_) t.zero_grad();
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : params_) n += t.size();
  return n;
}

std::vector<std::int32_t> argmax_classes(const Tensor& distribution) {
  const auto& s = distribution.shape();
  if (s.size() != 4 || s[0] != 1) throw ShapeError("argmax_classes: expected [1,C,H,W], got " + to_string(s));
  const std::size_t C = s[1], plane = s[2] * s[3];
  const auto v = distribution.values();
  std::vector<std::int32_t> out(plane, 0);
  for (std::size_t i = 0; i < plane; ++i) {
    double best = v[i];
    for (std::size_t c = 1; c < C; ++c) {
      if (v[c * plane + i] > best) {
        best = v[c * plane + i];
        out[i] = static_cast<std::int32_t>(c);
      }
    }
  }
  return out;
}

}  // namespace elda::model
