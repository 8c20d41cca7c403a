#include "esvit/model.hpp"

#include <cmath>
#include <functional>

#include "esvit/error.hpp"
#include "esvit/json_util.hpp"
#include "esvit/random.hpp"

namespace esvit {

using autograd::Shape;
using nlohmann::json;
namespace ag = autograd;

namespace {

constexpr std::size_t kImageChannels = 3;
constexpr std::size_t kConvKernel = 3;
constexpr std::size_t kConvStride = 2;
constexpr std::size_t kConvPadding = 1;
constexpr double kInitStd = 0.02;

const char* to_string(FusionMode m) { return m == FusionMode::kTokenAppend ? "token_append" : "channel_concat"; }
const char* to_string(ResidualMode m) { return m == ResidualMode::kAdditive ? "additive" : "strict"; }

bool fused(const ModelConfig& cfg, const Tensor& e_prime) { return cfg.fusion_enabled && e_prime.defined(); }

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::vector<std::size_t> conv_widths(const ModelConfig& cfg) {
  std::vector<std::size_t> widths{kImageChannels};
  widths.insert(widths.end(), cfg.conv_channels.begin(), cfg.conv_channels.end());
  widths.push_back(cfg.hidden_size);
  return widths;
}

// Visits every parameter slot of `m` in registration order.
void visit(EsVitModel& m, const std::function<void(const std::string&, Tensor&)>& f) {
  const ModelConfig& cfg = m.config;
  auto linear_slots = [&](const std::string& p, Linear& l) {
    f(p + ".weight", l.weight);
    f(p + ".bias", l.bias);
  };
  auto norm_slots = [&](const std::string& p, Norm& n) {
    f(p + ".gain", n.gain);
    f(p + ".bias", n.bias);
  };
  linear_slots("patch_embed", m.patch_proj);
  f("class_token", m.class_token);
  f("pos_embed", m.pos_embed);
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const std::string p = "layers." + std::to_string(i);
    EncoderWeights& w = m.layers[i];
    norm_slots(p + ".norm1", w.norm1);
    linear_slots(p + ".query", w.query);
    linear_slots(p + ".key", w.key);
    linear_slots(p + ".value", w.value);
    linear_slots(p + ".proj", w.proj);
    norm_slots(p + ".norm2", w.norm2);
    linear_slots(p + ".mlp_in", w.mlp_in);
    linear_slots(p + ".mlp_out", w.mlp_out);
    if (cfg.fusion_enabled && cfg.fusion_mode == FusionMode::kChannelConcat) linear_slots(p + ".fusion", w.fusion);
  }
  norm_slots("final_norm", m.final_norm);
  linear_slots("head", m.head);
  if (cfg.fusion_enabled) {
    for (std::size_t i = 0; i < m.conv.size(); ++i) {
      const std::string p = "conv." + std::to_string(i);
      f(p + ".kernels", m.conv[i].kernels);
      if (cfg.conv_bias) f(p + ".bias", m.conv[i].bias);
    }
    linear_slots("se.squeeze", m.se.squeeze);
    linear_slots("se.excite", m.se.excite);
  }
}

EsVitModel skeleton(const ModelConfig& cfg) {
  cfg.validate();
  EsVitModel m;
  m.config = cfg;
  m.layers.resize(cfg.num_layers);
  if (cfg.fusion_enabled) m.conv.resize(conv_widths(cfg).size() - 1);
  return m;
}

Tensor mlp_block(const Tensor& x, const EncoderWeights& w, const ModelConfig& cfg) {
  const Tensor h = ag::layer_norm(x, w.norm2.gain, w.norm2.bias, cfg.norm_eps);
  return linear(ag::gelu(linear(h, w.mlp_in)), w.mlp_out);
}

Tensor attention_block(const Tensor& x, const EncoderWeights& w, const ModelConfig& cfg,
                       std::vector<Tensor>* attention) {
  const Tensor h = ag::layer_norm(x, w.norm1.gain, w.norm1.bias, cfg.norm_eps);
  return ag::add(x, linear(mhsa(h, w, cfg.num_heads, attention), w.proj));
}

Tensor head_logits(const Tensor& tokens, const EsVitModel& model) {
  const Tensor normed = ag::layer_norm(tokens, model.final_norm.gain, model.final_norm.bias, model.config.norm_eps);
  return linear(ag::slice(normed, 0, 0, 1), model.head);
}

ModelConfig base_preset(const std::string& name) {
  ModelConfig cfg;
  cfg.name = name;
  if (name == "tiny") return cfg;
  cfg.image_hw = 224;
  if (name == "B/16" || name == "B/32") {
    cfg.num_layers = 12;
    cfg.hidden_size = 768;
    cfg.mlp_size = 3072;
    cfg.num_heads = 12;
  } else if (name == "L/16" || name == "L/32") {
    cfg.num_layers = 24;
    cfg.hidden_size = 1024;
    cfg.mlp_size = 4096;
    cfg.num_heads = 16;
  } else {
    fail(ErrorKind::kInvalidConfig, "unknown model preset '" + name + "'");
  }
  cfg.patch_size = ends_with(name, "/16") ? 16 : 32;
  return cfg;
}

}  // namespace

void ModelConfig::validate() const {
  auto check = [](bool ok, const std::string& msg) {
    if (!ok) fail(ErrorKind::kInvalidConfig, "model: " + msg);
  };
  check(num_layers >= 1, "num_layers must be >= 1");
  check(hidden_size >= 1 && mlp_size >= 1, "hidden_size and mlp_size must be >= 1");
  check(num_heads >= 1 && hidden_size % num_heads == 0, "hidden_size must be divisible by num_heads");
  check(patch_size >= 1 && image_hw >= patch_size && image_hw % patch_size == 0,
        "image_hw must be divisible by patch_size");
  check(num_classes >= 2, "num_classes must be >= 2");
  check(se_reduction >= 1, "se_reduction must be >= 1");
  check(norm_eps > 0.0, "norm_eps must be positive");
  for (std::size_t c : conv_channels) check(c >= 1, "conv_channels entries must be >= 1");
}

std::size_t ModelConfig::se_hidden() const { return std::max<std::size_t>(1, hidden_size / se_reduction); }

ModelConfig ModelConfig::preset(const std::string& name, bool fusion_enabled, std::size_t num_classes) {
  ModelConfig cfg = base_preset(name);
  cfg.fusion_enabled = fusion_enabled;
  cfg.num_classes = num_classes;
  cfg.validate();
  return cfg;
}

json to_json(const ModelConfig& c) {
  return {{"name", c.name},
          {"num_layers", c.num_layers},
          {"hidden_size", c.hidden_size},
          {"mlp_size", c.mlp_size},
          {"num_heads", c.num_heads},
          {"patch_size", c.patch_size},
          {"image_hw", c.image_hw},
          {"num_classes", c.num_classes},
          {"fusion_enabled", c.fusion_enabled},
          {"se_reduction", c.se_reduction},
          {"fusion_mode", to_string(c.fusion_mode)},
          {"residual_mode", to_string(c.residual_mode)},
          {"conv_channels", c.conv_channels},
          {"conv_bias", c.conv_bias},
          {"conv_activation", c.conv_activation},
          {"norm_eps", c.norm_eps}};
}

ModelConfig model_config_from_json(const json& doc, const std::string& where) {
  using namespace jsonutil;
  reject_unknown_keys(doc,
                      {"preset", "name", "num_layers", "hidden_size", "mlp_size", "num_heads", "patch_size",
                       "image_hw", "num_classes", "fusion_enabled", "se_reduction", "fusion_mode", "residual_mode",
                       "conv_channels", "conv_bias", "conv_activation", "norm_eps"},
                      where);
  ModelConfig c;
  if (doc.contains("preset")) {
    std::string preset;
    read(doc, "preset", preset, where);
    c = base_preset(preset);
  }
  read(doc, "name", c.name, where);
  read(doc, "num_layers", c.num_layers, where);
  read(doc, "hidden_size", c.hidden_size, where);
  read(doc, "mlp_size", c.mlp_size, where);
  read(doc, "num_heads", c.num_heads, where);
  read(doc, "patch_size", c.patch_size, where);
  read(doc, "image_hw", c.image_hw, where);
  read(doc, "num_classes", c.num_classes, where);
  read(doc, "fusion_enabled", c.fusion_enabled, where);
  read(doc, "se_reduction", c.se_reduction, where);
  read(doc, "conv_channels", c.conv_channels, where);
  read(doc, "conv_bias", c.conv_bias, where);
  read(doc, "conv_activation", c.conv_activation, where);
  read(doc, "norm_eps", c.norm_eps, where);
  std::string mode = to_string(c.fusion_mode);
  read(doc, "fusion_mode", mode, where);
  if (mode == "token_append") {
    c.fusion_mode = FusionMode::kTokenAppend;
  } else if (mode == "channel_concat") {
    c.fusion_mode = FusionMode::kChannelConcat;
  } else {
    fail(ErrorKind::kInvalidConfig, where + ".fusion_mode: expected token_append or channel_concat");
  }
  mode = to_string(c.residual_mode);
  read(doc, "residual_mode", mode, where);
  if (mode == "additive") {
    c.residual_mode = ResidualMode::kAdditive;
  } else if (mode == "strict") {
    c.residual_mode = ResidualMode::kStrict;
  } else {
    fail(ErrorKind::kInvalidConfig, where + ".residual_mode: expected additive or strict");
  }
  c.validate();
  return c;
}

std::vector<ParameterShape> parameter_shapes(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.hidden_size;
  const std::size_t p = cfg.patch_size;
  std::vector<ParameterShape> shapes;
  auto add = [&](std::string path, Shape s) { shapes.push_back({std::move(path), std::move(s)}); };
  auto lin = [&](const std::string& path, std::size_t in, std::size_t out) {
    add(path + ".weight", {in, out});
    add(path + ".bias", {out});
  };
  auto norm = [&](const std::string& path) {
    add(path + ".gain", {d});
    add(path + ".bias", {d});
  };
  lin("patch_embed", p * p * kImageChannels, d);
  add("class_token", {1, d});
  add("pos_embed", {cfg.num_tokens(), d});
  for (std::size_t i = 0; i < cfg.num_layers; ++i) {
    const std::string l = "layers." + std::to_string(i);
    norm(l + ".norm1");
    lin(l + ".query", d, d);
    lin(l + ".key", d, d);
    lin(l + ".value", d, d);
    lin(l + ".proj", d, d);
    norm(l + ".norm2");
    lin(l + ".mlp_in", d, cfg.mlp_size);
    lin(l + ".mlp_out", cfg.mlp_size, d);
    if (cfg.fusion_enabled && cfg.fusion_mode == FusionMode::kChannelConcat) lin(l + ".fusion", 2 * d, d);
  }
  norm("final_norm");
  lin("head", d, cfg.num_classes);
  if (cfg.fusion_enabled) {
    const auto widths = conv_widths(cfg);
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
      const std::string c = "conv." + std::to_string(i);
      add(c + ".kernels", {widths[i + 1], widths[i], kConvKernel, kConvKernel});
      if (cfg.conv_bias) add(c + ".bias", {widths[i + 1]});
    }
    lin("se.squeeze", d, cfg.se_hidden());
    lin("se.excite", cfg.se_hidden(), d);
  }
  return shapes;
}

EsVitModel EsVitModel::initialize(const ModelConfig& cfg, std::uint64_t seed) {
  EsVitModel m = skeleton(cfg);
  const std::vector<ParameterShape> shapes = parameter_shapes(cfg);
  Rng rng(seed);
  std::size_t next = 0;
  visit(m, [&](const std::string& path, Tensor& slot) {
    if (next >= shapes.size() || shapes[next].path != path) {
      fail(ErrorKind::kInvariant, "parameter registration out of sync at '" + path + "'");
    }
    const Shape& shape = shapes[next++].shape;
    std::vector<double> values(ag::shape_numel(shape), 0.0);
    if (ends_with(path, ".gain")) {
      std::fill(values.begin(), values.end(), 1.0);
    } else if (ends_with(path, ".bias") || path == "se.excite.weight" || ends_with(path, ".fusion.weight")) {
      // zeros
    } else {
      for (double& v : values) v = rng.truncated_normal(kInitStd);
    }
    slot = Tensor::from_data(shape, std::move(values), true);
  });
  if (next != shapes.size()) fail(ErrorKind::kInvariant, "parameter registration incomplete");
  return m;
}

std::vector<NamedTensor> EsVitModel::parameters() const {
  std::vector<NamedTensor> out;
  visit(const_cast<EsVitModel&>(*this), [&](const std::string& path, Tensor& t) { out.push_back({path, t}); });
  return out;
}

Checkpoint EsVitModel::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.metadata = {{"model_config", to_json(config)}};
  ckpt.parameters = parameters();
  return ckpt;
}

EsVitModel EsVitModel::from_checkpoint(const Checkpoint& ckpt) {
  if (!ckpt.metadata.contains("model_config")) fail(ErrorKind::kParse, "checkpoint lacks model_config metadata");
  EsVitModel m = skeleton(model_config_from_json(ckpt.metadata.at("model_config"), "checkpoint.model_config"));
  std::size_t used = 0;
  visit(m, [&](const std::string& path, Tensor& slot) {
    const NamedTensor* stored = ckpt.find(path);
    if (stored == nullptr) fail(ErrorKind::kParse, "checkpoint is missing parameter '" + path + "'");
    const auto data = stored->tensor.data();
    slot = Tensor::from_data(stored->tensor.shape(), {data.begin(), data.end()}, true);
    ++used;
  });
  const auto expected = parameter_shapes(m.config);
  for (const ParameterShape& s : expected) {
    const NamedTensor* stored = ckpt.find(s.path);
    if (stored->tensor.shape() != s.shape) {
      fail(ErrorKind::kParse, "checkpoint parameter '" + s.path + "' has shape " +
                                  ag::shape_string(stored->tensor.shape()) + ", expected " + ag::shape_string(s.shape));
    }
  }
  if (used != ckpt.parameters.size()) fail(ErrorKind::kParse, "checkpoint holds parameters the model does not use");
  return m;
}

ParameterCount count_parameters(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.hidden_size;
  const std::size_t m = cfg.mlp_size;
  const std::size_t p = cfg.patch_size;
  ParameterCount pc;
  pc.breakdown["patch_embed"] = p * p * kImageChannels * d + d;
  pc.breakdown["class_token"] = d;
  pc.breakdown["pos_embed"] = cfg.num_tokens() * d;
  const std::size_t per_layer = 2 * (2 * d) + 4 * (d * d + d) + (d * m + m) + (m * d + d);
  pc.breakdown["encoder"] = cfg.num_layers * per_layer;
  pc.breakdown["final_norm"] = 2 * d;
  pc.breakdown["head"] = d * cfg.num_classes + cfg.num_classes;
  std::size_t conv = 0, se = 0, fusion = 0;
  if (cfg.fusion_enabled) {
    const auto widths = conv_widths(cfg);
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
      conv += widths[i + 1] * widths[i] * kConvKernel * kConvKernel + (cfg.conv_bias ? widths[i + 1] : 0);
    }
    const std::size_t r = cfg.se_hidden();
    se = d * r + r + r * d + d;
    if (cfg.fusion_mode == FusionMode::kChannelConcat) fusion = cfg.num_layers * (2 * d * d + d);
  }
  pc.breakdown["conv_embed"] = conv;
  pc.breakdown["se"] = se;
  pc.breakdown["fusion"] = fusion;
  for (const auto& [name, n] : pc.breakdown) pc.total += n;
  return pc;
}

json model_card(const EsVitModel& model) {
  const ParameterCount pc = count_parameters(model);
  return {{"config", to_json(model.config)},
          {"norm_placement", "pre-norm"},
          {"fusion_mode", model.config.fusion_enabled ? to_string(model.config.fusion_mode) : "disabled"},
          {"residual_mode", to_string(model.config.residual_mode)},
          {"global_embedding", "computed once per image and reused by every encoder layer"},
          {"input_channels", kChannelLayout},
          {"parameters", {{"total", pc.total}, {"breakdown", pc.breakdown}}}};
}

Tensor image_tensor(const EncodedImage& img) {
  return Tensor::from_data({img.height, img.width, EncodedImage::kChannels}, img.pixels);
}

Tensor linear(const Tensor& x, const Linear& l) { return ag::add(ag::matmul(x, l.weight), l.bias); }

PatchTokens patch_embed(const Tensor& image, const EsVitModel& model) {
  const ModelConfig& cfg = model.config;
  if (image.rank() != 3 || image.dim(0) != cfg.image_hw || image.dim(1) != cfg.image_hw ||
      image.dim(2) != kImageChannels) {
    fail(ErrorKind::kInvalidArgument, "patch_embed: expected a " + std::to_string(cfg.image_hw) + "x" +
                                          std::to_string(cfg.image_hw) + "x3 image, got " +
                                          ag::shape_string(image.shape()));
  }
  const Tensor projected = linear(ag::extract_patches(image, cfg.patch_size), model.patch_proj);
  return {ag::add(ag::concat({model.class_token, projected}, 0), model.pos_embed)};
}

PatchTokens patch_embed(const EncodedImage& img, const EsVitModel& model) {
  return patch_embed(image_tensor(img), model);
}

Tensor mhsa(const Tensor& tokens, const EncoderWeights& w, std::size_t num_heads, std::vector<Tensor>* attention) {
  require(tokens.rank() == 2, "mhsa expects [tokens x hidden]");
  const std::size_t hidden = tokens.dim(1);
  if (num_heads == 0 || hidden % num_heads != 0) {
    fail(ErrorKind::kInvalidConfig, "hidden size " + std::to_string(hidden) + " is not divisible by " +
                                        std::to_string(num_heads) + " heads");
  }
  const std::size_t d = hidden / num_heads;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  const Tensor q = linear(tokens, w.query);
  const Tensor k = linear(tokens, w.key);
  const Tensor v = linear(tokens, w.value);
  std::vector<Tensor> heads;
  heads.reserve(num_heads);
  for (std::size_t h = 0; h < num_heads; ++h) {
    const Tensor qh = ag::slice(q, 1, h * d, d);
    const Tensor kh = ag::slice(k, 1, h * d, d);
    const Tensor vh = ag::slice(v, 1, h * d, d);
    const Tensor probs = ag::softmax_rows(ag::scale(ag::matmul(qh, ag::transpose(kh)), inv_sqrt_d));
    if (attention) attention->push_back(probs);
    heads.push_back(ag::matmul(probs, vh));
  }
  return num_heads == 1 ? heads.front() : ag::concat(heads, 1);
}

Tensor encoder_layer_plain(const Tensor& tokens, const EncoderWeights& w, const ModelConfig& cfg,
                           std::vector<Tensor>* attention) {
  const Tensor a = attention_block(tokens, w, cfg, attention);
  return ag::add(a, mlp_block(a, w, cfg));
}

Tensor conv_embed(const Tensor& image, const EsVitModel& model) {
  require(image.rank() == 3 && image.dim(2) == kImageChannels, "conv_embed expects an [H x W x 3] image");
  require(!model.conv.empty(), "conv_embed: model has no convolutional branch (fusion disabled)");
  Tensor x = ag::permute(image, {2, 0, 1});
  for (std::size_t i = 0; i < model.conv.size(); ++i) {
    x = ag::conv2d(x, model.conv[i].kernels, model.conv[i].bias, kConvStride, kConvPadding);
    if (model.config.conv_activation && i + 1 < model.conv.size()) x = ag::gelu(x);
  }
  return ag::reshape(ag::mean_pool(x, {1, 2}), {1, model.config.hidden_size});
}

GlobalEmbedding se_recalibrate(const Tensor& e_raw, const SeWeights& se) {
  require(e_raw.rank() == 2, "se_recalibrate expects [positions x channels]");
  const std::size_t d = e_raw.dim(1);
  const Tensor squeezed = ag::reshape(ag::mean_pool(e_raw, {0}), {1, d});
  const Tensor gate = ag::sigmoid(linear(ag::relu(linear(squeezed, se.squeeze)), se.excite));
  return {e_raw, gate, ag::mul(gate, squeezed)};
}

Tensor fuse_tokens(const Tensor& tokens, const Tensor& e_prime, const EncoderWeights& w, const ModelConfig& cfg) {
  if (!fused(cfg, e_prime)) return tokens;
  if (e_prime.shape() != Shape{1, tokens.dim(1)}) {
    fail(ErrorKind::kInvalidArgument, "fuse_tokens: E' must be [1 x hidden], got " + ag::shape_string(e_prime.shape()));
  }
  if (cfg.fusion_mode == FusionMode::kTokenAppend) return ag::concat({tokens, e_prime}, 0);
  const Tensor ones = Tensor::full({tokens.dim(0), 1}, 1.0);
  const Tensor widened = ag::concat({tokens, ag::matmul(ones, e_prime)}, 1);
  return ag::add(tokens, linear(widened, w.fusion));
}

Tensor encoder_layer_fused(const Tensor& tokens, const Tensor& e_prime, const EncoderWeights& w,
                           const ModelConfig& cfg, std::vector<Tensor>* attention) {
  const bool inject = fused(cfg, e_prime);
  const Tensor input = fuse_tokens(tokens, e_prime, w, cfg);
  const Tensor a = attention_block(input, w, cfg, attention);
  const Tensor m = mlp_block(a, w, cfg);
  Tensor y = (inject && cfg.residual_mode == ResidualMode::kStrict) ? m : ag::add(a, m);
  if (!inject) return y;
  y = ag::add(y, ag::reshape(e_prime, {cfg.hidden_size}));
  if (cfg.fusion_mode == FusionMode::kTokenAppend) y = ag::slice(y, 0, 0, tokens.dim(0));
  return y;
}

GlobalEmbedding global_embedding(const Tensor& image, const EsVitModel& model) {
  if (!model.config.fusion_enabled) return {};
  return se_recalibrate(conv_embed(image, model), model.se);
}

Tensor forward_tokens(const Tensor& tokens, const Tensor& e_prime, const EsVitModel& model, AttentionTrace* trace) {
  Tensor x = tokens;
  for (const EncoderWeights& w : model.layers) {
    std::vector<Tensor>* maps = nullptr;
    if (trace) maps = &trace->layers.emplace_back();
    x = encoder_layer_fused(x, e_prime, w, model.config, maps);
  }
  return head_logits(x, model);
}

Tensor forward(const Tensor& image, const EsVitModel& model, AttentionTrace* trace) {
  const PatchTokens tokens = patch_embed(image, model);
  const GlobalEmbedding g = global_embedding(image, model);
  return forward_tokens(tokens.tokens, g.e_recalibrated, model, trace);
}

Tensor forward(const EncodedImage& img, const EsVitModel& model, AttentionTrace* trace) {
  return forward(image_tensor(img), model, trace);
}

Tensor forward_plain(const Tensor& image, const EsVitModel& model) {
  Tensor x = patch_embed(image, model).tokens;
  for (const EncoderWeights& w : model.layers) x = encoder_layer_plain(x, w, model.config);
  return head_logits(x, model);
}

}  // namespace esvit
