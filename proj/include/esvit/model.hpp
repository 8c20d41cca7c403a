#pragma once

// Vision Transformer encoder and the ES-ViT variant.
//
// ES-ViT adds a convolutional branch that embeds the whole image (E), a
// squeeze-and-excitation gate that recalibrates that embedding (E'), and
// injects E' into every encoder layer. All encoders are pre-norm.

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "esvit/checkpoint.hpp"
#include "esvit/image_encode.hpp"
#include "esvit/tensor.hpp"

namespace esvit {

using autograd::Tensor;

// How E' is combined with the layer input.
//   kTokenAppend:   E' joins the sequence as one extra token; dropped after the layer.
//   kChannelConcat: [T || E'] is projected back to hidden size by a learned,
//                   zero-initialised residual projection.
enum class FusionMode { kTokenAppend, kChannelConcat };

// Layer output with fusion:
//   kAdditive: Y = MLP(A) + A + E'
//   kStrict:   Y = MLP(A) + E'   (no identity path through the layer)
enum class ResidualMode { kAdditive, kStrict };

struct ModelConfig {
  std::string name = "tiny";
  std::size_t num_layers = 2;
  std::size_t hidden_size = 16;
  std::size_t mlp_size = 32;
  std::size_t num_heads = 2;
  std::size_t patch_size = 8;
  std::size_t image_hw = 32;
  std::size_t num_classes = 2;
  bool fusion_enabled = true;
  std::size_t se_reduction = 4;
  FusionMode fusion_mode = FusionMode::kTokenAppend;
  ResidualMode residual_mode = ResidualMode::kAdditive;
  // Intermediate conv-branch widths; a final stage maps to hidden_size.
  std::vector<std::size_t> conv_channels = {32, 64};
  bool conv_bias = true;
  bool conv_activation = true;  // GELU between conv stages
  double norm_eps = 1e-6;

  // Throws kInvalidConfig on any violated invariant.
  void validate() const;

  std::size_t num_patches() const { return (image_hw / patch_size) * (image_hw / patch_size); }
  std::size_t num_tokens() const { return num_patches() + 1; }
  std::size_t head_dim() const { return hidden_size / num_heads; }
  std::size_t se_hidden() const;

  // "tiny", "B/16", "B/32", "L/16", "L/32".
  static ModelConfig preset(const std::string& name, bool fusion_enabled, std::size_t num_classes);
};

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& doc, const std::string& where = "model");

struct Linear {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out]
};

struct Norm {
  Tensor gain;
  Tensor bias;
};

struct EncoderWeights {
  Norm norm1;
  Linear query, key, value, proj;
  Norm norm2;
  Linear mlp_in, mlp_out;
  Linear fusion;  // kChannelConcat only: [2D x D]
};

struct ConvStage {
  Tensor kernels;  // [out x in x 3 x 3]
  Tensor bias;     // [out] or undefined
};

struct SeWeights {
  Linear squeeze;  // [D x D/r]
  Linear excite;   // [D/r x D]
};

struct ParameterShape {
  std::string path;
  autograd::Shape shape;
};

// Every trainable tensor of a configuration, in registration order, without allocating.
std::vector<ParameterShape> parameter_shapes(const ModelConfig& cfg);

struct EsVitModel {
  ModelConfig config;
  Linear patch_proj;
  Tensor class_token;  // [1 x D]
  Tensor pos_embed;    // [tokens x D]
  std::vector<EncoderWeights> layers;
  Norm final_norm;
  Linear head;
  std::vector<ConvStage> conv;
  SeWeights se;

  // Truncated-normal (std 0.02) projections, zero biases, unit norm gains,
  // zero SE excite weights and zero fusion projections.
  static EsVitModel initialize(const ModelConfig& cfg, std::uint64_t seed);

  // Handles share storage with the model.
  std::vector<NamedTensor> parameters() const;

  Checkpoint to_checkpoint() const;
  static EsVitModel from_checkpoint(const Checkpoint& ckpt);
};

struct ParameterCount {
  std::size_t total = 0;
  std::map<std::string, std::size_t> breakdown;
};

// Closed-form accounting from the configuration.
ParameterCount count_parameters(const ModelConfig& cfg);
inline ParameterCount count_parameters(const EsVitModel& model) { return count_parameters(model.config); }

nlohmann::json model_card(const EsVitModel& model);

struct PatchTokens {
  Tensor tokens;  // [patches + 1 x D], class token first, positions added
};

struct GlobalEmbedding {
  Tensor e_raw;           // pooled conv output [1 x D]
  Tensor gate;            // SE gate [1 x D]
  Tensor e_recalibrated;  // gate * squeeze(e_raw) [1 x D]
};

// Per-layer attention probabilities, one [T x T] matrix per head.
struct AttentionTrace {
  std::vector<std::vector<Tensor>> layers;
};

Tensor image_tensor(const EncodedImage& img);  // [H x W x 3], constant

Tensor linear(const Tensor& x, const Linear& l);

PatchTokens patch_embed(const Tensor& image, const EsVitModel& model);
PatchTokens patch_embed(const EncodedImage& img, const EsVitModel& model);

// Concatenated per-head Softmax(Q K^T / sqrt(d)) V, before the output projection.
Tensor mhsa(const Tensor& tokens, const EncoderWeights& w, std::size_t num_heads,
            std::vector<Tensor>* attention = nullptr);

Tensor encoder_layer_plain(const Tensor& tokens, const EncoderWeights& w, const ModelConfig& cfg,
                           std::vector<Tensor>* attention = nullptr);

// image [H x W x 3] -> [1 x D]
Tensor conv_embed(const Tensor& image, const EsVitModel& model);

// e_raw: [positions x D]; squeeze averages over positions.
GlobalEmbedding se_recalibrate(const Tensor& e_raw, const SeWeights& se);

// Layer input with E' merged in. With fusion disabled or e_prime undefined the
// tokens pass through unchanged.
Tensor fuse_tokens(const Tensor& tokens, const Tensor& e_prime, const EncoderWeights& w, const ModelConfig& cfg);

Tensor encoder_layer_fused(const Tensor& tokens, const Tensor& e_prime, const EncoderWeights& w,
                           const ModelConfig& cfg, std::vector<Tensor>* attention = nullptr);

// E' for an image; undefined when fusion is disabled.
GlobalEmbedding global_embedding(const Tensor& image, const EsVitModel& model);

// Encoder stack + final norm + class-token head. Returns [1 x classes].
Tensor forward_tokens(const Tensor& tokens, const Tensor& e_prime, const EsVitModel& model,
                      AttentionTrace* trace = nullptr);

Tensor forward(const Tensor& image, const EsVitModel& model, AttentionTrace* trace = nullptr);
Tensor forward(const EncodedImage& img, const EsVitModel& model, AttentionTrace* trace = nullptr);

// Reference ViT path built only from encoder_layer_plain; ignores the conv/SE branch.
Tensor forward_plain(const Tensor& image, const EsVitModel& model);

}  // namespace esvit
