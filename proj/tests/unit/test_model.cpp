#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"

#include "esvit/error.hpp"
#include "esvit/gradcheck_suite.hpp"
#include "esvit/model.hpp"
#include "esvit/random.hpp"
#include "esvit/training.hpp"

using namespace esvit;
namespace ag = esvit::autograd;

namespace {

Tensor random_image(std::size_t hw, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(hw * hw * 3);
  for (double& x : v) x = rng.uniform();
  return Tensor::from_data({hw, hw, 3}, std::move(v));
}

Tensor randn(ag::Shape shape, std::uint64_t seed, double std = 1.0) {
  Rng rng(seed);
  std::vector<double> v(ag::shape_numel(shape));
  for (double& x : v) x = std * rng.normal();
  return Tensor::from_data(std::move(shape), std::move(v));
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Every parameter redrawn so that zero-initialised parts carry signal too.
void randomize(EsVitModel& model, std::uint64_t seed, double std = 0.3) {
  Rng rng(seed);
  for (NamedTensor& p : model.parameters()) {
    const double base = ends_with(p.path, ".gain") ? 1.0 : 0.0;
    for (double& x : p.tensor.mutable_data()) x = base + std * rng.normal();
  }
}

void fill(Tensor& t, double v) {
  for (double& x : t.mutable_data()) x = v;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.shape() == b.shape());
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.at(i) - b.at(i)));
  return m;
}

}  // namespace

TEST_CASE("token counts") {
  CHECK(ModelConfig::preset("B/16", true, 2).num_tokens() == 197);
  CHECK(ModelConfig::preset("B/32", true, 2).num_tokens() == 50);
  CHECK(ModelConfig::preset("L/32", false, 2).num_patches() == 49);
  ModelConfig tiny;
  CHECK(tiny.num_tokens() == 17);
  const EsVitModel m = EsVitModel::initialize(tiny, 1);
  CHECK(patch_embed(random_image(32, 1), m).tokens.shape() == ag::Shape{17, 16});
}

TEST_CASE("configuration validation") {
  ModelConfig c;
  c.num_heads = 3;
  CHECK_THROWS_AS(c.validate(), Error);
  c = ModelConfig{};
  c.patch_size = 7;
  CHECK_THROWS_AS(c.validate(), Error);
  c = ModelConfig{};
  c.num_classes = 1;
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK_THROWS_AS(ModelConfig::preset("H/14", true, 2), Error);
  try {
    ModelConfig::preset("H/14", true, 2);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInvalidConfig);
  }
}

TEST_CASE("config JSON round trip and unknown keys") {
  ModelConfig c;
  c.fusion_mode = FusionMode::kChannelConcat;
  c.residual_mode = ResidualMode::kStrict;
  c.conv_channels = {8};
  const ModelConfig back = model_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  auto doc = to_json(c);
  doc["hidden"] = 3;
  CHECK_THROWS_AS(model_config_from_json(doc), Error);
}

TEST_CASE("initialisation") {
  const EsVitModel m = EsVitModel::initialize(ModelConfig{}, 3);
  const auto shapes = parameter_shapes(m.config);
  const auto params = m.parameters();
  REQUIRE(params.size() == shapes.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    CHECK(params[i].path == shapes[i].path);
    CHECK(params[i].tensor.shape() == shapes[i].shape);
    CHECK(params[i].tensor.requires_grad());
    const auto v = params[i].tensor.data();
    if (ends_with(params[i].path, ".gain")) {
      for (double x : v) CHECK(x == 1.0);
    } else if (ends_with(params[i].path, ".bias") || params[i].path == "se.excite.weight") {
      for (double x : v) CHECK(x == 0.0);
    } else {
      for (double x : v) CHECK(std::abs(x) <= 0.04);
    }
  }
  // Same seed, same weights.
  const EsVitModel again = EsVitModel::initialize(ModelConfig{}, 3);
  for (std::size_t i = 0; i < params.size(); ++i)
    CHECK(std::equal(params[i].tensor.data().begin(), params[i].tensor.data().end(),
                     again.parameters()[i].tensor.data().begin()));
}

TEST_CASE("multi-head self-attention matches a brute-force oracle") {
  ModelConfig cfg;
  EsVitModel m = EsVitModel::initialize(cfg, 4);
  randomize(m, 5);
  const EncoderWeights& w = m.layers[0];
  const std::size_t t = 5, d = cfg.hidden_size, h = cfg.num_heads, dh = d / h;
  const Tensor x = randn({t, d}, 6);
  std::vector<Tensor> attn;
  const Tensor got = mhsa(x, w, h, &attn);
  REQUIRE(got.shape() == ag::Shape{t, d});
  REQUIRE(attn.size() == h);

  auto project = [&](const Linear& l) {
    std::vector<double> out(t * d);
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        double s = l.bias.at(j);
        for (std::size_t k = 0; k < d; ++k) s += x.at(i, k) * l.weight.at(k, j);
        out[i * d + j] = s;
      }
    return out;
  };
  const auto q = project(w.query), k = project(w.key), v = project(w.value);
  for (std::size_t head = 0; head < h; ++head) {
    for (std::size_t i = 0; i < t; ++i) {
      std::vector<double> score(t);
      for (std::size_t j = 0; j < t; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < dh; ++c) s += q[i * d + head * dh + c] * k[j * d + head * dh + c];
        score[j] = s / std::sqrt(static_cast<double>(dh));
      }
      const double mx = *std::max_element(score.begin(), score.end());
      double z = 0.0;
      for (double& s : score) z += (s = std::exp(s - mx));
      for (double& s : score) s /= z;
      for (std::size_t j = 0; j < t; ++j) CHECK(attn[head].at(i, j) == doctest::Approx(score[j]).epsilon(1e-12));
      for (std::size_t c = 0; c < dh; ++c) {
        double o = 0.0;
        for (std::size_t j = 0; j < t; ++j) o += score[j] * v[j * d + head * dh + c];
        CHECK(got.at(i, head * dh + c) == doctest::Approx(o).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("attention edge cases") {
  ModelConfig cfg;
  EsVitModel m = EsVitModel::initialize(cfg, 40);
  randomize(m, 41);
  const EncoderWeights& w = m.layers[0];
  SUBCASE("a single token attends only to itself") {
    const Tensor x = randn({1, 16}, 42);
    std::vector<Tensor> attn;
    const Tensor y = mhsa(x, w, cfg.num_heads, &attn);
    for (const Tensor& a : attn) CHECK(a.at(0) == 1.0);
    const Tensor v = linear(x, w.value);
    CHECK(max_abs_diff(y, v) <= 1e-15);
  }
  SUBCASE("identical tokens give identical rows") {
    const Tensor row = randn({1, 16}, 43);
    const Tensor y = mhsa(ag::concat({row, row}, 0), w, cfg.num_heads);
    for (std::size_t j = 0; j < 16; ++j) CHECK(y.at(0, j) == y.at(1, j));
  }
  SUBCASE("zero image, weights and positions make every token the class token") {
    EsVitModel z = EsVitModel::initialize(cfg, 44);
    fill(z.patch_proj.weight, 0.0);
    fill(z.pos_embed, 0.0);
    fill(z.class_token, 0.0);
    const Tensor tokens = patch_embed(Tensor::zeros({32, 32, 3}), z).tokens;
    for (std::size_t r = 0; r < 17; ++r)
      for (std::size_t j = 0; j < 16; ++j) CHECK(tokens.at(r, j) == z.class_token.at(j));
  }
  SUBCASE("head count must divide the hidden size") {
    CHECK_THROWS_AS(mhsa(randn({3, 16}, 45), w, 3), Error);
  }
}

TEST_CASE("zero image gives a zero embedding through a bias-free conv stack") {
  ModelConfig cfg;
  cfg.conv_bias = false;
  EsVitModel m = EsVitModel::initialize(cfg, 46);
  randomize(m, 47);
  const Tensor e = conv_embed(Tensor::zeros({32, 32, 3}), m);
  CHECK(e.shape() == ag::Shape{1, 16});
  for (std::size_t j = 0; j < 16; ++j) CHECK(e.at(j) == 0.0);
}

TEST_CASE("zero attention and MLP weights make a layer the identity") {
  ModelConfig cfg;
  cfg.fusion_enabled = false;
  EsVitModel m = EsVitModel::initialize(cfg, 7);
  EncoderWeights w = m.layers[0];
  for (Linear* l : {&w.query, &w.key, &w.value, &w.proj, &w.mlp_in, &w.mlp_out}) {
    fill(l->weight, 0.0);
    fill(l->bias, 0.0);
  }
  const Tensor x = randn({17, 16}, 8);
  CHECK(max_abs_diff(encoder_layer_plain(x, w, cfg), x) == 0.0);
}

TEST_CASE("fusion disabled reproduces the plain ViT") {
  ModelConfig cfg;
  cfg.fusion_enabled = false;
  EsVitModel m = EsVitModel::initialize(cfg, 9);
  randomize(m, 10);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Tensor img = random_image(32, 100 + s);
    CHECK(max_abs_diff(forward(img, m), forward_plain(img, m)) <= 1e-12);
  }
  CHECK_FALSE(global_embedding(random_image(32, 1), m).e_recalibrated.defined());
}

TEST_CASE("channel-concat fusion with a zero embedding leaves the layer unchanged") {
  ModelConfig cfg;
  cfg.fusion_mode = FusionMode::kChannelConcat;
  EsVitModel m = EsVitModel::initialize(cfg, 11);
  randomize(m, 12);
  EncoderWeights w = m.layers[1];
  // Token half of the projection and its bias are zero; only E' could contribute.
  auto fw = w.fusion.weight.mutable_data();
  std::fill(fw.begin(), fw.begin() + static_cast<long>(cfg.hidden_size * cfg.hidden_size), 0.0);
  fill(w.fusion.bias, 0.0);
  const Tensor x = randn({17, 16}, 13);
  const Tensor zero = Tensor::zeros({1, 16});
  CHECK(max_abs_diff(encoder_layer_fused(x, zero, w, cfg), encoder_layer_plain(x, w, cfg)) <= 1e-9);
  // A non-zero embedding does change the output.
  CHECK(max_abs_diff(encoder_layer_fused(x, randn({1, 16}, 14), w, cfg), encoder_layer_plain(x, w, cfg)) > 1e-6);
}

TEST_CASE("fused layer output forms") {
  ModelConfig cfg;
  EsVitModel m = EsVitModel::initialize(cfg, 15);
  randomize(m, 16);
  const EncoderWeights& w = m.layers[0];
  const Tensor x = randn({17, 16}, 17);
  const Tensor e = randn({1, 16}, 18);
  const Tensor y = encoder_layer_fused(x, e, w, cfg);
  CHECK(y.shape() == ag::Shape{17, 16});

  ModelConfig strict = cfg;
  strict.residual_mode = ResidualMode::kStrict;
  const Tensor ys = encoder_layer_fused(x, e, w, strict);
  // Additive minus strict is the attention-block output for the original tokens.
  const Tensor appended = ag::concat({x, e}, 0);
  const Tensor with_token = encoder_layer_plain(appended, w, cfg);
  for (std::size_t i = 0; i < 17; ++i)
    for (std::size_t j = 0; j < 16; ++j)
      CHECK(y.at(i, j) == doctest::Approx(with_token.at(i, j) + e.at(j)).epsilon(1e-12));
  CHECK(max_abs_diff(y, ys) > 1e-6);
}

TEST_CASE("squeeze-and-excitation gate") {
  ModelConfig cfg;
  EsVitModel m = EsVitModel::initialize(cfg, 19);
  randomize(m, 20);
  const Tensor e = randn({3, 16}, 21);
  const GlobalEmbedding g = se_recalibrate(e, m.se);
  const std::size_t d = 16, r = cfg.se_hidden();
  CHECK(r == 4);
  std::vector<double> z(d, 0.0);
  for (std::size_t p = 0; p < 3; ++p)
    for (std::size_t j = 0; j < d; ++j) z[j] += e.at(p, j) / 3.0;
  std::vector<double> hidden(r);
  for (std::size_t k = 0; k < r; ++k) {
    double s = m.se.squeeze.bias.at(k);
    for (std::size_t j = 0; j < d; ++j) s += z[j] * m.se.squeeze.weight.at(j, k);
    hidden[k] = std::max(0.0, s);
  }
  for (std::size_t j = 0; j < d; ++j) {
    double s = m.se.excite.bias.at(j);
    for (std::size_t k = 0; k < r; ++k) s += hidden[k] * m.se.excite.weight.at(k, j);
    const double gate = 1.0 / (1.0 + std::exp(-s));
    CHECK(g.gate.at(j) == doctest::Approx(gate).epsilon(1e-12));
    CHECK(g.e_recalibrated.at(j) == doctest::Approx(gate * z[j]).epsilon(1e-12));
  }

  SUBCASE("gate extremes") {
    EsVitModel open = m;
    fill(open.se.excite.weight, 0.0);
    fill(open.se.excite.bias, 50.0);
    const GlobalEmbedding go = se_recalibrate(e, open.se);
    for (std::size_t j = 0; j < d; ++j) CHECK(go.e_recalibrated.at(j) == doctest::Approx(z[j]).epsilon(1e-12));
    fill(open.se.excite.bias, -50.0);
    const GlobalEmbedding gc = se_recalibrate(e, open.se);
    for (std::size_t j = 0; j < d; ++j) CHECK(std::abs(gc.e_recalibrated.at(j)) < 1e-20);
  }
  SUBCASE("initial gate is one half") {
    const EsVitModel fresh = EsVitModel::initialize(cfg, 22);
    const GlobalEmbedding gi = se_recalibrate(e, fresh.se);
    for (std::size_t j = 0; j < d; ++j) CHECK(gi.gate.at(j) == 0.5);
  }
}

TEST_CASE("linear conv branch is homogeneous") {
  ModelConfig cfg;
  cfg.conv_bias = false;
  cfg.conv_activation = false;
  EsVitModel m = EsVitModel::initialize(cfg, 23);
  randomize(m, 24);
  const Tensor img = random_image(32, 25);
  std::vector<double> scaled(img.data().begin(), img.data().end());
  for (double& v : scaled) v *= 2.5;
  const Tensor a = conv_embed(img, m);
  const Tensor b = conv_embed(Tensor::from_data({32, 32, 3}, scaled), m);
  CHECK(a.shape() == ag::Shape{1, 16});
  for (std::size_t j = 0; j < 16; ++j) CHECK(b.at(j) == doctest::Approx(2.5 * a.at(j)).epsilon(1e-12));
}

TEST_CASE("attention maps are row-stochastic") {
  ModelConfig cfg;
  EsVitModel m = EsVitModel::initialize(cfg, 26);
  randomize(m, 27);
  AttentionTrace trace;
  (void)forward(random_image(32, 28), m, &trace);
  REQUIRE(trace.layers.size() == 2);
  for (const auto& layer : trace.layers) {
    REQUIRE(layer.size() == 2);
    for (const Tensor& a : layer) {
      CHECK(a.shape() == ag::Shape{18, 18});  // 17 tokens plus the appended E'
      for (std::size_t i = 0; i < 18; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < 18; ++j) {
          CHECK(a.at(i, j) >= 0.0);
          s += a.at(i, j);
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("permuting patch tokens with their positions leaves logits unchanged") {
  ModelConfig cfg;
  EsVitModel m = EsVitModel::initialize(cfg, 29);
  randomize(m, 30);
  const Tensor img = random_image(32, 31);
  const Tensor tokens = patch_embed(img, m).tokens;
  const Tensor e = global_embedding(img, m).e_recalibrated;
  std::vector<std::size_t> order(16);
  std::iota(order.begin(), order.end(), 1);
  std::mt19937_64 rng(32);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Tensor> rows = {ag::slice(tokens, 0, 0, 1)};
  for (std::size_t r : order) rows.push_back(ag::slice(tokens, 0, r, 1));
  const Tensor permuted = ag::concat(rows, 0);
  CHECK(max_abs_diff(forward_tokens(permuted, e, m), forward_tokens(tokens, e, m)) <= 1e-9);
}

TEST_CASE("parameter accounting") {
  SUBCASE("tiny, three classes, by hand") {
    ModelConfig cfg;
    cfg.num_classes = 3;
    const std::size_t patch = 8 * 8 * 3 * 16 + 16;                 // 3088
    const std::size_t cls = 16, pos = 17 * 16;                     // 16, 272
    const std::size_t layer = 4 * 16 + 4 * (16 * 16 + 16) + (16 * 32 + 32) + (32 * 16 + 16);  // 2224
    const std::size_t final_norm = 32, head = 16 * 3 + 3;          // 32, 51
    const std::size_t conv = (32 * 3 * 9 + 32) + (64 * 32 * 9 + 64) + (16 * 64 * 9 + 16);  // 28624
    const std::size_t se = (16 * 4 + 4) + (4 * 16 + 16);           // 148
    const std::size_t expected = patch + cls + pos + 2 * layer + final_norm + head + conv + se;
    CHECK(expected == 36679);
    const ParameterCount pc = count_parameters(cfg);
    CHECK(pc.total == expected);
    CHECK(pc.breakdown.at("encoder") == 2 * layer);
    CHECK(pc.breakdown.at("conv_embed") == conv);
    CHECK(pc.breakdown.at("se") == se);

    ModelConfig concat = cfg;
    concat.fusion_mode = FusionMode::kChannelConcat;
    CHECK(count_parameters(concat).total == expected + 2 * (32 * 16 + 16));
    ModelConfig plain = cfg;
    plain.fusion_enabled = false;
    CHECK(count_parameters(plain).total == expected - conv - se);
  }
  SUBCASE("closed form equals enumeration") {
    for (const std::string name : {"tiny", "B/32"}) {
      for (bool fusion : {true, false}) {
        const ModelConfig cfg = ModelConfig::preset(name, fusion, 2);
        std::size_t n = 0;
        for (const ParameterShape& p : parameter_shapes(cfg)) n += ag::shape_numel(p.shape);
        CHECK(count_parameters(cfg).total == n);
      }
    }
    const EsVitModel m = EsVitModel::initialize(ModelConfig{}, 1);
    std::size_t n = 0;
    for (const NamedTensor& p : m.parameters()) n += p.tensor.numel();
    CHECK(count_parameters(m).total == n);
  }
  SUBCASE("ViT-B/16 size") {
    const double total = static_cast<double>(count_parameters(ModelConfig::preset("B/16", false, 2)).total);
    CHECK(std::abs(total - 86.6e6) <= 0.02 * 86.6e6);
  }
}

TEST_CASE("checkpoint round trip preserves outputs") {
  ModelConfig cfg;
  EsVitModel m = EsVitModel::initialize(cfg, 33);
  randomize(m, 34);
  const EsVitModel back = EsVitModel::from_checkpoint(checkpoint_from_json(checkpoint_to_json(m.to_checkpoint())));
  const Tensor img = random_image(32, 35);
  CHECK(max_abs_diff(forward(img, m), forward(img, back)) == 0.0);

  Checkpoint broken = m.to_checkpoint();
  broken.parameters.pop_back();
  CHECK_THROWS_AS(EsVitModel::from_checkpoint(broken), Error);
}

TEST_CASE("gradients reach the excitation branch") {
  ModelConfig cfg;
  EsVitModel m = EsVitModel::initialize(cfg, 36);
  const Tensor loss = cross_entropy(forward(random_image(32, 37), m), std::size_t{1});
  ag::backward(loss);
  auto nonzero = [](const Tensor& t) {
    if (!t.has_grad()) return false;
    const auto g = t.grad();
    return std::any_of(g.begin(), g.end(), [](double v) { return v != 0.0; });
  };
  CHECK(nonzero(m.se.excite.weight));
  CHECK(nonzero(m.se.excite.bias));
  CHECK(nonzero(m.conv.back().kernels));
  CHECK(nonzero(m.head.weight));
  CHECK(nonzero(m.patch_proj.weight));
}

TEST_CASE("end-to-end model gradient checks") {
  for (bool fusion : {true, false}) {
    ModelConfig cfg;
    cfg.fusion_enabled = fusion;
    const GradSuiteResult r = run_model_gradcheck(cfg);
    CAPTURE(r.name);
    CAPTURE(r.max_relative_error);
    CHECK(r.coordinates == 50);
    CHECK(r.passed);
  }
  ModelConfig concat;
  concat.fusion_mode = FusionMode::kChannelConcat;
  concat.residual_mode = ResidualMode::kStrict;
  CHECK(run_model_gradcheck(concat).passed);
}
