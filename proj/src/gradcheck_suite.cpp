#include "esvit/gradcheck_suite.hpp"

#include <cmath>
#include <functional>

#include "esvit/random.hpp"
#include "esvit/training.hpp"

namespace esvit {

namespace ag = autograd;
using ag::Shape;

namespace {

constexpr double kStep = 1e-5;

Tensor random_tensor(Rng& rng, Shape shape, double std = 1.0, double min_abs = 0.0) {
  std::vector<double> v(ag::shape_numel(shape));
  for (double& x : v) {
    do {
      x = std * rng.normal();
    } while (std::abs(x) < min_abs);
  }
  return Tensor::from_data(std::move(shape), std::move(v), true);
}

// sum(y * r) for a fixed random r, so every output coordinate carries weight.
Tensor project(const Tensor& y, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> r(y.numel());
  for (double& x : r) x = rng.normal();
  return ag::sum(ag::mul(y, Tensor::from_data(y.shape(), std::move(r))));
}

GradSuiteResult check(const std::string& name, const std::vector<Tensor>& inputs,
                      const std::function<Tensor(const std::vector<Tensor>&)>& op, const GradSuiteOptions& opt) {
  ag::GradCheckOptions gc;
  gc.step = kStep;
  gc.tolerance = opt.primitive_tolerance;
  const std::uint64_t proj_seed = opt.seed + 1000;
  const auto report =
      ag::gradient_check([&](const std::vector<Tensor>& in) { return project(op(in), proj_seed); }, inputs, gc);
  return {name, report.max_relative_error, gc.tolerance, report.entries.size(), report.passed};
}

}  // namespace

std::vector<GradSuiteResult> run_primitive_gradchecks(const GradSuiteOptions& opt) {
  Rng rng(opt.seed);
  auto t = [&](Shape s, double std = 1.0, double min_abs = 0.0) { return random_tensor(rng, std::move(s), std, min_abs); };
  std::vector<GradSuiteResult> out;
  using In = const std::vector<Tensor>&;

  out.push_back(check("add", {t({3, 4}), t({3, 4})}, [](In x) { return ag::add(x[0], x[1]); }, opt));
  out.push_back(check("add_bias", {t({3, 4}), t({4})}, [](In x) { return ag::add(x[0], x[1]); }, opt));
  out.push_back(check("sub", {t({3, 4}), t({3, 4})}, [](In x) { return ag::sub(x[0], x[1]); }, opt));
  out.push_back(check("mul", {t({3, 4}), t({3, 4})}, [](In x) { return ag::mul(x[0], x[1]); }, opt));
  out.push_back(check("scale", {t({5})}, [](In x) { return ag::scale(x[0], -1.7); }, opt));
  out.push_back(check("sum", {t({2, 3})}, [](In x) { return ag::reshape(ag::sum(x[0]), {1}); }, opt));
  out.push_back(check("matmul", {t({3, 5}), t({5, 2})}, [](In x) { return ag::matmul(x[0], x[1]); }, opt));
  out.push_back(check("transpose", {t({3, 5})}, [](In x) { return ag::transpose(x[0]); }, opt));
  out.push_back(check("permute", {t({2, 3, 4})}, [](In x) { return ag::permute(x[0], {2, 0, 1}); }, opt));
  out.push_back(check("reshape", {t({2, 6})}, [](In x) { return ag::reshape(x[0], {3, 4}); }, opt));
  out.push_back(check("softmax_rows", {t({3, 5})}, [](In x) { return ag::softmax_rows(x[0]); }, opt));
  out.push_back(check("log_softmax_rows", {t({3, 5})}, [](In x) { return ag::log_softmax_rows(x[0]); }, opt));
  out.push_back(check("layer_norm", {t({3, 6}), t({6}), t({6})},
                      [](In x) { return ag::layer_norm(x[0], x[1], x[2], 1e-6); }, opt));
  out.push_back(check("gelu", {t({4, 4}, 2.0)}, [](In x) { return ag::gelu(x[0]); }, opt));
  out.push_back(check("sigmoid", {t({4, 4}, 2.0)}, [](In x) { return ag::sigmoid(x[0]); }, opt));
  out.push_back(check("relu", {t({4, 4}, 1.0, 0.05)}, [](In x) { return ag::relu(x[0]); }, opt));
  out.push_back(check("concat", {t({2, 3}), t({2, 2})}, [](In x) { return ag::concat({x[0], x[1]}, 1); }, opt));
  out.push_back(check("slice", {t({4, 5})}, [](In x) { return ag::slice(x[0], 1, 1, 3); }, opt));
  out.push_back(check("split", {t({5, 3})},
                      [](In x) {
                        const auto parts = ag::split(x[0], 0, {2, 3});
                        return ag::concat({ag::scale(parts[0], 2.0), parts[1]}, 0);
                      },
                      opt));
  out.push_back(check("mean_pool", {t({2, 3, 4})}, [](In x) { return ag::mean_pool(x[0], {1, 2}); }, opt));
  out.push_back(check("conv2d", {t({2, 7, 6}), t({3, 2, 3, 3}), t({3})},
                      [](In x) { return ag::conv2d(x[0], x[1], x[2], 2, 1); }, opt));
  out.push_back(check("conv2d_nobias", {t({2, 5, 5}), t({2, 2, 3, 3})},
                      [](In x) { return ag::conv2d(x[0], x[1], Tensor(), 1, 0); }, opt));
  out.push_back(check("extract_patches", {t({4, 6, 3})}, [](In x) { return ag::extract_patches(x[0], 2); }, opt));
  out.push_back(check("cross_entropy", {t({3, 4})},
                      [](In x) { return ag::reshape(cross_entropy(x[0], {0, 3, 1}), {1}); }, opt));
  return out;
}

GradSuiteResult run_model_gradcheck(const ModelConfig& cfg, const GradSuiteOptions& opt) {
  EsVitModel model = EsVitModel::initialize(cfg, opt.seed);
  Rng rng(opt.seed + 1);
  std::vector<Tensor> params;
  for (NamedTensor& p : model.parameters()) {
    auto v = p.tensor.mutable_data();
    const bool gain = p.path.size() >= 5 && p.path.compare(p.path.size() - 5, 5, ".gain") == 0;
    for (double& x : v) x = (gain ? 1.0 : 0.0) + rng.truncated_normal(0.2);
    params.push_back(p.tensor);
  }
  std::vector<double> pixels(cfg.image_hw * cfg.image_hw * EncodedImage::kChannels);
  for (double& x : pixels) x = rng.uniform();
  const Tensor image = Tensor::from_data({cfg.image_hw, cfg.image_hw, EncodedImage::kChannels}, std::move(pixels));
  const std::size_t label = cfg.num_classes > 1 ? 1 : 0;

  ag::GradCheckOptions gc;
  gc.step = kStep;
  gc.tolerance = opt.model_tolerance;
  gc.max_coordinates = opt.model_coordinates;
  gc.seed = opt.seed;
  const auto report = ag::gradient_check(
      [&](const std::vector<Tensor>&) { return cross_entropy(forward(image, model), label); }, params, gc);
  std::string name = "model[" + cfg.name + (cfg.fusion_enabled ? ",fusion" : ",plain") + "]";
  return {name, report.max_relative_error, gc.tolerance, report.entries.size(), report.passed};
}

}  // namespace esvit
