#include "esvit/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "esvit/error.hpp"
#include "esvit/json_util.hpp"
#include "esvit/random.hpp"

namespace esvit {

using nlohmann::json;
namespace ag = autograd;

void TrainConfig::validate() const {
  auto check = [](bool ok, const std::string& msg) {
    if (!ok) fail(ErrorKind::kInvalidConfig, "train: " + msg);
  };
  check(learning_rate > 0.0 && std::isfinite(learning_rate), "learning_rate must be positive");
  check(batch_size >= 1, "batch_size must be >= 1");
  check(epochs >= 1, "epochs must be >= 1");
  check(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "adam betas must lie in [0, 1)");
  check(adam_eps > 0.0, "adam_eps must be positive");
  check(precision == 32 || precision == 64, "precision must be 32 or 64");
  check(precision == 64, "precision 32 is not supported by this build; use 64");
}

json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
          {"epochs", c.epochs},               {"seed", c.seed},
          {"adam_betas", {c.beta1, c.beta2}}, {"adam_eps", c.adam_eps},
          {"precision", c.precision},         {"checkpoint_every", c.checkpoint_every}};
}

TrainConfig train_config_from_json(const json& doc, const std::string& where) {
  using namespace jsonutil;
  reject_unknown_keys(doc,
                      {"learning_rate", "batch_size", "epochs", "seed", "adam_betas", "adam_eps", "precision",
                       "checkpoint_every"},
                      where);
  TrainConfig c;
  read(doc, "learning_rate", c.learning_rate, where);
  read(doc, "batch_size", c.batch_size, where);
  read(doc, "epochs", c.epochs, where);
  read(doc, "seed", c.seed, where);
  read(doc, "adam_eps", c.adam_eps, where);
  read(doc, "precision", c.precision, where);
  read(doc, "checkpoint_every", c.checkpoint_every, where);
  std::vector<double> betas{c.beta1, c.beta2};
  read(doc, "adam_betas", betas, where);
  if (betas.size() != 2) fail(ErrorKind::kInvalidConfig, where + ".adam_betas: expected two numbers");
  c.beta1 = betas[0];
  c.beta2 = betas[1];
  c.validate();
  return c;
}

void adam_step(const std::vector<Tensor>& params, AdamState& state, const TrainConfig& cfg) {
  if (state.m.empty()) {
    for (const Tensor& p : params) {
      state.m.emplace_back(p.numel(), 0.0);
      state.v.emplace_back(p.numel(), 0.0);
    }
  }
  require(state.m.size() == params.size(), "adam_step: state does not match the parameter list");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i];
    const auto g = p.grad();
    auto w = p.mutable_data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    require(m.size() == w.size(), "adam_step: state does not match the parameter list");
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g.empty() ? 0.0 : g[j];
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
      w[j] -= cfg.learning_rate * (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg.adam_eps);
    }
  }
}

Tensor cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels) {
  require(logits.rank() == 2, "cross_entropy expects [rows x classes] logits");
  const std::size_t rows = logits.dim(0);
  const std::size_t k = logits.dim(1);
  require(labels.size() == rows, "cross_entropy: one label per row required");
  const auto z = logits.data();
  std::vector<double> probs(rows * k);
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (labels[r] >= k) {
      fail(ErrorKind::kOutOfRange, "label " + std::to_string(labels[r]) + " out of range for " +
                                       std::to_string(k) + " classes");
    }
    const double* zr = z.data() + r * k;
    const double mx = *std::max_element(zr, zr + k);
    double s = 0.0;
    for (std::size_t c = 0; c < k; ++c) s += std::exp(zr[c] - mx);
    for (std::size_t c = 0; c < k; ++c) probs[r * k + c] = std::exp(zr[c] - mx) / s;
    loss += mx + std::log(s) - zr[labels[r]];
  }
  loss /= static_cast<double>(rows);
  return ag::make_result("cross_entropy", {}, {loss}, {logits},
                         [rows, k, labels, probs = std::move(probs)](ag::Node& n) {
                           ag::Node& p = *n.parents[0];
                           if (!p.requires_grad) return;
                           const double g = n.grad[0] / static_cast<double>(rows);
                           for (std::size_t r = 0; r < rows; ++r) {
                             for (std::size_t c = 0; c < k; ++c) {
                               const double onehot = c == labels[r] ? 1.0 : 0.0;
                               p.grad[r * k + c] += g * (probs[r * k + c] - onehot);
                             }
                           }
                         });
}

Tensor cross_entropy(const Tensor& logits, std::size_t label) {
  return cross_entropy(logits, std::vector<std::size_t>{label});
}

MetricsReport metrics_from_confusion(std::vector<std::vector<std::size_t>> confusion) {
  MetricsReport r;
  const std::size_t k = confusion.size();
  for (const auto& row : confusion) require(row.size() == k, "confusion matrix must be square");
  r.num_classes = k;
  r.confusion = std::move(confusion);
  std::size_t total = 0, correct = 0;
  std::vector<std::size_t> predicted(k, 0);
  r.support.assign(k, 0);
  for (std::size_t t = 0; t < k; ++t) {
    for (std::size_t p = 0; p < k; ++p) {
      const std::size_t n = r.confusion[t][p];
      total += n;
      r.support[t] += n;
      predicted[p] += n;
      if (t == p) correct += n;
    }
  }
  auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
  r.accuracy = ratio(static_cast<double>(correct), static_cast<double>(total));
  for (std::size_t c = 0; c < k; ++c) {
    const double tp = static_cast<double>(r.confusion[c][c]);
    const double fp = static_cast<double>(predicted[c]) - tp;
    const double fn = static_cast<double>(r.support[c]) - tp;
    const double tn = static_cast<double>(total) - tp - fp - fn;
    const double p = ratio(tp, tp + fp);
    const double rec = ratio(tp, tp + fn);
    r.precision.push_back(p);
    r.recall.push_back(rec);
    r.f1.push_back(ratio(2.0 * p * rec, p + rec));
    r.class_accuracy.push_back(ratio(tp + tn, static_cast<double>(total)));
  }
  if (k > 0) {
    const double dk = static_cast<double>(k);
    r.macro_precision = std::accumulate(r.precision.begin(), r.precision.end(), 0.0) / dk;
    r.macro_recall = std::accumulate(r.recall.begin(), r.recall.end(), 0.0) / dk;
    r.macro_f1 = std::accumulate(r.f1.begin(), r.f1.end(), 0.0) / dk;
  }
  return r;
}

MetricsReport compute_metrics(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& predicted,
                              std::size_t num_classes) {
  require(truth.size() == predicted.size(), "compute_metrics: truth and predictions differ in length");
  require(num_classes >= 1, "compute_metrics: num_classes must be >= 1");
  std::vector<std::vector<std::size_t>> confusion(num_classes, std::vector<std::size_t>(num_classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= num_classes || predicted[i] >= num_classes) {
      fail(ErrorKind::kOutOfRange, "compute_metrics: class index out of range");
    }
    ++confusion[truth[i]][predicted[i]];
  }
  return metrics_from_confusion(std::move(confusion));
}

json to_json(const MetricsReport& r) {
  return {{"num_classes", r.num_classes},
          {"accuracy", r.accuracy},
          {"macro_precision", r.macro_precision},
          {"macro_recall", r.macro_recall},
          {"macro_f1", r.macro_f1},
          {"per_class",
           {{"precision", r.precision},
            {"recall", r.recall},
            {"f1", r.f1},
            {"accuracy", r.class_accuracy},
            {"support", r.support}}},
          {"confusion", r.confusion}};
}

std::string confusion_csv(const MetricsReport& r) {
  std::ostringstream os;
  os << "true\\predicted";
  for (std::size_t c = 0; c < r.num_classes; ++c) os << ',' << c;
  os << '\n';
  for (std::size_t t = 0; t < r.num_classes; ++t) {
    os << t;
    for (std::size_t p = 0; p < r.num_classes; ++p) os << ',' << r.confusion[t][p];
    os << '\n';
  }
  return os.str();
}

std::string epoch_log_header() { return "epoch,split,loss,accuracy,precision,recall,f1"; }

std::string epoch_log_line(const EpochRecord& e) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%s,%.17g,%.17g,%.17g,%.17g,%.17g", e.epoch, e.split.c_str(), e.loss,
                e.metrics.accuracy, e.metrics.macro_precision, e.metrics.macro_recall, e.metrics.macro_f1);
  return buf;
}

std::string TrainResult::epoch_log_csv() const {
  std::string out = epoch_log_header() + "\n";
  for (const EpochRecord& e : log) out += epoch_log_line(e) + "\n";
  return out;
}

std::size_t argmax(const Tensor& logits) {
  const auto z = logits.data();
  require(!z.empty(), "argmax of an empty tensor");
  return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
}

namespace {

void check_dataset(const LabeledImages& data, const EsVitModel& model, const char* what) {
  if (data.images.size() != data.labels.size()) {
    fail(ErrorKind::kInvalidArgument, std::string(what) + ": images and labels differ in count");
  }
  if (data.num_classes != model.config.num_classes) {
    fail(ErrorKind::kInvalidConfig, std::string(what) + ": dataset has " + std::to_string(data.num_classes) +
                                        " classes but the model head has " +
                                        std::to_string(model.config.num_classes));
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.labels[i] >= data.num_classes) {
      fail(ErrorKind::kOutOfRange, std::string(what) + ": label " + std::to_string(data.labels[i]) + " of item " +
                                       std::to_string(i) + " is out of range");
    }
    const EncodedImage& img = data.images[i];
    if (img.height != model.config.image_hw || img.width != model.config.image_hw) {
      fail(ErrorKind::kInvalidConfig, std::string(what) + ": image " + std::to_string(i) + " is " +
                                          std::to_string(img.height) + "x" + std::to_string(img.width) +
                                          ", model expects " + std::to_string(model.config.image_hw));
    }
  }
}

std::vector<Tensor> to_tensors(const LabeledImages& data) {
  std::vector<Tensor> out;
  out.reserve(data.size());
  for (const EncodedImage& img : data.images) out.push_back(image_tensor(img));
  return out;
}

}  // namespace

Evaluation evaluate(const EsVitModel& model, const LabeledImages& data) {
  check_dataset(data, model, "evaluate");
  require(data.size() > 0, "evaluate: empty dataset");
  Evaluation ev;
  double loss = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Tensor logits = forward(data.images[i], model);
    ev.predictions.push_back(argmax(logits));
    loss += cross_entropy(logits, data.labels[i]).item();
  }
  ev.loss = loss / static_cast<double>(data.size());
  ev.metrics = compute_metrics(data.labels, ev.predictions, data.num_classes);
  return ev;
}

TrainResult train(EsVitModel& model, const LabeledImages& train_set, const TrainConfig& cfg,
                  const LabeledImages& test, const TrainHooks& hooks) {
  cfg.validate();
  if (train_set.size() == 0) fail(ErrorKind::kInvalidArgument, "train: empty training set");
  check_dataset(train_set, model, "train");
  if (test.size() > 0) check_dataset(test, model, "test");

  const std::vector<Tensor> images = to_tensors(train_set);
  std::vector<Tensor> params;
  for (const NamedTensor& p : model.parameters()) params.push_back(p.tensor);

  Rng rng(cfg.seed);
  AdamState adam;
  TrainResult result;
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order.begin(), order.end());
    std::vector<std::size_t> truth, predicted;
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      for (Tensor& p : params) p.zero_grad();
      Tensor total;
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t i = order[b];
        const Tensor logits = forward(images[i], model);
        truth.push_back(train_set.labels[i]);
        predicted.push_back(argmax(logits));
        const Tensor loss = cross_entropy(logits, train_set.labels[i]);
        total = total.defined() ? ag::add(total, loss) : loss;
      }
      const double batch = static_cast<double>(end - start);
      const Tensor batch_loss = ag::scale(total, 1.0 / batch);
      loss_sum += batch_loss.item() * batch;
      ag::backward(batch_loss);
      adam_step(params, adam, cfg);
    }
    result.log.push_back({epoch, "train", loss_sum / static_cast<double>(order.size()),
                          compute_metrics(truth, predicted, train_set.num_classes)});
    if (test.size() > 0) {
      Evaluation ev = evaluate(model, test);
      result.log.push_back({epoch, "test", ev.loss, std::move(ev.metrics)});
    }
    if (hooks.on_epoch) hooks.on_epoch(epoch, model, result.log);
  }
  return result;
}

LabelTask label_task_from_string(const std::string& name) {
  if (name == "emotion") return LabelTask::kEmotion;
  if (name == "valence") return LabelTask::kValence;
  if (name == "arousal") return LabelTask::kArousal;
  if (name == "dominance") return LabelTask::kDominance;
  fail(ErrorKind::kInvalidConfig, "unknown label task '" + name + "' (emotion|valence|arousal|dominance)");
}

const char* to_string(LabelTask task) {
  switch (task) {
    case LabelTask::kEmotion: return "emotion";
    case LabelTask::kValence: return "valence";
    case LabelTask::kArousal: return "arousal";
    case LabelTask::kDominance: return "dominance";
  }
  return "unknown";
}

std::size_t num_classes(LabelTask task) { return task == LabelTask::kEmotion ? kNumEmotions : 2; }

std::size_t binarize_labels(double raw, LabelTask task, double scale_max) {
  if (!std::isfinite(raw)) fail(ErrorKind::kOutOfRange, "label value is not finite");
  if (task == LabelTask::kEmotion) {
    if (raw < 0.0 || raw >= static_cast<double>(kNumEmotions) || raw != std::floor(raw)) {
      fail(ErrorKind::kOutOfRange, "emotion label must be an integer in [0, 6], got " + std::to_string(raw));
    }
    return static_cast<std::size_t>(raw);
  }
  if (!(scale_max > 1.0)) fail(ErrorKind::kOutOfRange, "rating scale maximum must exceed 1");
  if (raw < 1.0 || raw > scale_max) {
    fail(ErrorKind::kOutOfRange, "rating " + std::to_string(raw) + " outside [1, " + std::to_string(scale_max) + "]");
  }
  return raw > (1.0 + scale_max) / 2.0 ? 1 : 0;
}

}  // namespace esvit
