#pragma once

// Supervised training (Adam + cross-entropy) and classification metrics.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "esvit/model.hpp"

namespace esvit {

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t batch_size = 64;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int precision = 64;  // only 64 is implemented
  std::size_t checkpoint_every = 0;  // epochs; 0 disables intermediate checkpoints

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& doc, const std::string& where = "train");

// Per-parameter first and second moments, allocated on the first step.
struct AdamState {
  std::size_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

// One bias-corrected Adam update in place. Parameters without a gradient are
// treated as having a zero gradient.
void adam_step(const std::vector<Tensor>& params, AdamState& state, const TrainConfig& cfg);

// Mean over rows of -log softmax(logits)[label]. logits: [rows x classes].
Tensor cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels);
Tensor cross_entropy(const Tensor& logits, std::size_t label);

struct MetricsReport {
  std::size_t num_classes = 0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<double> f1;
  std::vector<double> class_accuracy;  // one-vs-rest
  std::vector<std::size_t> support;
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
};

// Undefined ratios (no predictions or no support for a class) count as 0.
MetricsReport metrics_from_confusion(std::vector<std::vector<std::size_t>> confusion);
MetricsReport compute_metrics(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& predicted,
                              std::size_t num_classes);

nlohmann::json to_json(const MetricsReport& report);
std::string confusion_csv(const MetricsReport& report);

struct LabeledImages {
  std::vector<EncodedImage> images;
  std::vector<std::size_t> labels;
  std::size_t num_classes = 2;

  std::size_t size() const { return images.size(); }
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  std::string split;
  double loss = 0.0;
  MetricsReport metrics;
};

std::string epoch_log_header();
std::string epoch_log_line(const EpochRecord& record);

struct TrainResult {
  std::vector<EpochRecord> log;

  std::string epoch_log_csv() const;
};

struct TrainHooks {
  // Called after every epoch once its records are appended.
  std::function<void(std::size_t epoch, const EsVitModel&, const std::vector<EpochRecord>&)> on_epoch;
};

// Trains `model` in place. Training metrics come from the predictions made
// during the epoch, before each batch's update. When `test` is non-empty it is
// evaluated after every epoch.
TrainResult train(EsVitModel& model, const LabeledImages& train_set, const TrainConfig& cfg,
                  const LabeledImages& test = {}, const TrainHooks& hooks = {});

struct Evaluation {
  double loss = 0.0;
  std::vector<std::size_t> predictions;
  MetricsReport metrics;
};

Evaluation evaluate(const EsVitModel& model, const LabeledImages& data);

std::size_t argmax(const Tensor& logits);  // first maximum of a [1 x classes] row

enum class LabelTask { kEmotion, kValence, kArousal, kDominance };

inline constexpr std::size_t kNumEmotions = 7;

LabelTask label_task_from_string(const std::string& name);
const char* to_string(LabelTask task);
std::size_t num_classes(LabelTask task);

// Ratings on [1, scale_max] above the midpoint (1 + scale_max) / 2 are high (1);
// the midpoint itself is low (0). Emotion labels pass through unchanged.
std::size_t binarize_labels(double raw, LabelTask task, double scale_max = 9.0);

}  // namespace esvit
