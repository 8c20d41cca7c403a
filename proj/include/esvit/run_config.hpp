#pragma once

// One JSON document configuring every pipeline stage.
//
// A top-level `seed` seeds weight initialisation and is the default for the
// `train.seed` and `split.seed` fields. `image_hw` fixes both the encoded
// image size and the model input size. Unknown keys are rejected at every
// level.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"

#include "esvit/dataset_io.hpp"
#include "esvit/image_encode.hpp"
#include "esvit/model.hpp"
#include "esvit/signal_core.hpp"
#include "esvit/timefreq.hpp"
#include "esvit/training.hpp"

namespace esvit {

struct PreprocessConfig {
  BaselineSpec baseline;
  BandpassSpec bandpass;
  double peak_threshold = 0.5;
  std::size_t min_peak_distance = 0;  // 0 selects round(0.4 * fs)
  std::size_t segment_left = 100;
  std::size_t segment_right = 100;
};

struct EncodeConfig {
  MorletSpec morlet;
  WelchSpec welch;
  EncodeOptions options;
};

struct RunConfig {
  std::uint64_t seed = 0;
  LabelTask task = LabelTask::kValence;
  std::size_t image_hw = 224;
  PreprocessConfig preprocess;
  EncodeConfig encode;
  ModelConfig model;
  TrainConfig train;
  SplitSpec split;

  RunConfig();

  // Cross-field checks; throws kInvalidConfig naming the offending field.
  void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);

// Environment variable naming the config used when no --config is given.
inline constexpr const char* kConfigEnvVar = "ESVIT_CONFIG";

const char* tool_version();

}  // namespace esvit
