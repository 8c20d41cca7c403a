#pragma once

// Pipeline stages behind the `esvit` command-line tool.
//
// Every stage writes into its own subdirectory of an output root:
//   <out>/preprocessed/  filtered signals, per-recording segment indices, skipped-peak report
//   <out>/images/        PNGs and the image manifest
//   <out>/train/         epoch log, per-epoch metrics, checkpoints, model card
//   <out>/eval/          metrics JSON, confusion matrix, predictions
// together with the resolved run_config.json and a version.json stamp.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "esvit/dataset_io.hpp"
#include "esvit/run_config.hpp"
#include "esvit/training.hpp"

namespace esvit {

struct SynthSummary {
  std::size_t recordings = 0;
  std::filesystem::path manifest;
};

// Writes the corpus directly into `out_dir`.
SynthSummary cmd_synth(const SyntheticCorpusSpec& spec, const std::filesystem::path& out_dir);

struct PreprocessSummary {
  std::size_t recordings = 0;
  std::size_t peaks = 0;
  std::size_t segments = 0;
  std::size_t skipped = 0;
  std::filesystem::path dir;
};

PreprocessSummary cmd_preprocess(const std::filesystem::path& manifest, const RunConfig& cfg,
                                 const std::filesystem::path& out_root);

struct EncodeSummary {
  std::size_t images = 0;
  std::filesystem::path manifest;
};

EncodeSummary cmd_encode(const std::filesystem::path& preprocessed_dir, const RunConfig& cfg,
                         const std::filesystem::path& out_root);

// Images and labels for `cfg.task` read from an image manifest.
struct LoadedImages {
  LabeledImages data;
  std::vector<std::string> subjects;
  std::vector<std::string> paths;
};

LoadedImages load_labeled_images(const std::filesystem::path& image_manifest, LabelTask task);

struct TrainSummary {
  TrainResult result;
  std::size_t train_items = 0;
  std::size_t test_items = 0;
  std::filesystem::path checkpoint;
  std::filesystem::path epoch_log;
};

TrainSummary cmd_train(const std::filesystem::path& image_manifest, const RunConfig& cfg,
                       const std::filesystem::path& out_root);

enum class EvalSubset { kAll, kTrain, kTest };

EvalSubset eval_subset_from_string(const std::string& name);

struct EvalSummary {
  Evaluation evaluation;
  std::filesystem::path metrics;
};

// The train/test subsets are recomputed from cfg.split, so they match cmd_train.
EvalSummary cmd_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& image_manifest,
                     const RunConfig& cfg, EvalSubset subset, const std::filesystem::path& out_root);

// Prints one line per check; returns true when all pass.
bool cmd_gradcheck(const RunConfig& cfg, std::ostream& out);

// Prints shapes and summary statistics of a signal, scalogram, image,
// manifest, checkpoint or config file.
void cmd_inspect(const std::filesystem::path& path, std::ostream& out);

// Scalogram CSV: header `scalogram,<rows>,<cols>`, then one `frequency_hz,magnitudes...` row per scale.
void write_scalogram_csv(const Scalogram& sg, const std::filesystem::path& path);
Scalogram read_scalogram_csv(const std::filesystem::path& path);

}  // namespace esvit
