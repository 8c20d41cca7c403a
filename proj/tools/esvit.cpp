// esvit: command-line front end for the ECG-to-image emotion pipeline.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "esvit/commands.hpp"
#include "esvit/error.hpp"

namespace {

using esvit::ErrorKind;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidConfig: return 2;
    case ErrorKind::kMissingInput: return 3;
    case ErrorKind::kInvariant: return 4;
    default: return 1;
  }
}

esvit::RunConfig resolve_config(const std::string& flag) {
  std::string path = flag;
  if (path.empty()) {
    if (const char* env = std::getenv(esvit::kConfigEnvVar)) path = env;
  }
  return path.empty() ? esvit::RunConfig{} : esvit::load_run_config(path);
}

esvit::SyntheticCorpusSpec load_synth_spec(const std::string& path) {
  if (path.empty()) return esvit::SyntheticCorpusSpec::two_class_default();
  std::ifstream in(path);
  if (!in) esvit::fail(ErrorKind::kMissingInput, "synthetic spec '" + path + "' does not exist");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    esvit::fail(ErrorKind::kInvalidConfig, "synthetic spec '" + path + "' is not valid JSON: " + e.what());
  }
  return esvit::synthetic_corpus_spec_from_json(doc);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ECG emotion recognition: preprocessing, image encoding, ES-ViT training and evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string("esvit ") + esvit::tool_version());
  std::string config;
  bool verbose = false;
  app.add_option("-c,--config", config,
                 std::string("Run configuration JSON (default: $") + esvit::kConfigEnvVar + ")");
  app.add_flag("-v,--verbose", verbose, "Print per-stage details");

  std::string spec_path, out_dir, manifest, preprocessed, checkpoint, subset = "all", inspect_path;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic ECG corpus and its manifest");
  synth->add_option("--spec", spec_path, "Synthetic corpus spec JSON (default: built-in two-class corpus)");
  synth->add_option("-o,--out", out_dir, "Corpus directory")->required();

  auto* preprocess = app.add_subcommand("preprocess", "Baseline removal, band-pass, R-peaks and segmentation");
  preprocess->add_option("manifest", manifest, "Recording manifest CSV")->required();
  preprocess->add_option("-o,--out", out_dir, "Output root")->required();

  auto* encode = app.add_subcommand("encode", "Compose RGB images from preprocessed recordings");
  encode->add_option("preprocessed", preprocessed, "Directory written by `preprocess`")->required();
  encode->add_option("-o,--out", out_dir, "Output root")->required();

  auto* train = app.add_subcommand("train", "Train a model on an image manifest");
  train->add_option("manifest", manifest, "Image manifest CSV")->required();
  train->add_option("-o,--out", out_dir, "Output root")->required();

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on an image manifest");
  eval->add_option("checkpoint", checkpoint, "Checkpoint JSON")->required();
  eval->add_option("manifest", manifest, "Image manifest CSV")->required();
  eval->add_option("-o,--out", out_dir, "Output root")->required();
  eval->add_option("--subset", subset, "all, train or test (split recomputed from the checkpoint)")
      ->check(CLI::IsMember({"all", "train", "test"}));

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference checks of the autograd engine and model");

  auto* inspect = app.add_subcommand("inspect", "Print shapes and statistics of an artifact");
  inspect->add_option("path", inspect_path, "Signal, scalogram, PNG, manifest, checkpoint or config")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) {
      const auto s = esvit::cmd_synth(load_synth_spec(spec_path), out_dir);
      std::cout << "synth: " << s.recordings << " recordings -> " << s.manifest.string() << "\n";
    } else if (preprocess->parsed()) {
      const auto s = esvit::cmd_preprocess(manifest, resolve_config(config), out_dir);
      std::cout << "preprocess: " << s.recordings << " recordings, " << s.peaks << " peaks, " << s.segments
                << " segments, " << s.skipped << " skipped -> " << s.dir.string() << "\n";
    } else if (encode->parsed()) {
      const auto s = esvit::cmd_encode(preprocessed, resolve_config(config), out_dir);
      std::cout << "encode: " << s.images << " images -> " << s.manifest.string() << "\n";
    } else if (train->parsed()) {
      const auto s = esvit::cmd_train(manifest, resolve_config(config), out_dir);
      if (verbose) std::cout << s.result.epoch_log_csv();
      const auto& last = s.result.log.back();
      std::cout << "train: " << s.train_items << " train / " << s.test_items << " test items; epoch " << last.epoch
                << " " << last.split << " accuracy " << last.metrics.accuracy << " -> " << s.checkpoint.string()
                << "\n";
    } else if (eval->parsed()) {
      const auto s = esvit::cmd_eval(checkpoint, manifest, resolve_config(config),
                                     esvit::eval_subset_from_string(subset), out_dir);
      const auto& m = s.evaluation.metrics;
      std::cout << "eval: accuracy " << m.accuracy << ", macro precision " << m.macro_precision << ", recall "
                << m.macro_recall << ", f1 " << m.macro_f1 << " -> " << s.metrics.string() << "\n";
    } else if (gradcheck->parsed()) {
      return esvit::cmd_gradcheck(resolve_config(config), std::cout) ? 0 : 4;
    } else if (inspect->parsed()) {
      esvit::cmd_inspect(inspect_path, std::cout);
    }
  } catch (const esvit::Error& e) {
    std::cerr << "error (" << esvit::to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error (i/o): " << e.what() << "\n";
    return 1;
  }
  return 0;
}
