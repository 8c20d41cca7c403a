#include "esvit/run_config.hpp"

#include <fstream>
#include <sstream>

#include "esvit/error.hpp"
#include "esvit/json_util.hpp"

#ifndef ESVIT_VERSION
#define ESVIT_VERSION "0.0.0"
#endif

namespace esvit {

using nlohmann::json;

const char* tool_version() { return ESVIT_VERSION; }

namespace {

void config_check(bool ok, const std::string& msg) {
  if (!ok) fail(ErrorKind::kInvalidConfig, msg);
}

json preprocess_to_json(const PreprocessConfig& p) {
  return {{"baseline", {{"window_s", p.baseline.window_s}, {"discard_window", p.baseline.discard_window}}},
          {"bandpass",
           {{"order", p.bandpass.order},
            {"low_hz", p.bandpass.low_hz},
            {"high_hz", p.bandpass.high_hz},
            {"order_semantics", p.bandpass.semantics == OrderSemantics::kPrototype ? "prototype" : "total"}}},
          {"peak_threshold", p.peak_threshold},
          {"min_peak_distance", p.min_peak_distance},
          {"segment_left", p.segment_left},
          {"segment_right", p.segment_right}};
}

PreprocessConfig preprocess_from_json(const json& doc, const std::string& where) {
  using namespace jsonutil;
  reject_unknown_keys(doc,
                      {"baseline", "bandpass", "peak_threshold", "min_peak_distance", "segment_left",
                       "segment_right"},
                      where);
  PreprocessConfig p;
  if (doc.contains("baseline")) {
    const json& b = doc.at("baseline");
    const std::string w = where + ".baseline";
    reject_unknown_keys(b, {"window_s", "discard_window"}, w);
    read(b, "window_s", p.baseline.window_s, w);
    read(b, "discard_window", p.baseline.discard_window, w);
  }
  if (doc.contains("bandpass")) {
    const json& b = doc.at("bandpass");
    const std::string w = where + ".bandpass";
    reject_unknown_keys(b, {"order", "low_hz", "high_hz", "order_semantics"}, w);
    read(b, "order", p.bandpass.order, w);
    read(b, "low_hz", p.bandpass.low_hz, w);
    read(b, "high_hz", p.bandpass.high_hz, w);
    std::string sem = "prototype";
    read(b, "order_semantics", sem, w);
    if (sem == "prototype") {
      p.bandpass.semantics = OrderSemantics::kPrototype;
    } else if (sem == "total") {
      p.bandpass.semantics = OrderSemantics::kTotal;
    } else {
      fail(ErrorKind::kInvalidConfig, w + ".order_semantics: expected prototype or total");
    }
  }
  read(doc, "peak_threshold", p.peak_threshold, where);
  read(doc, "min_peak_distance", p.min_peak_distance, where);
  read(doc, "segment_left", p.segment_left, where);
  read(doc, "segment_right", p.segment_right, where);
  return p;
}

json encode_to_json(const EncodeConfig& e) {
  return {{"morlet",
           {{"num_scales", e.morlet.num_scales},
            {"center_frequency_cycles", e.morlet.center_frequency_cycles},
            {"freq_min_hz", e.morlet.freq_min_hz},
            {"freq_max_hz", e.morlet.freq_max_hz}}},
          {"welch",
           {{"segment_length", e.welch.segment_length},
            {"overlap_fraction", e.welch.overlap_fraction},
            {"window", e.welch.window == WindowKind::kHann ? "hann" : "rectangular"}}},
          {"log_scale", e.options.log_scale},
          {"interpolation", e.options.interpolation == Interpolation::kBilinear ? "bilinear" : "nearest"}};
}

EncodeConfig encode_from_json(const json& doc, const std::string& where) {
  using namespace jsonutil;
  reject_unknown_keys(doc, {"morlet", "welch", "log_scale", "interpolation"}, where);
  EncodeConfig e;
  if (doc.contains("morlet")) {
    const json& m = doc.at("morlet");
    const std::string w = where + ".morlet";
    reject_unknown_keys(m, {"num_scales", "center_frequency_cycles", "freq_min_hz", "freq_max_hz"}, w);
    read(m, "num_scales", e.morlet.num_scales, w);
    read(m, "center_frequency_cycles", e.morlet.center_frequency_cycles, w);
    read(m, "freq_min_hz", e.morlet.freq_min_hz, w);
    read(m, "freq_max_hz", e.morlet.freq_max_hz, w);
  }
  if (doc.contains("welch")) {
    const json& wj = doc.at("welch");
    const std::string w = where + ".welch";
    reject_unknown_keys(wj, {"segment_length", "overlap_fraction", "window"}, w);
    read(wj, "segment_length", e.welch.segment_length, w);
    read(wj, "overlap_fraction", e.welch.overlap_fraction, w);
    std::string window = "hann";
    read(wj, "window", window, w);
    if (window == "hann") {
      e.welch.window = WindowKind::kHann;
    } else if (window == "rectangular") {
      e.welch.window = WindowKind::kRectangular;
    } else {
      fail(ErrorKind::kInvalidConfig, w + ".window: expected hann or rectangular");
    }
  }
  read(doc, "log_scale", e.options.log_scale, where);
  std::string interp = "bilinear";
  read(doc, "interpolation", interp, where);
  if (interp == "bilinear") {
    e.options.interpolation = Interpolation::kBilinear;
  } else if (interp == "nearest") {
    e.options.interpolation = Interpolation::kNearest;
  } else {
    fail(ErrorKind::kInvalidConfig, where + ".interpolation: expected bilinear or nearest");
  }
  return e;
}

}  // namespace

RunConfig::RunConfig() {
  model.image_hw = image_hw;
  model.patch_size = 16;
  model.num_classes = num_classes(task);
}

void RunConfig::validate() const {
  const PreprocessConfig& p = preprocess;
  config_check(p.baseline.window_s > 0.0, "preprocess.baseline.window_s must be positive");
  config_check(p.bandpass.order >= 1, "preprocess.bandpass.order must be >= 1");
  config_check(p.bandpass.semantics == OrderSemantics::kPrototype || p.bandpass.order % 2 == 0,
               "preprocess.bandpass.order must be even when order_semantics is total");
  config_check(p.bandpass.low_hz > 0.0 && p.bandpass.low_hz < p.bandpass.high_hz,
               "preprocess.bandpass requires 0 < low_hz < high_hz");
  config_check(p.peak_threshold > 0.0 && p.peak_threshold <= 1.0, "preprocess.peak_threshold must lie in (0, 1]");
  config_check(p.segment_left + p.segment_right >= 8, "preprocess: segments must span at least 8 samples");

  const EncodeConfig& e = encode;
  config_check(e.morlet.num_scales >= 2, "encode.morlet.num_scales must be >= 2");
  config_check(e.morlet.center_frequency_cycles > 0.0, "encode.morlet.center_frequency_cycles must be positive");
  config_check(e.morlet.freq_min_hz > 0.0 && e.morlet.freq_min_hz < e.morlet.freq_max_hz,
               "encode.morlet requires 0 < freq_min_hz < freq_max_hz");
  config_check(e.welch.segment_length >= 2, "encode.welch.segment_length must be >= 2");
  config_check(e.welch.overlap_fraction >= 0.0 && e.welch.overlap_fraction < 1.0,
               "encode.welch.overlap_fraction must lie in [0, 1)");

  config_check(image_hw >= 1, "image_hw must be >= 1");
  config_check(model.image_hw == image_hw, "model.image_hw must equal image_hw");
  config_check(model.num_classes == num_classes(task),
               "model.num_classes must be " + std::to_string(num_classes(task)) + " for task " + to_string(task));
  model.validate();
  train.validate();
  split.validate();
}

json to_json(const RunConfig& c) {
  return {{"seed", c.seed},
          {"task", to_string(c.task)},
          {"image_hw", c.image_hw},
          {"preprocess", preprocess_to_json(c.preprocess)},
          {"encode", encode_to_json(c.encode)},
          {"model", to_json(c.model)},
          {"train", to_json(c.train)},
          {"split", to_json(c.split)}};
}

RunConfig run_config_from_json(const json& doc) {
  using namespace jsonutil;
  const std::string where = "config";
  reject_unknown_keys(doc, {"seed", "task", "image_hw", "preprocess", "encode", "model", "train", "split"}, where);
  RunConfig c;
  read(doc, "seed", c.seed, where);
  std::string task = to_string(c.task);
  read(doc, "task", task, where);
  c.task = label_task_from_string(task);
  read(doc, "image_hw", c.image_hw, where);
  if (doc.contains("preprocess")) c.preprocess = preprocess_from_json(doc.at("preprocess"), where + ".preprocess");
  if (doc.contains("encode")) c.encode = encode_from_json(doc.at("encode"), where + ".encode");

  json model = doc.contains("model") ? doc.at("model") : json::object();
  expect_object(model, where + ".model");
  if (!model.contains("preset") && !model.contains("patch_size")) model["patch_size"] = c.model.patch_size;
  if (!model.contains("image_hw")) model["image_hw"] = c.image_hw;
  if (!model.contains("num_classes")) model["num_classes"] = num_classes(c.task);
  c.model = model_config_from_json(model, where + ".model");

  json train = doc.contains("train") ? doc.at("train") : json::object();
  expect_object(train, where + ".train");
  if (!train.contains("seed")) train["seed"] = c.seed;
  c.train = train_config_from_json(train, where + ".train");

  json split = doc.contains("split") ? doc.at("split") : json::object();
  expect_object(split, where + ".split");
  if (!split.contains("seed")) split["seed"] = c.seed;
  c.split = split_spec_from_json(split, where + ".split");

  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorKind::kMissingInput, "config '" + path.string() + "' does not exist");
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open config '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kInvalidConfig, "config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return run_config_from_json(doc);
}

}  // namespace esvit
