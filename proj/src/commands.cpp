#include "esvit/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "esvit/checkpoint.hpp"
#include "esvit/error.hpp"
#include "esvit/gradcheck_suite.hpp"

namespace esvit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write '" + path.string() + "'");
  out << text;
  out.close();
  if (!out) fail(ErrorKind::kIo, "failed writing '" + path.string() + "'");
}

void write_json(const fs::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

void stamp(const fs::path& dir, const json& config) {
  write_json(dir / "run_config.json", config);
  write_json(dir / "version.json", {{"tool", "esvit"}, {"version", tool_version()}});
}

std::vector<std::string> lines_of(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorKind::kMissingInput, "'" + path.string() + "' does not exist");
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open '" + path.string() + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::string recording_id(std::size_t index, const RecordingEntry& e) {
  char prefix[16];
  std::snprintf(prefix, sizeof prefix, "r%04zu_", index);
  return prefix + fs::path(e.signal_path).stem().string();
}

struct SegmentRow {
  std::size_t segment_index = 0;
  std::size_t center_index = 0;
  std::size_t start = 0;
  std::size_t end = 0;
};

std::vector<SegmentRow> read_segment_rows(const fs::path& path) {
  const auto lines = lines_of(path);
  if (lines.empty() || lines[0] != "segment_index,center_index,start,end") {
    fail(ErrorKind::kParse, "'" + path.string() + "' is not a segment index");
  }
  std::vector<SegmentRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split_csv_line(lines[i]);
    const std::string where = path.filename().string() + ":" + std::to_string(i + 1);
    if (f.size() != 4) fail(ErrorKind::kParse, where + ": expected 4 fields");
    SegmentRow r;
    r.segment_index = static_cast<std::size_t>(parse_double(f[0], where));
    r.center_index = static_cast<std::size_t>(parse_double(f[1], where));
    r.start = static_cast<std::size_t>(parse_double(f[2], where));
    r.end = static_cast<std::size_t>(parse_double(f[3], where));
    if (r.end <= r.start) fail(ErrorKind::kParse, where + ": empty segment");
    rows.push_back(r);
  }
  return rows;
}

int binarized(double rating, LabelTask task, double scale_max) {
  return static_cast<int>(binarize_labels(rating, task, scale_max));
}

std::size_t label_for(const ImageRecord& r, LabelTask task, const std::string& where) {
  switch (task) {
    case LabelTask::kEmotion:
      if (!r.label_emotion) fail(ErrorKind::kParse, where + ": row has no label_emotion");
      return binarize_labels(*r.label_emotion, task);
    case LabelTask::kValence: return static_cast<std::size_t>(r.label_valence);
    case LabelTask::kArousal: return static_cast<std::size_t>(r.label_arousal);
    case LabelTask::kDominance:
      if (!r.label_dominance) fail(ErrorKind::kParse, where + ": row has no label_dominance");
      return static_cast<std::size_t>(*r.label_dominance);
  }
  return 0;
}

LabeledImages subset(const LabeledImages& all, const std::vector<std::size_t>& idx) {
  LabeledImages out;
  out.num_classes = all.num_classes;
  for (std::size_t i : idx) {
    out.images.push_back(all.images[i]);
    out.labels.push_back(all.labels[i]);
  }
  return out;
}

struct Stats {
  double min = 0.0, max = 0.0, mean = 0.0, std = 0.0;
};

Stats stats_of(const std::vector<double>& v) {
  Stats s;
  if (v.empty()) return s;
  s.min = *std::min_element(v.begin(), v.end());
  s.max = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(v.size()));
  return s;
}

std::string stats_line(const Stats& s) {
  return "min " + fmt("%.6g", s.min) + "  max " + fmt("%.6g", s.max) + "  mean " + fmt("%.6g", s.mean) + "  std " +
         fmt("%.6g", s.std);
}

}  // namespace

// ---- scalogram CSV ------------------------------------------------------------

void write_scalogram_csv(const Scalogram& sg, const fs::path& path) {
  std::string text = "scalogram," + std::to_string(sg.num_scales) + "," + std::to_string(sg.num_samples) + "\n";
  for (std::size_t r = 0; r < sg.num_scales; ++r) {
    text += fmt("%.17g", sg.scale_frequencies_hz[r]);
    for (double v : sg.row(r)) text += "," + fmt("%.17g", v);
    text += "\n";
  }
  write_text(path, text);
}

Scalogram read_scalogram_csv(const fs::path& path) {
  const auto lines = lines_of(path);
  const std::string where = path.filename().string();
  if (lines.empty()) fail(ErrorKind::kParse, "'" + path.string() + "' is empty");
  const auto head = split_csv_line(lines[0]);
  if (head.size() != 3 || head[0] != "scalogram") fail(ErrorKind::kParse, where + ": not a scalogram file");
  Scalogram sg;
  sg.num_scales = static_cast<std::size_t>(parse_double(head[1], where));
  sg.num_samples = static_cast<std::size_t>(parse_double(head[2], where));
  if (lines.size() != sg.num_scales + 1) fail(ErrorKind::kParse, where + ": row count disagrees with the header");
  for (std::size_t r = 0; r < sg.num_scales; ++r) {
    const auto f = split_csv_line(lines[r + 1]);
    if (f.size() != sg.num_samples + 1) fail(ErrorKind::kParse, where + ": ragged row " + std::to_string(r + 2));
    sg.scale_frequencies_hz.push_back(parse_double(f[0], where));
    for (std::size_t c = 0; c < sg.num_samples; ++c) sg.magnitudes.push_back(parse_double(f[c + 1], where));
  }
  sg.source = path.string();
  return sg;
}

// ---- synth --------------------------------------------------------------------

SynthSummary cmd_synth(const SyntheticCorpusSpec& spec, const fs::path& out_dir) {
  const RecordingManifest m = generate_corpus(spec, out_dir);
  write_json(out_dir / "synth_spec.json", to_json(spec));
  write_json(out_dir / "version.json", {{"tool", "esvit"}, {"version", tool_version()}});
  return {m.rows.size(), out_dir / "manifest.csv"};
}

// ---- preprocess ---------------------------------------------------------------

PreprocessSummary cmd_preprocess(const fs::path& manifest_path, const RunConfig& cfg, const fs::path& out_root) {
  cfg.validate();
  const RecordingManifest manifest = read_manifest(manifest_path);
  const PreprocessConfig& pc = cfg.preprocess;
  for (const RecordingEntry& e : manifest.rows) {
    if (pc.bandpass.high_hz >= e.sampling_rate_hz / 2.0) {
      fail(ErrorKind::kInvalidConfig, "preprocess.bandpass.high_hz " + fmt("%g", pc.bandpass.high_hz) +
                                          " Hz is not below Nyquist of '" + e.signal_path + "'");
    }
  }

  PreprocessSummary summary;
  summary.dir = out_root / "preprocessed";
  fs::create_directories(summary.dir / "signals");
  fs::create_directories(summary.dir / "segments");
  RecordingManifest out_manifest;
  out_manifest.base_dir = summary.dir;
  std::string skipped = "recording,peak_index,reason\n";
  json per_recording = json::array();

  for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
    const Recording rec = load_recording(manifest, i);
    const std::string id = recording_id(i, rec.entry);
    const TimeSeries centred = remove_baseline(rec.series, pc.baseline);
    const FilterCoefficients coeffs = design_bandpass(pc.bandpass, centred.sampling_rate_hz);
    const TimeSeries filtered = apply_filter(centred, coeffs);
    const std::size_t min_distance =
        pc.min_peak_distance > 0 ? pc.min_peak_distance : default_min_peak_distance(filtered.sampling_rate_hz);
    const PeakList peaks = detect_r_peaks(filtered, pc.peak_threshold, min_distance);
    const SegmentationResult seg = segment_around_peaks(filtered, peaks, pc.segment_left, pc.segment_right);

    RecordingEntry e = rec.entry;
    e.signal_path = "signals/" + id + ".csv";
    e.duration_s = filtered.duration_s();
    write_signal(filtered, summary.dir / e.signal_path);

    std::string index = "segment_index,center_index,start,end\n";
    for (std::size_t k = 0; k < seg.segments.size(); ++k) {
      const std::size_t c = seg.segments[k].center_index;
      index += std::to_string(k) + "," + std::to_string(c) + "," + std::to_string(c - pc.segment_left) + "," +
               std::to_string(c + pc.segment_right) + "\n";
    }
    write_text(summary.dir / "segments" / (id + ".csv"), index);
    for (std::size_t p : seg.skipped_peaks) {
      skipped += id + "," + std::to_string(p) + "," + (p < pc.segment_left ? "left_boundary" : "right_boundary") + "\n";
    }
    per_recording.push_back({{"id", id},
                             {"source", rec.entry.signal_path},
                             {"peaks", peaks.indices.size()},
                             {"segments", seg.segments.size()},
                             {"skipped", seg.skipped_peaks.size()}});
    out_manifest.rows.push_back(std::move(e));
    summary.peaks += peaks.indices.size();
    summary.segments += seg.segments.size();
    summary.skipped += seg.skipped_peaks.size();
  }
  summary.recordings = out_manifest.rows.size();
  write_manifest(out_manifest, summary.dir / "manifest.csv");
  write_text(summary.dir / "skipped_peaks.csv", skipped);
  write_json(summary.dir / "summary.json", {{"recordings", summary.recordings},
                                            {"peaks", summary.peaks},
                                            {"segments", summary.segments},
                                            {"skipped", summary.skipped},
                                            {"per_recording", per_recording}});
  stamp(summary.dir, to_json(cfg));
  return summary;
}

// ---- encode -------------------------------------------------------------------

EncodeSummary cmd_encode(const fs::path& preprocessed_dir, const RunConfig& cfg, const fs::path& out_root) {
  cfg.validate();
  const RecordingManifest manifest = read_manifest(preprocessed_dir / "manifest.csv");
  const fs::path dir = out_root / "images";
  fs::create_directories(dir / "png");
  fs::create_directories(dir / "scalograms");
  ImageManifest images;
  images.base_dir = dir;

  for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
    const Recording rec = load_recording(manifest, i);
    const std::string id = fs::path(rec.entry.signal_path).stem().string();
    const Scalogram full_sg = cwt_morlet(rec.series, cfg.encode.morlet);
    const PsdEstimate psd = welch_psd(rec.series, cfg.encode.welch);
    write_scalogram_csv(full_sg, dir / "scalograms" / (id + ".scalogram.csv"));

    const RecordingEntry& e = rec.entry;
    for (const SegmentRow& row : read_segment_rows(preprocessed_dir / "segments" / (id + ".csv"))) {
      if (row.end > rec.series.size()) {
        fail(ErrorKind::kParse, "segment " + std::to_string(row.segment_index) + " of '" + id +
                                    "' extends past the signal");
      }
      TimeSeries segment{{rec.series.samples.begin() + static_cast<std::ptrdiff_t>(row.start),
                          rec.series.samples.begin() + static_cast<std::ptrdiff_t>(row.end)},
                         rec.series.sampling_rate_hz,
                         rec.series.source};
      const Scalogram seg_sg = cwt_morlet(segment, cfg.encode.morlet);
      EncodedImage img = compose_rgb(seg_sg, full_sg, psd, cfg.image_hw, cfg.image_hw, cfg.encode.options);

      char name[32];
      std::snprintf(name, sizeof name, "_s%03zu.png", row.segment_index);
      ImageRecord r;
      r.image_path = "png/" + id + name;
      r.subject_id = e.subject_id;
      r.segment_index = row.segment_index;
      r.label_emotion = e.label_emotion;
      r.label_valence = binarized(e.rating_valence, LabelTask::kValence, e.rating_scale_max);
      r.label_arousal = binarized(e.rating_arousal, LabelTask::kArousal, e.rating_scale_max);
      if (e.rating_dominance) r.label_dominance = binarized(*e.rating_dominance, LabelTask::kDominance, e.rating_scale_max);
      write_png(img, dir / r.image_path);
      images.rows.push_back(std::move(r));
    }
  }
  if (images.rows.empty()) fail(ErrorKind::kInvariant, "encode produced no images: no interior R-peaks were found");
  write_image_manifest(images, dir / "manifest.csv");
  write_json(dir / "image_metadata.json",
             {{"channel_layout", kChannelLayout},
              {"height", cfg.image_hw},
              {"width", cfg.image_hw},
              {"log_scale", cfg.encode.options.log_scale},
              {"label_binarization", "rating > (1 + scale_max) / 2 -> 1, otherwise 0"}});
  stamp(dir, to_json(cfg));
  return {images.rows.size(), dir / "manifest.csv"};
}

// ---- train / eval -------------------------------------------------------------

LoadedImages load_labeled_images(const fs::path& image_manifest, LabelTask task) {
  const ImageManifest m = read_image_manifest(image_manifest);
  LoadedImages out;
  out.data.num_classes = num_classes(task);
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    const ImageRecord& r = m.rows[i];
    const std::string where = image_manifest.filename().string() + ":" + std::to_string(i + 2);
    const std::size_t label = label_for(r, task, where);
    if (label >= out.data.num_classes) fail(ErrorKind::kOutOfRange, where + ": label out of range");
    EncodedImage img = read_png(m.resolve(r));
    img.provenance.subject_id = r.subject_id;
    img.provenance.segment_index = r.segment_index;
    img.provenance.label = static_cast<int>(label);
    out.data.images.push_back(std::move(img));
    out.data.labels.push_back(label);
    out.subjects.push_back(r.subject_id);
    out.paths.push_back(r.image_path);
  }
  return out;
}

TrainSummary cmd_train(const fs::path& image_manifest, const RunConfig& cfg, const fs::path& out_root) {
  cfg.validate();
  const LoadedImages all = load_labeled_images(image_manifest, cfg.task);
  const Split split = make_split(all.data.labels, all.subjects, cfg.split);
  const LabeledImages train_set = subset(all.data, split.train);
  const LabeledImages test_set = subset(all.data, split.test);

  const fs::path dir = out_root / "train";
  fs::create_directories(dir);
  std::string split_csv = "image_path,split\n";
  for (std::size_t i : split.train) split_csv += all.paths[i] + ",train\n";
  for (std::size_t i : split.test) split_csv += all.paths[i] + ",test\n";
  write_text(dir / "split.csv", split_csv);

  const json meta_base = {{"task", to_string(cfg.task)},
                          {"tool_version", tool_version()},
                          {"split", to_json(cfg.split)},
                          {"label_binarization", "rating > (1 + scale_max) / 2 -> 1, otherwise 0"}};
  auto checkpoint_of = [&](const EsVitModel& model, std::size_t epoch) {
    Checkpoint ckpt = model.to_checkpoint();
    for (const auto& [k, v] : meta_base.items()) ckpt.metadata[k] = v;
    ckpt.metadata["epoch"] = epoch;
    return ckpt;
  };

  EsVitModel model = EsVitModel::initialize(cfg.model, cfg.seed);
  TrainHooks hooks;
  hooks.on_epoch = [&](std::size_t epoch, const EsVitModel& m, const std::vector<EpochRecord>&) {
    if (cfg.train.checkpoint_every > 0 && epoch % cfg.train.checkpoint_every == 0 && epoch < cfg.train.epochs) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%04zu.json", epoch);
      save_checkpoint(checkpoint_of(m, epoch), dir / "checkpoints" / name);
    }
  };

  TrainSummary summary;
  summary.train_items = train_set.size();
  summary.test_items = test_set.size();
  summary.result = train(model, train_set, cfg.train, test_set, hooks);
  summary.epoch_log = dir / "epoch_log.csv";
  summary.checkpoint = dir / "checkpoint.json";
  write_text(summary.epoch_log, summary.result.epoch_log_csv());
  std::string per_epoch;
  for (const EpochRecord& r : summary.result.log) {
    per_epoch += json{{"epoch", r.epoch}, {"split", r.split}, {"loss", r.loss}, {"metrics", to_json(r.metrics)}}.dump();
    per_epoch += "\n";
  }
  write_text(dir / "epoch_metrics.jsonl", per_epoch);
  save_checkpoint(checkpoint_of(model, cfg.train.epochs), summary.checkpoint);
  write_json(dir / "model_card.json", model_card(model));

  json final_metrics = json::object();
  for (const EpochRecord& r : summary.result.log) {
    if (r.epoch == cfg.train.epochs) final_metrics[r.split] = {{"loss", r.loss}, {"metrics", to_json(r.metrics)}};
  }
  write_json(dir / "final_metrics.json", final_metrics);
  stamp(dir, to_json(cfg));
  return summary;
}

EvalSubset eval_subset_from_string(const std::string& name) {
  if (name == "all") return EvalSubset::kAll;
  if (name == "train") return EvalSubset::kTrain;
  if (name == "test") return EvalSubset::kTest;
  fail(ErrorKind::kInvalidConfig, "unknown evaluation subset '" + name + "' (all|train|test)");
}

EvalSummary cmd_eval(const fs::path& checkpoint, const fs::path& image_manifest, const RunConfig& cfg,
                     EvalSubset which, const fs::path& out_root) {
  cfg.validate();
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const EsVitModel model = EsVitModel::from_checkpoint(ckpt);
  LabelTask task = cfg.task;
  SplitSpec split_spec = cfg.split;
  if (ckpt.metadata.contains("task")) task = label_task_from_string(ckpt.metadata.at("task").get<std::string>());
  if (ckpt.metadata.contains("split")) split_spec = split_spec_from_json(ckpt.metadata.at("split"), "checkpoint.split");

  const LoadedImages all = load_labeled_images(image_manifest, task);
  std::vector<std::size_t> idx;
  const char* subset_name = "all";
  if (which == EvalSubset::kAll) {
    idx.resize(all.data.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  } else {
    const Split split = make_split(all.data.labels, all.subjects, split_spec);
    idx = which == EvalSubset::kTrain ? split.train : split.test;
    subset_name = which == EvalSubset::kTrain ? "train" : "test";
  }
  if (idx.empty()) fail(ErrorKind::kInvalidArgument, std::string("evaluation subset '") + subset_name + "' is empty");
  const LabeledImages data = subset(all.data, idx);

  EvalSummary summary;
  summary.evaluation = evaluate(model, data);
  const fs::path dir = out_root / "eval";
  summary.metrics = dir / "metrics.json";
  write_json(summary.metrics, {{"checkpoint", checkpoint.string()},
                               {"task", to_string(task)},
                               {"subset", subset_name},
                               {"items", data.size()},
                               {"loss", summary.evaluation.loss},
                               {"report", to_json(summary.evaluation.metrics)}});
  write_text(dir / "confusion.csv", confusion_csv(summary.evaluation.metrics));
  std::string preds = "image_path,label,predicted\n";
  for (std::size_t k = 0; k < idx.size(); ++k) {
    preds += all.paths[idx[k]] + "," + std::to_string(data.labels[k]) + "," +
             std::to_string(summary.evaluation.predictions[k]) + "\n";
  }
  write_text(dir / "predictions.csv", preds);
  stamp(dir, to_json(cfg));
  return summary;
}

// ---- gradcheck ----------------------------------------------------------------

bool cmd_gradcheck(const RunConfig& cfg, std::ostream& out) {
  GradSuiteOptions opt;
  opt.seed = cfg.seed;
  std::vector<GradSuiteResult> results = run_primitive_gradchecks(opt);
  ModelConfig tiny = ModelConfig::preset("tiny", true, 2);
  results.push_back(run_model_gradcheck(tiny, opt));
  tiny.fusion_mode = FusionMode::kChannelConcat;
  tiny.name = "tiny-channel";
  results.push_back(run_model_gradcheck(tiny, opt));
  tiny.fusion_enabled = false;
  tiny.name = "tiny";
  results.push_back(run_model_gradcheck(tiny, opt));
  bool ok = true;
  for (const GradSuiteResult& r : results) {
    char line[160];
    std::snprintf(line, sizeof line, "%-4s %-28s max_rel_err %.3e  tol %.0e  coords %zu\n", r.passed ? "ok" : "FAIL",
                  r.name.c_str(), r.max_relative_error, r.tolerance, r.coordinates);
    out << line;
    ok = ok && r.passed;
  }
  return ok;
}

// ---- inspect ------------------------------------------------------------------

void cmd_inspect(const fs::path& path, std::ostream& out) {
  if (!fs::exists(path)) fail(ErrorKind::kMissingInput, "'" + path.string() + "' does not exist");
  if (fs::is_directory(path)) fail(ErrorKind::kInvalidArgument, "'" + path.string() + "' is a directory");
  const std::string ext = path.extension().string();
  const std::string name = path.filename().string();

  if (ext == ".png") {
    const EncodedImage img = read_png(path);
    out << "image " << img.height << " x " << img.width << " x 3\n";
    const char* names[] = {"R", "G", "B"};
    for (std::size_t ch = 0; ch < 3; ++ch) out << "  " << names[ch] << ": " << stats_line(stats_of(img.channel(ch).values)) << "\n";
    return;
  }
  if (ext == ".json") {
    std::ifstream in(path);
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      fail(ErrorKind::kParse, "'" + path.string() + "' is not valid JSON: " + e.what());
    }
    if (doc.is_object() && doc.value("format", "") == "esvit-checkpoint") {
      const Checkpoint ckpt = checkpoint_from_json(doc);
      std::size_t total = 0;
      for (const NamedTensor& p : ckpt.parameters) total += p.tensor.numel();
      out << "checkpoint v" << ckpt.version << ": " << ckpt.parameters.size() << " tensors, " << total
          << " parameters\n";
      if (ckpt.metadata.contains("model_config")) out << "  model " << ckpt.metadata["model_config"].dump() << "\n";
      for (const NamedTensor& p : ckpt.parameters) {
        out << "  " << p.path << " " << autograd::shape_string(p.tensor.shape()) << "\n";
      }
      return;
    }
    if (doc.is_object() && doc.contains("train") && doc.contains("model")) {
      const RunConfig cfg = run_config_from_json(doc);
      out << "run config (valid): task " << to_string(cfg.task) << ", image " << cfg.image_hw << "x" << cfg.image_hw
          << ", model " << cfg.model.name << " (" << count_parameters(cfg.model).total << " parameters), "
          << cfg.train.epochs << " epochs\n";
      return;
    }
    out << "json " << (doc.is_object() ? "object" : "value") << "\n";
    if (doc.is_object()) {
      for (const auto& [k, v] : doc.items()) out << "  " << k << "\n";
    }
    return;
  }
  if (ext == ".f64" || ext == ".bin") {
    const TimeSeries ts = read_signal(path, 1.0, name);
    out << "signal " << ts.size() << " samples\n  " << stats_line(stats_of(ts.samples)) << "\n";
    return;
  }
  if (ext == ".csv" || ext == ".txt") {
    const auto lines = lines_of(path);
    if (lines.empty()) fail(ErrorKind::kParse, "'" + path.string() + "' is empty");
    if (lines[0].rfind("scalogram,", 0) == 0) {
      const Scalogram sg = read_scalogram_csv(path);
      out << "scalogram " << sg.num_scales << " scales x " << sg.num_samples << " samples, "
          << fmt("%.4g", sg.scale_frequencies_hz.front()) << " .. " << fmt("%.4g", sg.scale_frequencies_hz.back())
          << " Hz\n  " << stats_line(stats_of(sg.magnitudes)) << "\n";
      return;
    }
    if (lines[0].rfind("signal_path,", 0) == 0) {
      const RecordingManifest m = read_manifest(path);
      out << "recording manifest: " << m.rows.size() << " recordings\n";
      return;
    }
    if (lines[0].rfind("image_path,subject_id", 0) == 0) {
      const ImageManifest m = read_image_manifest(path);
      std::map<int, std::size_t> valence;
      for (const ImageRecord& r : m.rows) ++valence[r.label_valence];
      out << "image manifest: " << m.rows.size() << " images; valence classes";
      for (const auto& [k, n] : valence) out << " " << k << ":" << n;
      out << "\n";
      return;
    }
    if (lines[0] == epoch_log_header()) {
      out << "epoch log: " << lines.size() - 1 << " records\n";
      if (lines.size() > 1) out << "  last " << lines.back() << "\n";
      return;
    }
    if (lines[0].find(',') == std::string::npos) {
      const TimeSeries ts = read_signal(path, 1.0, name);
      out << "signal " << ts.size() << " samples\n  " << stats_line(stats_of(ts.samples)) << "\n";
      return;
    }
    out << "csv: " << lines.size() << " lines, header " << lines[0] << "\n";
    return;
  }
  fail(ErrorKind::kInvalidArgument, "don't know how to inspect '" + path.string() + "'");
}

}  // namespace esvit
