// Acceptance suite: one PASS/FAIL line per criterion, tolerances fixed below.
// Usage: esvit_acceptance [work_dir]

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "esvit/commands.hpp"
#include "esvit/dataset_io.hpp"
#include "esvit/error.hpp"
#include "esvit/gradcheck_suite.hpp"
#include "esvit/model.hpp"
#include "esvit/random.hpp"
#include "esvit/signal_core.hpp"
#include "esvit/timefreq.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace esvit;

namespace {

// ---- pinned tolerances ------------------------------------------------------

constexpr double kPrimitiveGradTol = 1e-4;
constexpr double kModelGradTol = 1e-3;
constexpr std::size_t kModelGradCoordinates = 50;
constexpr double kGradBudgetS = 60.0;

constexpr std::size_t kFilterProbes = 20;
constexpr double kFilterProbeTolDb = 0.5;
constexpr double kCutoffTolDb = 0.5;
constexpr double kStopband50HzDb = 30.0;

constexpr double kRidgeFraction = 0.99;
constexpr double kRidgeBudgetS = 30.0;

constexpr std::size_t kWelchDraws = 30;
constexpr double kWelchRelTol = 0.10;

constexpr double kBeatRecovery = 0.95;
constexpr std::size_t kBeatTolSamples = 3;

constexpr std::size_t kAblationImages = 10;
constexpr double kAblationTol = 1e-12;

constexpr double kVitB16Reference = 86.6e6;
constexpr double kVitB16RelTol = 0.02;
constexpr double kReportedEsvitDelta = 0.18e6;

constexpr std::size_t kOverfitPerClass = 32;
constexpr std::size_t kOverfitMaxEpochs = 200;
constexpr double kOverfitLr = 0.001;
constexpr double kOverfitBudgetS = 300.0;

constexpr double kMetricsTol = 1e-12;

constexpr double kPi = std::numbers::pi;

// ---- helpers -----------------------------------------------------------------

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

std::string fmt(const char* pattern, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* pattern, ...) {
  char buf[512];
  va_list args;
  va_start(args, pattern);
  std::vsnprintf(buf, sizeof buf, pattern, args);
  va_end(args);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(line);
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  return out;
}

// Analog Butterworth band-pass |H|^2 in dB at the bilinear pre-warped frequency.
double butterworth_db(double f, double lo, double hi, int order, double fs) {
  auto warp = [fs](double hz) { return 2.0 * fs * std::tan(kPi * hz / fs); };
  const double w = warp(f), wl = warp(lo), wh = warp(hi);
  const double x = (w * w - wl * wh) / (w * (wh - wl));
  return -10.0 * std::log10(1.0 + std::pow(x * x, order));
}

// Macro precision, recall and F1 from a [true][pred] confusion matrix; empty ratios count as 0.
struct Macro {
  double precision = 0.0, recall = 0.0, f1 = 0.0, accuracy = 0.0;
};

Macro macro_from_confusion(const std::vector<std::vector<std::size_t>>& cm) {
  const std::size_t k = cm.size();
  Macro m;
  double total = 0.0, diag = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    double row = 0.0, col = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      row += static_cast<double>(cm[c][j]);
      col += static_cast<double>(cm[j][c]);
      total += static_cast<double>(cm[c][j]);
    }
    const double tp = static_cast<double>(cm[c][c]);
    diag += tp;
    const double p = col > 0.0 ? tp / col : 0.0;
    const double r = row > 0.0 ? tp / row : 0.0;
    m.precision += p;
    m.recall += r;
    m.f1 += (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
  }
  m.precision /= static_cast<double>(k);
  m.recall /= static_cast<double>(k);
  m.f1 /= static_cast<double>(k);
  m.accuracy = total > 0.0 ? diag / total : 0.0;
  return m;
}

// Closed-form parameter count written out from the architecture description.
std::size_t hand_count(const ModelConfig& c) {
  const std::size_t d = c.hidden_size, mlp = c.mlp_size, p = c.patch_size;
  const std::size_t patches = (c.image_hw / p) * (c.image_hw / p);
  std::size_t n = 0;
  n += p * p * 3 * d + d;   // patch projection
  n += d;                   // class token
  n += (patches + 1) * d;   // positions
  std::size_t layer = 2 * (2 * d) + 4 * (d * d + d) + (d * mlp + mlp) + (mlp * d + d);
  if (c.fusion_enabled && c.fusion_mode == FusionMode::kChannelConcat) layer += 2 * d * d + d;
  n += c.num_layers * layer;
  n += 2 * d;                               // final norm
  n += d * c.num_classes + c.num_classes;   // head
  if (c.fusion_enabled) {
    std::size_t in = 3;
    std::vector<std::size_t> widths = c.conv_channels;
    widths.push_back(d);
    for (std::size_t out : widths) {
      n += out * in * 9 + (c.conv_bias ? out : 0);
      in = out;
    }
    const std::size_t h = std::max<std::size_t>(1, d / c.se_reduction);
    n += d * h + h + h * d + d;
  }
  return n;
}

// ---- criteria ----------------------------------------------------------------

Outcome criterion1() {
  Timer t;
  GradSuiteOptions opt;
  opt.primitive_tolerance = kPrimitiveGradTol;
  opt.model_tolerance = kModelGradTol;
  opt.model_coordinates = kModelGradCoordinates;
  const auto prims = run_primitive_gradchecks(opt);
  bool ok = !prims.empty();
  double worst_prim = 0.0;
  std::string worst_name;
  for (const auto& r : prims) {
    ok = ok && r.passed && r.max_relative_error < kPrimitiveGradTol;
    if (r.max_relative_error >= worst_prim) {
      worst_prim = r.max_relative_error;
      worst_name = r.name;
    }
  }
  ModelConfig tiny;  // 2 layers, hidden 16, 32x32 images, patch 8
  tiny.num_layers = 2;
  tiny.hidden_size = 16;
  tiny.image_hw = 32;
  tiny.patch_size = 8;
  double worst_model = 0.0;
  for (FusionMode mode : {FusionMode::kTokenAppend, FusionMode::kChannelConcat}) {
    tiny.fusion_mode = mode;
    const GradSuiteResult r = run_model_gradcheck(tiny, opt);
    ok = ok && r.passed && r.max_relative_error < kModelGradTol && r.coordinates == kModelGradCoordinates;
    worst_model = std::max(worst_model, r.max_relative_error);
  }
  const double s = t.seconds();
  ok = ok && s < kGradBudgetS;
  return {ok, fmt("%zu primitives, worst %.2e (%s) < %.0e; tiny ES-ViT worst %.2e < %.0e over %zu coords; %.1f s < %.0f s",
                  prims.size(), worst_prim, worst_name.c_str(), kPrimitiveGradTol, worst_model, kModelGradTol,
                  kModelGradCoordinates, s, kGradBudgetS)};
}

Outcome criterion2() {
  const double fs = 128.0;
  BandpassSpec spec;  // prototype order 2, 0.5 to 15 Hz
  const FilterCoefficients c = design_bandpass(spec, fs);
  double worst = 0.0;
  for (std::size_t i = 0; i < kFilterProbes; ++i) {
    const double f = 0.1 * std::pow(60.0 / 0.1, static_cast<double>(i) / static_cast<double>(kFilterProbes - 1));
    const double got = 20.0 * std::log10(magnitude_response(c, f, fs));
    worst = std::max(worst, std::abs(got - butterworth_db(f, spec.low_hz, spec.high_hz, spec.order, fs)));
  }
  const double lo_db = 20.0 * std::log10(magnitude_response(c, 0.5, fs));
  const double hi_db = 20.0 * std::log10(magnitude_response(c, 15.0, fs));

  const std::size_t n = 128 * 20;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(2.0 * kPi * 50.0 * static_cast<double>(i) / fs);
  const TimeSeries y = apply_filter({x, fs, "probe"}, c);
  double ein = 0.0, eout = 0.0;
  for (std::size_t i = n / 4; i < 3 * n / 4; ++i) {
    ein += x[i] * x[i];
    eout += y.samples[i] * y.samples[i];
  }
  const double atten = 10.0 * std::log10(ein / eout);
  const bool ok = worst <= kFilterProbeTolDb && std::abs(lo_db + 3.0103) <= kCutoffTolDb &&
                  std::abs(hi_db + 3.0103) <= kCutoffTolDb && atten >= kStopband50HzDb && is_stable(c);
  return {ok, fmt("%zu probes worst %.2e dB <= %.1f; -3 dB points %.3f / %.3f dB (+/-%.1f); 50 Hz zero-phase %.1f dB >= %.0f",
                  kFilterProbes, worst, kFilterProbeTolDb, lo_db, hi_db, kCutoffTolDb, atten, kStopband50HzDb)};
}

Outcome criterion3() {
  Timer t;
  const double fs = 128.0;
  const MorletSpec spec;  // 50 scales, 0.5 to 20 Hz
  bool ok = spec.num_scales == 50;
  std::string detail;
  for (double f0 : {2.0, 5.0, 10.0}) {
    std::vector<double> x(1280);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(2.0 * kPi * f0 * static_cast<double>(i) / fs);
    const Scalogram sg = cwt_morlet({x, fs, "tone"}, spec);
    std::size_t want = 0;
    for (std::size_t r = 1; r < sg.num_scales; ++r)
      if (std::abs(std::log(sg.scale_frequencies_hz[r] / f0)) < std::abs(std::log(sg.scale_frequencies_hz[want] / f0)))
        want = r;
    // Interior: two wavelet scales (in samples) away from either end.
    const auto margin = static_cast<std::size_t>(std::ceil(2.0 * sg.scales_s[want] * fs));
    std::size_t hit = 0, total = 0;
    for (std::size_t col = margin; col + margin < sg.num_samples; ++col) {
      std::size_t best = 0;
      for (std::size_t r = 1; r < sg.num_scales; ++r)
        if (sg.at(r, col) > sg.at(best, col)) best = r;
      ++total;
      if ((best > want ? best - want : want - best) <= 1) ++hit;
    }
    const double frac = total ? static_cast<double>(hit) / static_cast<double>(total) : 0.0;
    ok = ok && frac >= kRidgeFraction;
    detail += fmt("%g Hz %.4f; ", f0, frac);
  }
  const double s = t.seconds();
  ok = ok && s < kRidgeBudgetS;
  return {ok, detail + fmt("need >= %.2f within one bin; %.2f s < %.0f s", kRidgeFraction, s, kRidgeBudgetS)};
}

Outcome criterion4() {
  const double fs = 128.0;
  const std::size_t n = static_cast<std::size_t>(39.0 * fs);
  double worst = 0.0;
  for (std::size_t d = 0; d < kWelchDraws; ++d) {
    std::mt19937_64 rng(1000 + d);
    std::normal_distribution<double> nd;
    std::vector<double> x(n);
    for (double& v : x) v = nd(rng);
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    const PsdEstimate p = welch_psd({x, fs, "noise"}, {});
    double total = 0.0;
    const double df = p.frequencies_hz[1] - p.frequencies_hz[0];
    for (double v : p.power) total += v * df;
    worst = std::max(worst, std::abs(total / var - 1.0));
  }
  return {worst <= kWelchRelTol,
          fmt("%zu draws, worst |sum(P df)/var - 1| = %.4f <= %.2f", kWelchDraws, worst, kWelchRelTol)};
}

Outcome criterion5(const fs::path& work) {
  SyntheticCorpusSpec spec = SyntheticCorpusSpec::two_class_default();
  spec.ecg.heart_rate_bpm = 60.0;
  spec.ecg.noise_std = 0.0;
  spec.recordings_per_class = 2;
  const SynthSummary synth = cmd_synth(spec, work / "c5_corpus");
  const PreprocessSummary pre = cmd_preprocess(synth.manifest, RunConfig{}, work / "c5_run");

  std::map<std::string, std::vector<std::size_t>> planted;
  {
    const auto rows = lines_of(work / "c5_corpus" / "beats.csv");
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const auto cols = split(rows[i], ',');
      std::vector<std::size_t> idx;
      for (const auto& tok : split(cols.at(1), ' '))
        if (!tok.empty()) idx.push_back(std::stoul(tok));
      planted[cols[0]] = idx;
    }
  }
  const json summary = json::parse(slurp(pre.dir / "summary.json"));
  std::map<std::string, std::vector<std::size_t>> skipped;
  {
    const auto rows = lines_of(pre.dir / "skipped_peaks.csv");
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const auto cols = split(rows[i], ',');
      skipped[cols.at(0)].push_back(std::stoul(cols.at(1)));
    }
  }
  bool conserved = pre.segments + pre.skipped == pre.peaks;
  std::size_t recovered = 0, total = 0;
  for (const json& rec : summary.at("per_recording")) {
    const std::string id = rec.at("id");
    std::vector<std::size_t> detected = skipped[id];
    const auto seg_rows = lines_of(pre.dir / "segments" / (id + ".csv"));
    for (std::size_t i = 1; i < seg_rows.size(); ++i) detected.push_back(std::stoul(split(seg_rows[i], ',').at(1)));
    const std::size_t peaks = rec.at("peaks");
    conserved = conserved && detected.size() == peaks && rec.at("segments").get<std::size_t>() == seg_rows.size() - 1 &&
                rec.at("segments").get<std::size_t>() + rec.at("skipped").get<std::size_t>() == peaks;
    for (std::size_t b : planted.at(rec.at("source").get<std::string>())) {
      ++total;
      const bool found = std::any_of(detected.begin(), detected.end(), [b](std::size_t p) {
        return (p > b ? p - b : b - p) <= kBeatTolSamples;
      });
      if (found) ++recovered;
    }
  }
  const double frac = total ? static_cast<double>(recovered) / static_cast<double>(total) : 0.0;
  return {conserved && frac >= kBeatRecovery,
          fmt("recovered %zu/%zu planted beats (%.4f >= %.2f) within +/-%zu samples; segments %zu + skipped %zu %s peaks %zu",
              recovered, total, frac, kBeatRecovery, kBeatTolSamples, pre.segments, pre.skipped,
              conserved ? "==" : "!=", pre.peaks)};
}

Outcome criterion6() {
  ModelConfig with;  // tiny ES-ViT
  EsVitModel es = EsVitModel::initialize(with, 11);
  Rng rng(12);
  for (NamedTensor& p : es.parameters()) {
    const bool gain = p.path.size() > 5 && p.path.substr(p.path.size() - 5) == ".gain";
    for (double& v : p.tensor.mutable_data()) v = (gain ? 1.0 : 0.0) + 0.3 * rng.normal();
  }
  ModelConfig without = with;
  without.fusion_enabled = false;
  EsVitModel ablated = EsVitModel::initialize(without, 99);
  // Share every weight the ablated model has.
  const auto source = es.parameters();
  for (NamedTensor& p : ablated.parameters()) {
    const auto it = std::find_if(source.begin(), source.end(), [&](const NamedTensor& s) { return s.path == p.path; });
    if (it == source.end()) return {false, "ablated model has a parameter the full model lacks: " + p.path};
    std::copy(it->tensor.data().begin(), it->tensor.data().end(), p.tensor.mutable_data().begin());
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < kAblationImages; ++i) {
    std::vector<double> px(32 * 32 * 3);
    for (double& v : px) v = rng.uniform();
    const Tensor img = Tensor::from_data({32, 32, 3}, px);
    const Tensor a = forward(img, ablated);
    const Tensor b = forward_plain(img, es);
    for (std::size_t k = 0; k < a.numel(); ++k) worst = std::max(worst, std::abs(a.at(k) - b.at(k)));
  }
  return {worst <= kAblationTol,
          fmt("%zu images, max |delta logit| = %.3e <= %.0e", kAblationImages, worst, kAblationTol)};
}

Outcome criterion7() {
  const ModelConfig tiny = ModelConfig::preset("tiny", true, 2);
  const std::size_t hand = hand_count(tiny);
  const std::size_t closed = count_parameters(tiny).total;
  std::size_t enumerated = 0;
  for (const NamedTensor& p : EsVitModel::initialize(tiny, 0).parameters()) enumerated += p.tensor.numel();
  const bool tiny_ok = hand == closed && closed == enumerated;

  const ModelConfig b16 = ModelConfig::preset("B/16", false, 2);
  const ModelConfig b16_es = ModelConfig::preset("B/16", true, 2);
  const auto plain = static_cast<double>(count_parameters(b16).total);
  const auto es = static_cast<double>(count_parameters(b16_es).total);
  const bool b16_ok = std::abs(plain - kVitB16Reference) <= kVitB16RelTol * kVitB16Reference &&
                      hand_count(b16) == count_parameters(b16).total && hand_count(b16_es) == count_parameters(b16_es).total;
  const double delta = es - plain;
  return {tiny_ok && b16_ok,
          fmt("tiny %zu (hand %zu, enumerated %zu); ViT-B/16 %.4gM vs %.1fM (%.2f%% <= %.0f%%); ES-ViT delta %.4gM "
              "vs reported %.2fM (ratio %.2f)",
              closed, hand, enumerated, plain / 1e6, kVitB16Reference / 1e6,
              100.0 * std::abs(plain - kVitB16Reference) / kVitB16Reference, 100.0 * kVitB16RelTol, delta / 1e6,
              kReportedEsvitDelta / 1e6, delta / kReportedEsvitDelta)};
}

// Shared corpus and training runs for criteria 8 to 10.
struct OverfitRun {
  TrainSummary summary;
  fs::path dir;
  double seconds = 0.0;
  std::size_t first_perfect_epoch = 0;  // 0 when never reached
};

struct OverfitData {
  fs::path preprocessed;
  fs::path images_dir;
  fs::path manifest;  // trimmed, 32 per class
  std::size_t per_class[2] = {0, 0};
  RunConfig cfg;
};

RunConfig overfit_config(bool fusion) {
  RunConfig cfg = run_config_from_json(json{
      {"seed", 1},
      {"task", "valence"},
      {"image_hw", 32},
      {"model", {{"patch_size", 8}, {"fusion_enabled", fusion}}},
      {"train", {{"epochs", kOverfitMaxEpochs}, {"batch_size", 16}, {"learning_rate", kOverfitLr}}},
      {"split", {{"train_fraction", 1.0}}}});
  return cfg;
}

OverfitData build_overfit_corpus(const fs::path& work) {
  OverfitData d;
  d.cfg = overfit_config(true);
  SyntheticCorpusSpec spec = SyntheticCorpusSpec::two_class_default();
  spec.recordings_per_class = 1;
  spec.ecg.amplitude_jitter = 0.05;
  spec.seed = 3;
  const SynthSummary synth = cmd_synth(spec, work / "c8_corpus");
  d.preprocessed = cmd_preprocess(synth.manifest, d.cfg, work / "c8_run").dir;
  const EncodeSummary enc = cmd_encode(d.preprocessed, d.cfg, work / "c8_run");
  d.images_dir = enc.manifest.parent_path();
  const ImageManifest all = read_image_manifest(enc.manifest);
  ImageManifest trimmed;
  trimmed.base_dir = all.base_dir;
  for (const ImageRecord& r : all.rows) {
    const auto label = static_cast<std::size_t>(r.label_valence);
    if (d.per_class[label] < kOverfitPerClass) {
      trimmed.rows.push_back(r);
      ++d.per_class[label];
    }
  }
  d.manifest = d.images_dir / "manifest_64.csv";
  write_image_manifest(trimmed, d.manifest);
  return d;
}

OverfitRun run_overfit(const OverfitData& d, bool fusion, const fs::path& out) {
  OverfitRun r;
  r.dir = out / "train";
  Timer t;
  r.summary = cmd_train(d.manifest, overfit_config(fusion), out);
  r.seconds = t.seconds();
  for (const EpochRecord& e : r.summary.result.log) {
    if (e.split == "train" && e.metrics.accuracy == 1.0) {
      r.first_perfect_epoch = e.epoch;
      break;
    }
  }
  return r;
}

Outcome criterion8(const OverfitData& d, const OverfitRun& es, const OverfitRun& plain, double eval_accuracy) {
  const bool sized = d.per_class[0] == kOverfitPerClass && d.per_class[1] == kOverfitPerClass &&
                     es.summary.train_items == 2 * kOverfitPerClass;
  const bool ok = sized && es.first_perfect_epoch > 0 && plain.first_perfect_epoch > 0 &&
                  es.seconds < kOverfitBudgetS && plain.seconds < kOverfitBudgetS && eval_accuracy == 1.0;
  return {ok, fmt("%zu+%zu images; ES-ViT 100%% train accuracy at epoch %zu (%.1f s), fusion disabled at epoch %zu "
                  "(%.1f s), limit %zu epochs / %.0f s, lr %g; final checkpoint train-split accuracy %.4f",
                  d.per_class[0], d.per_class[1], es.first_perfect_epoch, es.seconds, plain.first_perfect_epoch,
                  plain.seconds, kOverfitMaxEpochs, kOverfitBudgetS, kOverfitLr, eval_accuracy)};
}

Outcome criterion9(const OverfitData& d, const OverfitRun& es, const OverfitRun& repeat, const fs::path& work) {
  const bool logs_equal = slurp(es.summary.epoch_log) == slurp(repeat.summary.epoch_log) &&
                          !slurp(es.summary.epoch_log).empty();
  const EncodeSummary again = cmd_encode(d.preprocessed, d.cfg, work / "c9_encode");
  const ImageManifest a = read_image_manifest(d.images_dir / "manifest.csv");
  const ImageManifest b = read_image_manifest(again.manifest);
  std::size_t identical = 0;
  bool pngs_equal = a.rows.size() == b.rows.size() && !a.rows.empty();
  for (std::size_t i = 0; pngs_equal && i < a.rows.size(); ++i) {
    const std::string x = slurp(a.resolve(a.rows[i]));
    if (!x.empty() && x == slurp(b.resolve(b.rows[i]))) ++identical;
  }
  pngs_equal = pngs_equal && identical == a.rows.size();
  return {logs_equal && pngs_equal,
          fmt("epoch logs %s (%zu bytes); %zu/%zu PNGs byte-identical", logs_equal ? "byte-identical" : "DIFFER",
              slurp(es.summary.epoch_log).size(), identical, a.rows.size())};
}

Outcome criterion10(const std::vector<OverfitRun*>& runs, const fs::path& eval_dir) {
  std::size_t checked = 0;
  double worst = 0.0;
  bool ok = true;
  auto check = [&](const std::vector<std::vector<std::size_t>>& cm, double p, double r, double f1) {
    const Macro m = macro_from_confusion(cm);
    worst = std::max({worst, std::abs(m.precision - p), std::abs(m.recall - r), std::abs(m.f1 - f1)});
    ++checked;
  };
  for (const OverfitRun* run : runs) {
    const auto log_rows = lines_of(run->dir / "epoch_log.csv");
    const auto metric_rows = lines_of(run->dir / "epoch_metrics.jsonl");
    if (metric_rows.empty() || log_rows.size() != metric_rows.size() + 1) {
      ok = false;
      continue;
    }
    for (std::size_t i = 0; i < metric_rows.size(); ++i) {
      const json rec = json::parse(metric_rows[i]);
      const auto cm = rec.at("metrics").at("confusion").get<std::vector<std::vector<std::size_t>>>();
      const json& m = rec.at("metrics");
      check(cm, m.at("macro_precision"), m.at("macro_recall"), m.at("macro_f1"));
      // The CSV log reports the same evaluation.
      const auto cols = split(log_rows[i + 1], ',');
      check(cm, std::stod(cols.at(4)), std::stod(cols.at(5)), std::stod(cols.at(6)));
    }
  }
  const json report = json::parse(slurp(eval_dir / "metrics.json")).at("report");
  std::vector<std::vector<std::size_t>> cm;
  const auto rows = lines_of(eval_dir / "confusion.csv");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto cols = split(rows[i], ',');
    std::vector<std::size_t> row;
    for (std::size_t j = 1; j < cols.size(); ++j) row.push_back(std::stoul(cols[j]));
    cm.push_back(row);
  }
  ok = ok && cm == report.at("confusion").get<std::vector<std::vector<std::size_t>>>();
  check(cm, report.at("macro_precision"), report.at("macro_recall"), report.at("macro_f1"));
  ok = ok && checked > 0 && worst <= kMetricsTol;
  return {ok, fmt("%zu reported metric sets recomputed from their confusion matrices, worst |delta| = %.3e <= %.0e",
                  checked, worst, kMetricsTol)};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "esvit_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  std::map<int, Outcome> results;
  auto run = [&](int id, const std::function<Outcome()>& f) {
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %2d: %s  %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    results[id] = o;
  };

  run(1, criterion1);
  run(2, criterion2);
  run(3, criterion3);
  run(4, criterion4);
  run(5, [&] { return criterion5(work); });
  run(6, criterion6);
  run(7, criterion7);

  OverfitData data;
  OverfitRun es, plain, repeat;
  double eval_accuracy = -1.0;
  std::string setup_error;
  try {
    data = build_overfit_corpus(work);
    es = run_overfit(data, true, work / "c8_esvit");
    plain = run_overfit(data, false, work / "c8_plain");
    repeat = run_overfit(data, true, work / "c9_repeat");
    eval_accuracy = cmd_eval(es.summary.checkpoint, data.manifest, data.cfg, EvalSubset::kTrain, work / "c8_esvit")
                        .evaluation.metrics.accuracy;
  } catch (const std::exception& e) {
    setup_error = e.what();
  }
  auto guarded = [&](const std::function<Outcome()>& f) {
    return [&, f] { return setup_error.empty() ? f() : Outcome{false, "overfit setup failed: " + setup_error}; };
  };
  run(8, guarded([&] { return criterion8(data, es, plain, eval_accuracy); }));
  run(9, guarded([&] { return criterion9(data, es, repeat, work); }));
  run(10, guarded([&] { return criterion10({&es, &plain}, work / "c8_esvit" / "eval"); }));

  std::size_t passed = 0;
  for (const auto& [id, o] : results) passed += o.pass ? 1 : 0;
  std::printf("acceptance: %zu/%zu criteria passed\n", passed, results.size());
  return passed == results.size() ? 0 : 1;
}
