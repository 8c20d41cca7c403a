#pragma once

// Recording manifests, signal file I/O, the synthetic ECG generator and
// train/test splitting.
//
// Recording manifest (CSV, header required, columns in this order):
//   signal_path,subject_id,session,sampling_rate_hz,label_emotion,
//   rating_valence,rating_arousal,rating_dominance,rating_scale_max[,duration_s]
// label_emotion and rating_dominance may be empty. Relative signal paths are
// resolved against the manifest's directory.
//
// Signal files: `.csv`/`.txt` hold one amplitude per line; `.f64`/`.bin` hold
// raw little-endian IEEE-754 doubles.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "esvit/signal_core.hpp"

namespace esvit {

struct RecordingEntry {
  std::string signal_path;
  std::string subject_id;
  std::string session;
  double sampling_rate_hz = 0.0;
  std::optional<int> label_emotion;
  double rating_valence = 1.0;
  double rating_arousal = 1.0;
  std::optional<double> rating_dominance;
  double rating_scale_max = 9.0;
  std::optional<double> duration_s;
};

// Throws kOutOfRange for ratings or labels outside their domain and
// kInvalidConfig for structural problems (empty path, non-positive rate).
void validate(const RecordingEntry& entry);

struct RecordingManifest {
  std::filesystem::path base_dir;
  std::vector<RecordingEntry> rows;

  std::filesystem::path resolve(const RecordingEntry& entry) const;
};

// Parses and validates every row; no signal file is opened.
RecordingManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const RecordingManifest& manifest, const std::filesystem::path& path);

struct Recording {
  TimeSeries series;
  RecordingEntry entry;
};

// Errors: kMissingInput (no file), kParse (empty or non-numeric contents),
// kOutOfRange (length disagrees with duration_s by more than one sample).
Recording load_recording(const RecordingManifest& manifest, std::size_t row);

TimeSeries read_signal(const std::filesystem::path& path, double sampling_rate_hz, const std::string& source);
// Format chosen by extension; CSV values are written with 17 significant digits.
void write_signal(const TimeSeries& ts, const std::filesystem::path& path);

struct SyntheticEcgSpec {
  double heart_rate_bpm = 60.0;
  double duration_s = 39.0;
  double sampling_rate_hz = 128.0;
  double noise_std = 0.0;
  double baseline_wander_amp = 0.0;
  double baseline_wander_freq_hz = 0.25;
  double amplitude_jitter = 0.0;  // relative std of per-beat amplitude
  // Optional sinusoid added to the whole recording.
  double tone_amp = 0.0;
  double tone_freq_hz = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticEcg {
  TimeSeries series;
  std::vector<std::size_t> beat_indices;  // planted R-peak samples
};

// Beats are planted at (k + 1/2) * 60 / bpm seconds, so a recording holds
// floor(duration * bpm / 60) beats.
SyntheticEcg generate_synthetic_ecg(const SyntheticEcgSpec& spec);

nlohmann::json to_json(const SyntheticEcgSpec& spec);
SyntheticEcgSpec synthetic_ecg_spec_from_json(const nlohmann::json& doc, const std::string& where = "ecg");

struct SyntheticClass {
  std::string name;
  std::optional<int> label_emotion;
  double rating_valence = 5.0;
  double rating_arousal = 5.0;
  std::optional<double> rating_dominance;
  std::optional<double> heart_rate_bpm;  // overrides the base spec
  double tone_amp = 0.0;
  double tone_freq_hz = 0.0;
};

struct SyntheticCorpusSpec {
  SyntheticEcgSpec ecg;
  std::vector<SyntheticClass> classes;
  std::size_t recordings_per_class = 4;
  std::size_t subjects = 4;
  double rating_scale_max = 9.0;
  std::string signal_format = "csv";  // csv | f64
  std::uint64_t seed = 0;

  void validate() const;
  // Two classes: a plain low-valence/low-arousal rhythm and a high-rated one
  // carrying a 10 Hz tone.
  static SyntheticCorpusSpec two_class_default();
};

nlohmann::json to_json(const SyntheticCorpusSpec& spec);
SyntheticCorpusSpec synthetic_corpus_spec_from_json(const nlohmann::json& doc, const std::string& where = "synth");

// Writes signals/<id>.<ext>, manifest.csv and beats.csv (planted indices)
// under `out_dir` and returns the manifest.
RecordingManifest generate_corpus(const SyntheticCorpusSpec& spec, const std::filesystem::path& out_dir);

enum class SplitPolicy { kRandomStratified, kSubjectHoldout };

SplitPolicy split_policy_from_string(const std::string& name);
const char* to_string(SplitPolicy policy);

struct SplitSpec {
  SplitPolicy policy = SplitPolicy::kRandomStratified;
  double train_fraction = 0.8;  // (0, 1]
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const SplitSpec& spec);
SplitSpec split_spec_from_json(const nlohmann::json& doc, const std::string& where = "split");

// Indices into the input, each ascending.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// kRandomStratified sends round(fraction * n_c) items of every class to train.
// kSubjectHoldout sends round(fraction * subjects) whole subjects to train.
Split make_split(const std::vector<std::size_t>& labels, const std::vector<std::string>& subjects,
                 const SplitSpec& spec);

// Image manifest (CSV):
//   image_path,subject_id,segment_index,label_emotion,label_valence,label_arousal[,label_dominance]
// Valence/arousal/dominance columns hold binarized classes; empty means absent.
struct ImageRecord {
  std::string image_path;
  std::string subject_id;
  std::size_t segment_index = 0;
  std::optional<int> label_emotion;
  int label_valence = 0;
  int label_arousal = 0;
  std::optional<int> label_dominance;
};

struct ImageManifest {
  std::filesystem::path base_dir;
  std::vector<ImageRecord> rows;

  std::filesystem::path resolve(const ImageRecord& record) const;
};

ImageManifest read_image_manifest(const std::filesystem::path& path);
void write_image_manifest(const ImageManifest& manifest, const std::filesystem::path& path);

// Shared CSV helpers: comma-separated, no quoting, trailing '\r' stripped.
std::vector<std::string> split_csv_line(const std::string& line);
double parse_double(const std::string& field, const std::string& where);

}  // namespace esvit
