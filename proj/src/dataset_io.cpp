#include "esvit/dataset_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "esvit/error.hpp"
#include "esvit/json_util.hpp"
#include "esvit/random.hpp"

namespace esvit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifestHeader =
    "signal_path,subject_id,session,sampling_rate_hz,label_emotion,rating_valence,rating_arousal,"
    "rating_dominance,rating_scale_max";
constexpr const char* kImageHeader = "image_path,subject_id,segment_index,label_emotion,label_valence,label_arousal";

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ifstream open_input(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  if (!fs::exists(path)) fail(ErrorKind::kMissingInput, "'" + path.string() + "' does not exist");
  std::ifstream in(path, mode);
  if (!in) fail(ErrorKind::kIo, "cannot open '" + path.string() + "'");
  return in;
}

std::ofstream open_output(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write '" + path.string() + "'");
  return out;
}

void close_output(std::ofstream& out, const fs::path& path) {
  out.close();
  if (!out) fail(ErrorKind::kIo, "failed writing '" + path.string() + "'");
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in = open_input(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

int parse_int(const std::string& field, const std::string& where) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    fail(ErrorKind::kParse, where + ": expected an integer, got '" + field + "'");
  }
  return v;
}

std::optional<int> parse_optional_int(const std::string& field, const std::string& where) {
  if (field.empty()) return std::nullopt;
  return parse_int(field, where);
}

std::string optional_str(const std::optional<int>& v) { return v ? std::to_string(*v) : ""; }

void check_header(const std::vector<std::string>& lines, const std::string& expected_prefix,
                  const fs::path& path) {
  if (lines.empty()) fail(ErrorKind::kParse, "'" + path.string() + "' is empty");
  if (lines[0].rfind(expected_prefix, 0) != 0) {
    fail(ErrorKind::kParse, "'" + path.string() + "': header must start with '" + expected_prefix + "'");
  }
}

fs::path resolve_against(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

double parse_double(const std::string& field, const std::string& where) {
  std::size_t b = field.find_first_not_of(" \t");
  std::size_t e = field.find_last_not_of(" \t");
  if (b == std::string::npos) fail(ErrorKind::kParse, where + ": empty numeric field");
  const char* first = field.data() + b;
  const char* last = field.data() + e + 1;
  if (*first == '+') ++first;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
    fail(ErrorKind::kParse, where + ": expected a finite number, got '" + field + "'");
  }
  return v;
}

// ---- manifest ---------------------------------------------------------------

void validate(const RecordingEntry& e) {
  const std::string where = "recording '" + e.signal_path + "'";
  if (e.signal_path.empty()) fail(ErrorKind::kInvalidConfig, "recording with an empty signal_path");
  if (!(e.sampling_rate_hz > 0.0)) fail(ErrorKind::kInvalidConfig, where + ": sampling_rate_hz must be > 0");
  if (!(e.rating_scale_max > 1.0)) fail(ErrorKind::kOutOfRange, where + ": rating_scale_max must exceed 1");
  auto rating = [&](double r, const char* name) {
    if (r < 1.0 || r > e.rating_scale_max) {
      fail(ErrorKind::kOutOfRange, where + ": " + name + " " + fmt(r) + " outside [1, " + fmt(e.rating_scale_max) +
                                       "]");
    }
  };
  rating(e.rating_valence, "rating_valence");
  rating(e.rating_arousal, "rating_arousal");
  if (e.rating_dominance) rating(*e.rating_dominance, "rating_dominance");
  if (e.label_emotion && (*e.label_emotion < 0 || *e.label_emotion >= 7)) {
    fail(ErrorKind::kOutOfRange, where + ": label_emotion must be in [0, 6]");
  }
  if (e.duration_s && !(*e.duration_s > 0.0)) fail(ErrorKind::kOutOfRange, where + ": duration_s must be > 0");
}

fs::path RecordingManifest::resolve(const RecordingEntry& e) const { return resolve_against(base_dir, e.signal_path); }

RecordingManifest read_manifest(const fs::path& path) {
  const std::vector<std::string> lines = read_lines(path);
  check_header(lines, kManifestHeader, path);
  const auto header = split_csv_line(lines[0]);
  const bool has_duration = header.size() == 10 && header[9] == "duration_s";
  if (header.size() != 9 && !has_duration) {
    fail(ErrorKind::kParse, "'" + path.string() + "': unexpected manifest columns");
  }
  RecordingManifest m;
  m.base_dir = path.parent_path();
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string where = path.filename().string() + ":" + std::to_string(i + 1);
    const auto f = split_csv_line(lines[i]);
    if (f.size() != header.size()) {
      fail(ErrorKind::kParse, where + ": expected " + std::to_string(header.size()) + " fields, got " +
                                  std::to_string(f.size()));
    }
    RecordingEntry e;
    e.signal_path = f[0];
    e.subject_id = f[1];
    e.session = f[2];
    e.sampling_rate_hz = parse_double(f[3], where + " sampling_rate_hz");
    e.label_emotion = parse_optional_int(f[4], where + " label_emotion");
    e.rating_valence = parse_double(f[5], where + " rating_valence");
    e.rating_arousal = parse_double(f[6], where + " rating_arousal");
    if (!f[7].empty()) e.rating_dominance = parse_double(f[7], where + " rating_dominance");
    e.rating_scale_max = parse_double(f[8], where + " rating_scale_max");
    if (has_duration && !f[9].empty()) e.duration_s = parse_double(f[9], where + " duration_s");
    try {
      validate(e);
    } catch (const Error& err) {
      fail(err.kind(), where + ": " + err.what());
    }
    m.rows.push_back(std::move(e));
  }
  if (m.rows.empty()) fail(ErrorKind::kParse, "'" + path.string() + "' lists no recordings");
  return m;
}

void write_manifest(const RecordingManifest& m, const fs::path& path) {
  const bool has_duration =
      std::any_of(m.rows.begin(), m.rows.end(), [](const RecordingEntry& e) { return e.duration_s.has_value(); });
  std::ofstream out = open_output(path);
  out << kManifestHeader << (has_duration ? ",duration_s" : "") << '\n';
  for (const RecordingEntry& e : m.rows) {
    out << e.signal_path << ',' << e.subject_id << ',' << e.session << ',' << fmt(e.sampling_rate_hz) << ','
        << optional_str(e.label_emotion) << ',' << fmt(e.rating_valence) << ',' << fmt(e.rating_arousal) << ','
        << (e.rating_dominance ? fmt(*e.rating_dominance) : "") << ',' << fmt(e.rating_scale_max);
    if (has_duration) out << ',' << (e.duration_s ? fmt(*e.duration_s) : "");
    out << '\n';
  }
  close_output(out, path);
}

// ---- signal files -----------------------------------------------------------

namespace {

bool is_binary(const fs::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".f64" || ext == ".bin") return true;
  if (ext == ".csv" || ext == ".txt") return false;
  fail(ErrorKind::kInvalidArgument, "unsupported signal file extension '" + ext + "' (csv, txt, f64, bin)");
}

std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return r;
  }
}

}  // namespace

TimeSeries read_signal(const fs::path& path, double sampling_rate_hz, const std::string& source) {
  TimeSeries ts;
  ts.sampling_rate_hz = sampling_rate_hz;
  ts.source = source;
  if (is_binary(path)) {
    std::ifstream in = open_input(path, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() % 8 != 0) {
      fail(ErrorKind::kParse, "'" + path.string() + "': size is not a multiple of 8 bytes");
    }
    ts.samples.resize(bytes.size() / 8);
    for (std::size_t i = 0; i < ts.samples.size(); ++i) {
      std::uint64_t raw = 0;
      std::memcpy(&raw, bytes.data() + 8 * i, 8);
      ts.samples[i] = std::bit_cast<double>(to_little_endian(raw));
      if (!std::isfinite(ts.samples[i])) {
        fail(ErrorKind::kParse, "'" + path.string() + "': non-finite sample at index " + std::to_string(i));
      }
    }
  } else {
    const std::vector<std::string> lines = read_lines(path);
    ts.samples.reserve(lines.size());
    for (std::size_t i = 0; i < lines.size(); ++i) {
      ts.samples.push_back(parse_double(lines[i], path.filename().string() + ":" + std::to_string(i + 1)));
    }
  }
  if (ts.samples.empty()) fail(ErrorKind::kParse, "'" + path.string() + "' holds no samples");
  return ts;
}

void write_signal(const TimeSeries& ts, const fs::path& path) {
  if (is_binary(path)) {
    std::ofstream out = open_output(path, std::ios::binary);
    for (double v : ts.samples) {
      const std::uint64_t raw = to_little_endian(std::bit_cast<std::uint64_t>(v));
      out.write(reinterpret_cast<const char*>(&raw), 8);
    }
    close_output(out, path);
  } else {
    std::ofstream out = open_output(path);
    for (double v : ts.samples) out << fmt(v) << '\n';
    close_output(out, path);
  }
}

Recording load_recording(const RecordingManifest& manifest, std::size_t row) {
  require(row < manifest.rows.size(), "load_recording: row out of range");
  const RecordingEntry& e = manifest.rows[row];
  validate(e);
  Recording rec;
  rec.entry = e;
  rec.series = read_signal(manifest.resolve(e), e.sampling_rate_hz, e.signal_path);
  if (e.duration_s) {
    const double expected = *e.duration_s * e.sampling_rate_hz;
    if (std::abs(static_cast<double>(rec.series.size()) - expected) > 1.0) {
      fail(ErrorKind::kOutOfRange, "'" + e.signal_path + "' holds " + std::to_string(rec.series.size()) +
                                       " samples, manifest duration implies " + fmt(expected));
    }
  }
  return rec;
}

// ---- synthetic ECG ----------------------------------------------------------

void SyntheticEcgSpec::validate() const {
  auto check = [](bool ok, const std::string& msg) {
    if (!ok) fail(ErrorKind::kInvalidConfig, "synthetic ecg: " + msg);
  };
  check(heart_rate_bpm >= 30.0 && heart_rate_bpm <= 220.0, "heart_rate_bpm must lie in [30, 220]");
  check(sampling_rate_hz > 0.0, "sampling_rate_hz must be > 0");
  check(duration_s > 0.0 && duration_s * heart_rate_bpm / 60.0 >= 1.0, "duration must hold at least one beat");
  check(noise_std >= 0.0 && baseline_wander_amp >= 0.0 && amplitude_jitter >= 0.0 && tone_amp >= 0.0,
        "amplitudes must be non-negative");
  check(baseline_wander_freq_hz >= 0.0 && tone_freq_hz >= 0.0, "frequencies must be non-negative");
  check(tone_freq_hz < sampling_rate_hz / 2.0, "tone_freq_hz must be below Nyquist");
}

SyntheticEcg generate_synthetic_ecg(const SyntheticEcgSpec& spec) {
  spec.validate();
  struct Wave {
    double amplitude, offset_s, width_s;
  };
  // P, Q, R, S, T at a 1 s beat period; offsets shrink with shorter periods.
  static constexpr Wave kWaves[] = {
      {0.15, -0.20, 0.025}, {-0.10, -0.025, 0.010}, {1.0, 0.0, 0.010}, {-0.20, 0.025, 0.010}, {0.30, 0.30, 0.040}};

  const double fs = spec.sampling_rate_hz;
  const auto n = static_cast<std::size_t>(std::floor(spec.duration_s * fs));
  const double period = 60.0 / spec.heart_rate_bpm;
  const double stretch = std::min(1.0, period);
  Rng rng(spec.seed);

  SyntheticEcg out;
  out.series.sampling_rate_hz = fs;
  out.series.samples.assign(n, 0.0);
  const auto beats = static_cast<std::size_t>(std::floor(spec.duration_s / period + 1e-9));
  for (std::size_t k = 0; k < beats; ++k) {
    const double t_r = (static_cast<double>(k) + 0.5) * period;
    const auto r_index = static_cast<std::size_t>(std::lround(t_r * fs));
    if (r_index >= n) break;
    out.beat_indices.push_back(r_index);
    const double gain = 1.0 + spec.amplitude_jitter * rng.normal();
    const double t_center = static_cast<double>(r_index) / fs;
    for (const Wave& w : kWaves) {
      const double mu = t_center + w.offset_s * stretch;
      const double sigma = w.width_s * stretch;
      const auto lo = static_cast<std::ptrdiff_t>(std::floor((mu - 5.0 * sigma) * fs));
      const auto hi = static_cast<std::ptrdiff_t>(std::ceil((mu + 5.0 * sigma) * fs));
      for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(lo, 0); i <= hi && i < static_cast<std::ptrdiff_t>(n); ++i) {
        const double z = (static_cast<double>(i) / fs - mu) / sigma;
        out.series.samples[static_cast<std::size_t>(i)] += gain * w.amplitude * std::exp(-0.5 * z * z);
      }
    }
  }
  const double wander_phase = 2.0 * std::numbers::pi * rng.uniform();
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    double v = spec.baseline_wander_amp * std::sin(2.0 * std::numbers::pi * spec.baseline_wander_freq_hz * t +
                                                   wander_phase);
    v += spec.tone_amp * std::sin(2.0 * std::numbers::pi * spec.tone_freq_hz * t);
    if (spec.noise_std > 0.0) v += spec.noise_std * rng.normal();
    out.series.samples[i] += v;
  }
  return out;
}

json to_json(const SyntheticEcgSpec& s) {
  return {{"heart_rate_bpm", s.heart_rate_bpm},
          {"duration_s", s.duration_s},
          {"sampling_rate_hz", s.sampling_rate_hz},
          {"noise_std", s.noise_std},
          {"baseline_wander_amp", s.baseline_wander_amp},
          {"baseline_wander_freq_hz", s.baseline_wander_freq_hz},
          {"amplitude_jitter", s.amplitude_jitter},
          {"tone_amp", s.tone_amp},
          {"tone_freq_hz", s.tone_freq_hz},
          {"seed", s.seed}};
}

SyntheticEcgSpec synthetic_ecg_spec_from_json(const json& doc, const std::string& where) {
  using namespace jsonutil;
  reject_unknown_keys(doc,
                      {"heart_rate_bpm", "duration_s", "sampling_rate_hz", "noise_std", "baseline_wander_amp",
                       "baseline_wander_freq_hz", "amplitude_jitter", "tone_amp", "tone_freq_hz", "seed"},
                      where);
  SyntheticEcgSpec s;
  read(doc, "heart_rate_bpm", s.heart_rate_bpm, where);
  read(doc, "duration_s", s.duration_s, where);
  read(doc, "sampling_rate_hz", s.sampling_rate_hz, where);
  read(doc, "noise_std", s.noise_std, where);
  read(doc, "baseline_wander_amp", s.baseline_wander_amp, where);
  read(doc, "baseline_wander_freq_hz", s.baseline_wander_freq_hz, where);
  read(doc, "amplitude_jitter", s.amplitude_jitter, where);
  read(doc, "tone_amp", s.tone_amp, where);
  read(doc, "tone_freq_hz", s.tone_freq_hz, where);
  read(doc, "seed", s.seed, where);
  s.validate();
  return s;
}

// ---- synthetic corpus -------------------------------------------------------

void SyntheticCorpusSpec::validate() const {
  auto check = [](bool ok, const std::string& msg) {
    if (!ok) fail(ErrorKind::kInvalidConfig, "synth: " + msg);
  };
  ecg.validate();
  check(!classes.empty(), "at least one class is required");
  check(recordings_per_class >= 1, "recordings_per_class must be >= 1");
  check(subjects >= 1, "subjects must be >= 1");
  check(rating_scale_max > 1.0, "rating_scale_max must exceed 1");
  check(signal_format == "csv" || signal_format == "f64", "signal_format must be csv or f64");
  std::set<std::string> names;
  for (const SyntheticClass& c : classes) {
    check(!c.name.empty() && c.name.find_first_of(",/\\ ") == std::string::npos,
          "class names must be non-empty and free of commas, slashes and spaces");
    check(names.insert(c.name).second, "duplicate class name '" + c.name + "'");
    RecordingEntry probe;
    probe.signal_path = c.name;
    probe.sampling_rate_hz = ecg.sampling_rate_hz;
    probe.label_emotion = c.label_emotion;
    probe.rating_valence = c.rating_valence;
    probe.rating_arousal = c.rating_arousal;
    probe.rating_dominance = c.rating_dominance;
    probe.rating_scale_max = rating_scale_max;
    try {
      esvit::validate(probe);
    } catch (const Error& e) {
      fail(ErrorKind::kInvalidConfig, std::string("synth: class ") + e.what());
    }
    SyntheticEcgSpec per_class = ecg;
    if (c.heart_rate_bpm) per_class.heart_rate_bpm = *c.heart_rate_bpm;
    per_class.tone_amp = c.tone_amp;
    per_class.tone_freq_hz = c.tone_freq_hz;
    per_class.validate();
  }
}

SyntheticCorpusSpec SyntheticCorpusSpec::two_class_default() {
  SyntheticCorpusSpec s;
  SyntheticClass low;
  low.name = "low";
  low.label_emotion = 0;
  low.rating_valence = 3.0;
  low.rating_arousal = 3.0;
  SyntheticClass high;
  high.name = "high";
  high.label_emotion = 1;
  high.rating_valence = 7.0;
  high.rating_arousal = 7.0;
  high.tone_amp = 0.3;
  high.tone_freq_hz = 10.0;
  s.classes = {low, high};
  return s;
}

json to_json(const SyntheticCorpusSpec& s) {
  json classes = json::array();
  for (const SyntheticClass& c : s.classes) {
    json j = {{"name", c.name},
              {"rating_valence", c.rating_valence},
              {"rating_arousal", c.rating_arousal},
              {"tone_amp", c.tone_amp},
              {"tone_freq_hz", c.tone_freq_hz}};
    if (c.label_emotion) j["label_emotion"] = *c.label_emotion;
    if (c.rating_dominance) j["rating_dominance"] = *c.rating_dominance;
    if (c.heart_rate_bpm) j["heart_rate_bpm"] = *c.heart_rate_bpm;
    classes.push_back(std::move(j));
  }
  return {{"ecg", to_json(s.ecg)},
          {"classes", classes},
          {"recordings_per_class", s.recordings_per_class},
          {"subjects", s.subjects},
          {"rating_scale_max", s.rating_scale_max},
          {"signal_format", s.signal_format},
          {"seed", s.seed}};
}

SyntheticCorpusSpec synthetic_corpus_spec_from_json(const json& doc, const std::string& where) {
  using namespace jsonutil;
  reject_unknown_keys(doc, {"ecg", "classes", "recordings_per_class", "subjects", "rating_scale_max",
                            "signal_format", "seed"},
                      where);
  SyntheticCorpusSpec s = SyntheticCorpusSpec::two_class_default();
  if (doc.contains("ecg")) s.ecg = synthetic_ecg_spec_from_json(doc.at("ecg"), where + ".ecg");
  read(doc, "recordings_per_class", s.recordings_per_class, where);
  read(doc, "subjects", s.subjects, where);
  read(doc, "rating_scale_max", s.rating_scale_max, where);
  read(doc, "signal_format", s.signal_format, where);
  read(doc, "seed", s.seed, where);
  if (doc.contains("classes")) {
    const json& arr = doc.at("classes");
    if (!arr.is_array()) fail(ErrorKind::kInvalidConfig, where + ".classes: expected an array");
    s.classes.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string w = where + ".classes[" + std::to_string(i) + "]";
      const json& cj = arr[i];
      reject_unknown_keys(cj, {"name", "label_emotion", "rating_valence", "rating_arousal", "rating_dominance",
                               "heart_rate_bpm", "tone_amp", "tone_freq_hz"},
                          w);
      SyntheticClass c;
      read(cj, "name", c.name, w);
      read(cj, "rating_valence", c.rating_valence, w);
      read(cj, "rating_arousal", c.rating_arousal, w);
      read(cj, "tone_amp", c.tone_amp, w);
      read(cj, "tone_freq_hz", c.tone_freq_hz, w);
      if (cj.contains("label_emotion")) {
        int v = 0;
        read(cj, "label_emotion", v, w);
        c.label_emotion = v;
      }
      if (cj.contains("rating_dominance")) {
        double v = 0.0;
        read(cj, "rating_dominance", v, w);
        c.rating_dominance = v;
      }
      if (cj.contains("heart_rate_bpm")) {
        double v = 0.0;
        read(cj, "heart_rate_bpm", v, w);
        c.heart_rate_bpm = v;
      }
      s.classes.push_back(std::move(c));
    }
  }
  s.validate();
  return s;
}

RecordingManifest generate_corpus(const SyntheticCorpusSpec& spec, const fs::path& out_dir) {
  spec.validate();
  fs::create_directories(out_dir / "signals");
  Rng seeds(spec.seed);
  RecordingManifest m;
  m.base_dir = out_dir;
  std::ostringstream beats;
  beats << "signal_path,beat_indices\n";
  std::size_t index = 0;
  for (std::size_t r = 0; r < spec.recordings_per_class; ++r) {
    for (const SyntheticClass& c : spec.classes) {
      SyntheticEcgSpec ecg = spec.ecg;
      if (c.heart_rate_bpm) ecg.heart_rate_bpm = *c.heart_rate_bpm;
      ecg.tone_amp = c.tone_amp;
      ecg.tone_freq_hz = c.tone_freq_hz;
      ecg.seed = seeds.below(UINT64_MAX);
      const SyntheticEcg sig = generate_synthetic_ecg(ecg);

      char id[64];
      std::snprintf(id, sizeof id, "rec%04zu_%s", index, c.name.c_str());
      RecordingEntry e;
      e.signal_path = std::string("signals/") + id + "." + spec.signal_format;
      char subject[32];
      std::snprintf(subject, sizeof subject, "S%02zu", index % spec.subjects);
      e.subject_id = subject;
      e.session = std::to_string(r);
      e.sampling_rate_hz = ecg.sampling_rate_hz;
      e.label_emotion = c.label_emotion;
      e.rating_valence = c.rating_valence;
      e.rating_arousal = c.rating_arousal;
      e.rating_dominance = c.rating_dominance;
      e.rating_scale_max = spec.rating_scale_max;
      e.duration_s = static_cast<double>(sig.series.size()) / ecg.sampling_rate_hz;
      write_signal(sig.series, out_dir / e.signal_path);

      beats << e.signal_path << ',';
      for (std::size_t k = 0; k < sig.beat_indices.size(); ++k) beats << (k ? " " : "") << sig.beat_indices[k];
      beats << '\n';
      m.rows.push_back(std::move(e));
      ++index;
    }
  }
  write_manifest(m, out_dir / "manifest.csv");
  std::ofstream out = open_output(out_dir / "beats.csv");
  out << beats.str();
  close_output(out, out_dir / "beats.csv");
  return m;
}

// ---- splits -----------------------------------------------------------------

SplitPolicy split_policy_from_string(const std::string& name) {
  if (name == "random_stratified") return SplitPolicy::kRandomStratified;
  if (name == "subject_holdout") return SplitPolicy::kSubjectHoldout;
  fail(ErrorKind::kInvalidConfig, "unknown split policy '" + name + "' (random_stratified|subject_holdout)");
}

const char* to_string(SplitPolicy p) {
  return p == SplitPolicy::kRandomStratified ? "random_stratified" : "subject_holdout";
}

void SplitSpec::validate() const {
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
    fail(ErrorKind::kInvalidConfig, "split: train_fraction must lie in (0, 1]");
  }
}

json to_json(const SplitSpec& s) {
  return {{"policy", to_string(s.policy)}, {"train_fraction", s.train_fraction}, {"seed", s.seed}};
}

SplitSpec split_spec_from_json(const json& doc, const std::string& where) {
  using namespace jsonutil;
  reject_unknown_keys(doc, {"policy", "train_fraction", "seed"}, where);
  SplitSpec s;
  std::string policy = to_string(s.policy);
  read(doc, "policy", policy, where);
  s.policy = split_policy_from_string(policy);
  read(doc, "train_fraction", s.train_fraction, where);
  read(doc, "seed", s.seed, where);
  s.validate();
  return s;
}

Split make_split(const std::vector<std::size_t>& labels, const std::vector<std::string>& subjects,
                 const SplitSpec& spec) {
  spec.validate();
  require(labels.size() == subjects.size(), "make_split: labels and subjects differ in length");
  Rng rng(spec.seed);
  Split out;
  auto take = [&](std::size_t n) {
    return static_cast<std::size_t>(std::lround(spec.train_fraction * static_cast<double>(n)));
  };
  if (spec.policy == SplitPolicy::kRandomStratified) {
    std::map<std::size_t, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    for (auto& [label, items] : by_class) {
      rng.shuffle(items.begin(), items.end());
      const std::size_t k = take(items.size());
      out.train.insert(out.train.end(), items.begin(), items.begin() + static_cast<std::ptrdiff_t>(k));
      out.test.insert(out.test.end(), items.begin() + static_cast<std::ptrdiff_t>(k), items.end());
    }
  } else {
    std::vector<std::string> ids(subjects.begin(), subjects.end());
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    rng.shuffle(ids.begin(), ids.end());
    const std::set<std::string> train_ids(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(take(ids.size())));
    for (std::size_t i = 0; i < subjects.size(); ++i) {
      (train_ids.count(subjects[i]) ? out.train : out.test).push_back(i);
    }
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

// ---- image manifest ---------------------------------------------------------

fs::path ImageManifest::resolve(const ImageRecord& r) const { return resolve_against(base_dir, r.image_path); }

ImageManifest read_image_manifest(const fs::path& path) {
  const std::vector<std::string> lines = read_lines(path);
  check_header(lines, kImageHeader, path);
  const auto header = split_csv_line(lines[0]);
  const bool has_dominance = header.size() == 7 && header[6] == "label_dominance";
  if (header.size() != 6 && !has_dominance) {
    fail(ErrorKind::kParse, "'" + path.string() + "': unexpected image manifest columns");
  }
  ImageManifest m;
  m.base_dir = path.parent_path();
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string where = path.filename().string() + ":" + std::to_string(i + 1);
    const auto f = split_csv_line(lines[i]);
    if (f.size() != header.size()) fail(ErrorKind::kParse, where + ": wrong number of fields");
    ImageRecord r;
    r.image_path = f[0];
    r.subject_id = f[1];
    r.segment_index = static_cast<std::size_t>(parse_int(f[2], where + " segment_index"));
    r.label_emotion = parse_optional_int(f[3], where + " label_emotion");
    r.label_valence = parse_int(f[4], where + " label_valence");
    r.label_arousal = parse_int(f[5], where + " label_arousal");
    if (has_dominance) r.label_dominance = parse_optional_int(f[6], where + " label_dominance");
    m.rows.push_back(std::move(r));
  }
  if (m.rows.empty()) fail(ErrorKind::kParse, "'" + path.string() + "' lists no images");
  return m;
}

void write_image_manifest(const ImageManifest& m, const fs::path& path) {
  const bool has_dominance =
      std::any_of(m.rows.begin(), m.rows.end(), [](const ImageRecord& r) { return r.label_dominance.has_value(); });
  std::ofstream out = open_output(path);
  out << kImageHeader << (has_dominance ? ",label_dominance" : "") << '\n';
  for (const ImageRecord& r : m.rows) {
    out << r.image_path << ',' << r.subject_id << ',' << r.segment_index << ',' << optional_str(r.label_emotion)
        << ',' << r.label_valence << ',' << r.label_arousal;
    if (has_dominance) out << ',' << optional_str(r.label_dominance);
    out << '\n';
  }
  close_output(out, path);
}

}  // namespace esvit
