#pragma once

// ECG conditioning: baseline removal, Butterworth band-pass filtering,
// R-peak detection and fixed-width segmentation around the peaks.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace esvit {

// Uniformly sampled real-valued signal. `source` tags the recording the
// samples came from and travels with every derived product.
struct TimeSeries {
  std::vector<double> samples;
  double sampling_rate_hz = 0.0;
  std::string source;

  std::size_t size() const { return samples.size(); }
  double duration_s() const { return static_cast<double>(samples.size()) / sampling_rate_hz; }
};

// Throws kInvalidArgument unless rate > 0, length >= 1 and all samples finite.
void validate(const TimeSeries& ts);

struct BaselineSpec {
  double window_s = 5.0;
  // Drop the baseline window from the returned signal after subtracting.
  bool discard_window = false;
};

std::size_t baseline_window_samples(const BaselineSpec& spec, double sampling_rate_hz);

// s_br[n] = s[n] - mean(s[0 .. W-1]) with W = floor(window_s * fs).
TimeSeries remove_baseline(const TimeSeries& ts, const BaselineSpec& spec);

// How the nominal `order` of a band-pass is read.
//   kPrototype: order of the analog low-pass prototype (band-pass has 2*order poles)
//   kTotal:     total band-pass order (prototype order is order/2)
enum class OrderSemantics { kPrototype, kTotal };

struct BandpassSpec {
  int order = 2;
  double low_hz = 0.5;
  double high_hz = 15.0;
  OrderSemantics semantics = OrderSemantics::kPrototype;

  int prototype_order() const;
};

// One transposed direct-form II biquad, a0 normalised to 1.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
};

struct FilterCoefficients {
  std::vector<Biquad> sections;
};

// Butterworth band-pass via bilinear transform with pre-warped band edges.
FilterCoefficients design_bandpass(const BandpassSpec& spec, double fs_hz);

// True when every section's poles lie strictly inside the unit circle.
bool is_stable(const FilterCoefficients& coeffs);

// Complex frequency response magnitude |H(e^{jw})| at `freq_hz`.
double magnitude_response(const FilterCoefficients& coeffs, double freq_hz, double fs_hz);

// Single causal pass with zero initial state.
std::vector<double> filter_forward(const FilterCoefficients& coeffs, std::span<const double> x);

// Zero-phase forward-backward application with odd-extension padding and
// steady-state initial conditions.
TimeSeries apply_filter(const TimeSeries& ts, const FilterCoefficients& coeffs);

struct PeakList {
  std::vector<std::size_t> indices;
};

// round(0.4 * fs): no two beats closer than a 150 bpm period.
std::size_t default_min_peak_distance(double sampling_rate_hz);

PeakList detect_r_peaks(const TimeSeries& ts, double relative_threshold,
                        std::size_t min_distance_samples);

struct Segment {
  std::vector<double> samples;
  std::size_t center_index = 0;
};

struct SegmentationResult {
  std::vector<Segment> segments;
  std::vector<std::size_t> skipped_peaks;
};

SegmentationResult segment_around_peaks(const TimeSeries& ts, const PeakList& peaks,
                                        std::size_t left = 100, std::size_t right = 100);

// Wraps a segment as a TimeSeries carrying the parent's rate and source.
TimeSeries segment_series(const Segment& segment, const TimeSeries& parent);

}  // namespace esvit
