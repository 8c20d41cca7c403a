#include "esvit/signal_core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <set>

#include "esvit/error.hpp"

namespace esvit {

namespace {

using Complex = std::complex<double>;

constexpr double kImagTolerance = 1e-12;

Complex bilinear(Complex s, double fs) { return (2.0 * fs + s) / (2.0 * fs - s); }

double warp(double freq_hz, double fs) {
  return 2.0 * fs * std::tan(std::numbers::pi * freq_hz / fs);
}

std::vector<double> reversed(std::span<const double> x) { return {x.rbegin(), x.rend()}; }

// Steady-state per-section state for a unit step, scaled by the DC gain of
// the preceding sections.
std::vector<std::array<double, 2>> steady_state(const FilterCoefficients& coeffs) {
  std::vector<std::array<double, 2>> zi;
  zi.reserve(coeffs.sections.size());
  double input_level = 1.0;
  for (const Biquad& s : coeffs.sections) {
    const double gain = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    const double z2 = (s.b2 - s.a2 * gain) * input_level;
    const double z1 = (s.b1 - s.a1 * gain) * input_level + z2;
    zi.push_back({z1, z2});
    input_level *= gain;
  }
  return zi;
}

std::vector<double> run_sections(const FilterCoefficients& coeffs, std::span<const double> x,
                                 const std::vector<std::array<double, 2>>* zi, double zi_scale) {
  std::vector<double> y(x.begin(), x.end());
  for (std::size_t k = 0; k < coeffs.sections.size(); ++k) {
    const Biquad& s = coeffs.sections[k];
    double z1 = zi ? (*zi)[k][0] * zi_scale : 0.0;
    double z2 = zi ? (*zi)[k][1] * zi_scale : 0.0;
    for (double& v : y) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
  return y;
}

}  // namespace

void validate(const TimeSeries& ts) {
  require(ts.sampling_rate_hz > 0.0 && std::isfinite(ts.sampling_rate_hz),
          "sampling rate must be positive");
  require(!ts.samples.empty(), "time series is empty");
  for (std::size_t i = 0; i < ts.samples.size(); ++i) {
    if (!std::isfinite(ts.samples[i])) {
      fail(ErrorKind::kInvalidArgument, "non-finite sample at index " + std::to_string(i));
    }
  }
}

std::size_t baseline_window_samples(const BaselineSpec& spec, double sampling_rate_hz) {
  require(spec.window_s > 0.0, "baseline window must be positive");
  return static_cast<std::size_t>(std::floor(spec.window_s * sampling_rate_hz));
}

TimeSeries remove_baseline(const TimeSeries& ts, const BaselineSpec& spec) {
  validate(ts);
  const std::size_t window = baseline_window_samples(spec, ts.sampling_rate_hz);
  require(window >= 1, "baseline window shorter than one sample");
  if (window > ts.size()) {
    fail(ErrorKind::kInvalidArgument,
         "baseline window of " + std::to_string(window) + " samples exceeds signal length " +
             std::to_string(ts.size()));
  }
  const double baseline =
      std::accumulate(ts.samples.begin(), ts.samples.begin() + static_cast<std::ptrdiff_t>(window), 0.0) /
      static_cast<double>(window);

  TimeSeries out{{}, ts.sampling_rate_hz, ts.source};
  const std::size_t first = spec.discard_window ? window : 0;
  out.samples.reserve(ts.size() - first);
  for (std::size_t i = first; i < ts.size(); ++i) out.samples.push_back(ts.samples[i] - baseline);
  if (out.samples.empty()) fail(ErrorKind::kInvalidArgument, "nothing left after discarding baseline window");
  return out;
}

int BandpassSpec::prototype_order() const {
  if (semantics == OrderSemantics::kPrototype) return order;
  require(order % 2 == 0, "total band-pass order must be even");
  return order / 2;
}

FilterCoefficients design_bandpass(const BandpassSpec& spec, double fs_hz) {
  require(fs_hz > 0.0, "sampling rate must be positive");
  require(spec.order >= 1, "filter order must be positive");
  const double nyquist = fs_hz / 2.0;
  require(spec.low_hz > 0.0 && spec.low_hz < spec.high_hz,
          "band-pass requires 0 < low_hz < high_hz");
  if (spec.high_hz >= nyquist) {
    fail(ErrorKind::kInvalidArgument, "band-pass cutoff " + std::to_string(spec.high_hz) +
                                          " Hz is not below Nyquist " + std::to_string(nyquist) + " Hz");
  }
  const int n = spec.prototype_order();
  require(n >= 1, "prototype order must be positive");

  const double w_low = warp(spec.low_hz, fs_hz);
  const double w_high = warp(spec.high_hz, fs_hz);
  const double w0_sq = w_low * w_high;
  const double bandwidth = w_high - w_low;

  std::vector<Complex> upper;  // complex poles with Im > 0
  std::vector<double> real_poles;
  for (int k = 0; k < n; ++k) {
    const Complex p = std::polar(1.0, std::numbers::pi * (2.0 * k + n + 1) / (2.0 * n));
    const Complex half = p * bandwidth / 2.0;
    const Complex root = std::sqrt(half * half - w0_sq);
    for (const Complex s : {half + root, half - root}) {
      const Complex z = bilinear(s, fs_hz);
      if (std::abs(z.imag()) <= kImagTolerance) {
        real_poles.push_back(z.real());
      } else if (z.imag() > 0.0) {
        upper.push_back(z);
      }
    }
  }
  std::sort(real_poles.begin(), real_poles.end());

  FilterCoefficients coeffs;
  for (const Complex& z : upper) {
    coeffs.sections.push_back({1.0, 0.0, -1.0, -2.0 * z.real(), std::norm(z)});
  }
  for (std::size_t i = 0; i + 1 < real_poles.size(); i += 2) {
    const double r1 = real_poles[i];
    const double r2 = real_poles[i + 1];
    coeffs.sections.push_back({1.0, 0.0, -1.0, -(r1 + r2), r1 * r2});
  }
  if (coeffs.sections.size() != static_cast<std::size_t>(n)) {
    fail(ErrorKind::kInvariant, "band-pass pole pairing produced an unexpected section count");
  }

  // Unity gain at the (digital image of the) geometric centre frequency.
  const double center_hz = fs_hz / std::numbers::pi * std::atan(std::sqrt(w0_sq) / (2.0 * fs_hz));
  const double gain = magnitude_response(coeffs, center_hz, fs_hz);
  Biquad& first = coeffs.sections.front();
  first.b0 /= gain;
  first.b1 /= gain;
  first.b2 /= gain;
  return coeffs;
}

bool is_stable(const FilterCoefficients& coeffs) {
  for (const Biquad& s : coeffs.sections) {
    const Complex disc = std::sqrt(Complex(s.a1 * s.a1 - 4.0 * s.a2, 0.0));
    const Complex r1 = (-s.a1 + disc) / 2.0;
    const Complex r2 = (-s.a1 - disc) / 2.0;
    if (!(std::abs(r1) < 1.0 && std::abs(r2) < 1.0)) return false;
    for (double c : {s.b0, s.b1, s.b2, s.a1, s.a2}) {
      if (!std::isfinite(c)) return false;
    }
  }
  return true;
}

double magnitude_response(const FilterCoefficients& coeffs, double freq_hz, double fs_hz) {
  const double w = 2.0 * std::numbers::pi * freq_hz / fs_hz;
  const Complex z1 = std::polar(1.0, -w);
  const Complex z2 = z1 * z1;
  Complex h = 1.0;
  for (const Biquad& s : coeffs.sections) {
    h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
  }
  return std::abs(h);
}

std::vector<double> filter_forward(const FilterCoefficients& coeffs, std::span<const double> x) {
  return run_sections(coeffs, x, nullptr, 0.0);
}

TimeSeries apply_filter(const TimeSeries& ts, const FilterCoefficients& coeffs) {
  if (ts.samples.empty()) fail(ErrorKind::kInvalidArgument, "cannot filter an empty signal");
  validate(ts);
  require(!coeffs.sections.empty(), "filter has no sections");
  require(is_stable(coeffs), "filter is not stable");

  const std::span<const double> x = ts.samples;
  const std::size_t n = x.size();
  const std::size_t padlen = std::min<std::size_t>(3 * (2 * coeffs.sections.size() + 1), n - 1);

  std::vector<double> ext;
  ext.reserve(n + 2 * padlen);
  for (std::size_t i = padlen; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= padlen; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  const auto zi = steady_state(coeffs);
  std::vector<double> forward = run_sections(coeffs, ext, &zi, ext.front());
  std::vector<double> back_in = reversed(forward);
  std::vector<double> backward = run_sections(coeffs, back_in, &zi, back_in.front());
  std::reverse(backward.begin(), backward.end());

  TimeSeries out{{}, ts.sampling_rate_hz, ts.source};
  out.samples.assign(backward.begin() + static_cast<std::ptrdiff_t>(padlen),
                     backward.begin() + static_cast<std::ptrdiff_t>(padlen + n));
  return out;
}

std::size_t default_min_peak_distance(double sampling_rate_hz) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.4 * sampling_rate_hz)));
}

PeakList detect_r_peaks(const TimeSeries& ts, double relative_threshold,
                        std::size_t min_distance_samples) {
  validate(ts);
  require(relative_threshold > 0.0 && relative_threshold <= 1.0,
          "relative threshold must lie in (0, 1]");
  require(min_distance_samples >= 1, "minimum peak distance must be at least one sample");

  const std::vector<double>& x = ts.samples;
  const std::size_t n = x.size();
  PeakList result;
  if (n < 3) return result;

  const double threshold = relative_threshold * *std::max_element(x.begin(), x.end());

  // Strict local maxima; a plateau reports its leftmost sample.
  std::vector<std::size_t> candidates;
  std::size_t i = 1;
  while (i + 1 < n) {
    if (x[i] > x[i - 1]) {
      std::size_t j = i;
      while (j + 1 < n && x[j + 1] == x[i]) ++j;
      if (j + 1 < n && x[j + 1] < x[i] && x[i] >= threshold) candidates.push_back(i);
      i = j + 1;
    } else {
      ++i;
    }
  }

  std::vector<std::size_t> by_height = candidates;
  std::stable_sort(by_height.begin(), by_height.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] > x[b]; });
  std::set<std::size_t> kept;
  for (std::size_t idx : by_height) {
    auto next = kept.lower_bound(idx);
    if (next != kept.end() && *next - idx < min_distance_samples) continue;
    if (next != kept.begin() && idx - *std::prev(next) < min_distance_samples) continue;
    kept.insert(idx);
  }
  result.indices.assign(kept.begin(), kept.end());
  return result;
}

SegmentationResult segment_around_peaks(const TimeSeries& ts, const PeakList& peaks,
                                        std::size_t left, std::size_t right) {
  require(left + right >= 1, "segment length must be positive");
  SegmentationResult result;
  const std::size_t n = ts.size();
  for (std::size_t p : peaks.indices) {
    if (p < left || p + right > n) {
      result.skipped_peaks.push_back(p);
      continue;
    }
    Segment seg;
    seg.center_index = p;
    seg.samples.assign(ts.samples.begin() + static_cast<std::ptrdiff_t>(p - left),
                       ts.samples.begin() + static_cast<std::ptrdiff_t>(p + right));
    result.segments.push_back(std::move(seg));
  }
  return result;
}

TimeSeries segment_series(const Segment& segment, const TimeSeries& parent) {
  return TimeSeries{segment.samples, parent.sampling_rate_hz, parent.source};
}

}  // namespace esvit
