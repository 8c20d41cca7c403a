#include "esvit/timefreq.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "esvit/error.hpp"
#include "fft.hpp"

namespace esvit {

namespace {

using Complex = std::complex<double>;

// Wavelet support is truncated at |t / s| <= kSupportSigmas, where the
// Gaussian envelope has fallen to exp(-18).
constexpr double kSupportSigmas = 6.0;

std::size_t half_support(double scale_s, double fs) {
  return static_cast<std::size_t>(std::ceil(kSupportSigmas * scale_s * fs));
}

// Discrete kernel g[j] = (dt / sqrt(s)) psi(j dt / s), j = -M .. M, stored at j + M.
std::vector<Complex> scaled_kernel(double scale_s, double fs, double omega0) {
  const std::size_t m = half_support(scale_s, fs);
  const double dt = 1.0 / fs;
  const double norm = dt / std::sqrt(scale_s);
  std::vector<Complex> g(2 * m + 1);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double j = static_cast<double>(k) - static_cast<double>(m);
    g[k] = norm * morlet_mother(j * dt / scale_s, omega0);
  }
  return g;
}

void validate_spec(const MorletSpec& spec, double fs) {
  require(spec.num_scales >= 2, "Morlet transform needs at least two scales");
  require(spec.center_frequency_cycles > 0.0, "Morlet centre frequency must be positive");
  require(spec.freq_min_hz > 0.0 && spec.freq_min_hz < spec.freq_max_hz,
          "Morlet band requires 0 < freq_min_hz < freq_max_hz");
  if (spec.freq_max_hz > fs / 2.0) {
    fail(ErrorKind::kInvalidArgument, "Morlet band upper edge " + std::to_string(spec.freq_max_hz) +
                                          " Hz exceeds Nyquist " + std::to_string(fs / 2.0) + " Hz");
  }
}

}  // namespace

double MorletSpec::omega0() const { return 2.0 * std::numbers::pi * center_frequency_cycles; }

std::vector<double> morlet_frequencies(const MorletSpec& spec) {
  require(spec.num_scales >= 2, "Morlet transform needs at least two scales");
  std::vector<double> freqs(spec.num_scales);
  const double ratio = std::log(spec.freq_min_hz / spec.freq_max_hz);
  for (std::size_t k = 0; k < spec.num_scales; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(spec.num_scales - 1);
    freqs[k] = spec.freq_max_hz * std::exp(ratio * t);
  }
  freqs.front() = spec.freq_max_hz;
  freqs.back() = spec.freq_min_hz;
  return freqs;
}

double morlet_scale_for_frequency(const MorletSpec& spec, double freq_hz) {
  return spec.omega0() / (2.0 * std::numbers::pi * freq_hz);
}

Complex morlet_mother(double t, double omega0) {
  static const double kNorm = std::pow(std::numbers::pi, -0.25);
  return kNorm * std::exp(-0.5 * t * t) * std::polar(1.0, omega0 * t);
}

Scalogram cwt_morlet(const TimeSeries& ts, const MorletSpec& spec) {
  validate(ts);
  require(ts.size() >= 8, "CWT needs at least 8 samples");
  const double fs = ts.sampling_rate_hz;
  validate_spec(spec, fs);

  Scalogram sg;
  sg.num_scales = spec.num_scales;
  sg.num_samples = ts.size();
  sg.source = ts.source;
  sg.scale_frequencies_hz = morlet_frequencies(spec);
  for (double f : sg.scale_frequencies_hz) {
    const double s = morlet_scale_for_frequency(spec, f);
    sg.scales_s.push_back(s);
    sg.edge_margin_samples.push_back(static_cast<std::size_t>(std::ceil(std::numbers::sqrt2 * s * fs)));
  }

  const std::size_t n = ts.size();
  const std::size_t max_half = half_support(*std::max_element(sg.scales_s.begin(), sg.scales_s.end()), fs);
  const std::size_t length = fft::good_size(n + 2 * max_half + 1);

  std::vector<Complex> padded(length, Complex{});
  std::copy(ts.samples.begin(), ts.samples.end(), padded.begin());
  const std::vector<Complex> spectrum = fft::forward(padded);

  sg.magnitudes.assign(sg.num_scales * n, 0.0);
  std::vector<Complex> kernel_buf(length);
  std::vector<Complex> product(length);
  // Rows are independent; each writes only its own slice of `magnitudes`.
  for (std::size_t row = 0; row < sg.num_scales; ++row) {
    const std::vector<Complex> g = scaled_kernel(sg.scales_s[row], fs, spec.omega0());
    const std::size_t m = (g.size() - 1) / 2;
    std::fill(kernel_buf.begin(), kernel_buf.end(), Complex{});
    std::copy(g.begin(), g.end(), kernel_buf.begin());
    const std::vector<Complex> kernel_spec = fft::forward(kernel_buf);
    for (std::size_t k = 0; k < length; ++k) product[k] = spectrum[k] * kernel_spec[k];
    const std::vector<Complex> conv = fft::inverse(product);
    double* out = sg.magnitudes.data() + row * n;
    for (std::size_t b = 0; b < n; ++b) out[b] = std::abs(conv[b + m]);
  }
  return sg;
}

std::vector<double> cwt_morlet_row_direct(const TimeSeries& ts, const MorletSpec& spec, double scale_s) {
  validate(ts);
  const double fs = ts.sampling_rate_hz;
  const std::vector<Complex> g = scaled_kernel(scale_s, fs, spec.omega0());
  const auto m = static_cast<std::ptrdiff_t>((g.size() - 1) / 2);
  const auto n = static_cast<std::ptrdiff_t>(ts.size());
  std::vector<double> row(ts.size());
  for (std::ptrdiff_t b = 0; b < n; ++b) {
    Complex acc{};
    for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(0, b - m); i <= std::min(n - 1, b + m); ++i) {
      acc += ts.samples[static_cast<std::size_t>(i)] * g[static_cast<std::size_t>(b - i + m)];
    }
    row[static_cast<std::size_t>(b)] = std::abs(acc);
  }
  return row;
}

double PsdEstimate::total_power() const {
  double sum = 0.0;
  for (double p : power) sum += p;
  return sum * resolution_hz();
}

std::vector<double> make_window(WindowKind kind, std::size_t length) {
  std::vector<double> w(length, 1.0);
  if (kind == WindowKind::kHann && length > 1) {
    // Symmetric Hann: w[n] == w[L-1-n].
    const double denom = static_cast<double>(length - 1);
    for (std::size_t i = 0; i < length; ++i) {
      w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / denom);
    }
  }
  return w;
}

PsdEstimate welch_psd(const TimeSeries& ts, const WelchSpec& spec) {
  validate(ts);
  const std::size_t seg_len = spec.segment_length;
  require(seg_len >= 2, "Welch segment length must be at least 2");
  require(spec.overlap_fraction >= 0.0 && spec.overlap_fraction < 1.0,
          "Welch overlap fraction must lie in [0, 1)");
  if (seg_len > ts.size()) {
    fail(ErrorKind::kInvalidArgument, "signal of " + std::to_string(ts.size()) +
                                          " samples is shorter than one Welch segment (" +
                                          std::to_string(seg_len) + ")");
  }
  const double fs = ts.sampling_rate_hz;
  const auto overlap = static_cast<std::size_t>(std::floor(static_cast<double>(seg_len) * spec.overlap_fraction));
  const std::size_t hop = std::max<std::size_t>(1, seg_len - overlap);

  const std::vector<double> window = make_window(spec.window, seg_len);
  double window_energy = 0.0;
  for (double v : window) window_energy += v * v;
  const double scale = 1.0 / (fs * window_energy);

  const std::size_t bins = seg_len / 2 + 1;
  std::vector<double> acc(bins, 0.0);
  std::vector<double> buffer(seg_len);
  std::size_t count = 0;
  for (std::size_t start = 0; start + seg_len <= ts.size(); start += hop) {
    for (std::size_t i = 0; i < seg_len; ++i) buffer[i] = ts.samples[start + i] * window[i];
    const auto spectrum = fft::forward_real(buffer);
    for (std::size_t k = 0; k < bins; ++k) acc[k] += std::norm(spectrum[k]);
    ++count;
  }

  PsdEstimate psd;
  psd.source = ts.source;
  psd.frequencies_hz.resize(bins);
  psd.power.resize(bins);
  const bool even = seg_len % 2 == 0;
  for (std::size_t k = 0; k < bins; ++k) {
    psd.frequencies_hz[k] = static_cast<double>(k) * fs / static_cast<double>(seg_len);
    double p = acc[k] * scale / static_cast<double>(count);
    const bool unpaired = k == 0 || (even && k == bins - 1);
    if (!unpaired) p *= 2.0;
    psd.power[k] = p;
  }
  return psd;
}

}  // namespace esvit
