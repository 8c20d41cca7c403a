#pragma once

// Time-frequency analysis: complex Morlet CWT scalograms and Welch PSD.

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "esvit/signal_core.hpp"

namespace esvit {

struct MorletSpec {
  std::size_t num_scales = 50;
  // omega0 / (2 pi). 1.0 gives omega0 = 2 pi; 6 / (2 pi) selects the common omega0 = 6.
  double center_frequency_cycles = 1.0;
  double freq_min_hz = 0.5;
  double freq_max_hz = 20.0;

  double omega0() const;
};

// Row-major [num_scales x num_samples] magnitude matrix. Rows run from the
// highest pseudo-frequency to the lowest.
struct Scalogram {
  std::size_t num_scales = 0;
  std::size_t num_samples = 0;
  std::vector<double> magnitudes;
  std::vector<double> scale_frequencies_hz;
  std::vector<double> scales_s;
  // Per-row edge-contamination half-width (cone of influence), in samples.
  std::vector<std::size_t> edge_margin_samples;
  std::string source;

  double at(std::size_t row, std::size_t col) const { return magnitudes[row * num_samples + col]; }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(magnitudes).subspan(r * num_samples, num_samples);
  }
};

// Pseudo-frequencies, log-spaced and descending from freq_max_hz to freq_min_hz.
std::vector<double> morlet_frequencies(const MorletSpec& spec);

// Wavelet scale (seconds) whose pseudo-frequency is `freq_hz`.
double morlet_scale_for_frequency(const MorletSpec& spec, double freq_hz);

// psi(t) = pi^{-1/4} exp(i omega0 t) exp(-t^2 / 2)
std::complex<double> morlet_mother(double t, double omega0);

// FFT-based linear convolution (zero padded) with the L2-normalised scaled wavelets.
Scalogram cwt_morlet(const TimeSeries& ts, const MorletSpec& spec);

// O(N * M) direct-summation reference for one scale row; used to cross-check the FFT path.
std::vector<double> cwt_morlet_row_direct(const TimeSeries& ts, const MorletSpec& spec, double scale_s);

enum class WindowKind { kHann, kRectangular };

struct WelchSpec {
  std::size_t segment_length = 256;
  double overlap_fraction = 0.5;
  WindowKind window = WindowKind::kHann;
};

struct PsdEstimate {
  std::vector<double> frequencies_hz;
  std::vector<double> power;  // amplitude^2 / Hz, one-sided
  std::string source;

  double resolution_hz() const {
    return frequencies_hz.size() > 1 ? frequencies_hz[1] - frequencies_hz[0] : 0.0;
  }
  // Sum of power * delta-f over all bins.
  double total_power() const;
};

std::vector<double> make_window(WindowKind kind, std::size_t length);

PsdEstimate welch_psd(const TimeSeries& ts, const WelchSpec& spec);

}  // namespace esvit
