#pragma once

// Thin RAII layer over FFTW. Plans use FFTW_ESTIMATE so that the chosen
// algorithm, and hence every output bit, does not depend on timing.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace esvit::fft {

// Smallest n' >= n whose only prime factors are 2, 3 and 5.
std::size_t good_size(std::size_t n);

// Forward complex DFT (unnormalised).
std::vector<std::complex<double>> forward(std::span<const std::complex<double>> x);

// Inverse complex DFT, normalised by 1/n.
std::vector<std::complex<double>> inverse(std::span<const std::complex<double>> x);

// Real-input forward DFT, returns the n/2 + 1 non-negative-frequency bins.
std::vector<std::complex<double>> forward_real(std::span<const double> x);

}  // namespace esvit::fft
