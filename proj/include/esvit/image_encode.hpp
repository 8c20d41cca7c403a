#pragma once

// Three-channel image composition from time-frequency products.
//   channel 0: per-segment scalogram
//   channel 1: full-recording scalogram
//   channel 2: full-recording PSD, frequency along rows, replicated along columns

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "esvit/timefreq.hpp"

namespace esvit {

inline constexpr const char* kChannelLayout = "R=segment_cwt,G=recording_cwt,B=recording_psd";

enum class Interpolation { kBilinear, kNearest };

// Row-major [height x width] plane in [0, 1].
struct ChannelRaster {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  double at(std::size_t r, std::size_t c) const { return values[r * width + c]; }
};

struct ImageProvenance {
  std::string source;  // recording identifier
  std::string subject_id;
  std::size_t segment_index = 0;
  int label = -1;
};

// Interleaved [height x width x 3] pixels in [0, 1].
struct EncodedImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;
  ImageProvenance provenance;

  static constexpr std::size_t kChannels = 3;

  double at(std::size_t r, std::size_t c, std::size_t ch) const {
    return pixels[(r * width + c) * kChannels + ch];
  }
  double& at(std::size_t r, std::size_t c, std::size_t ch) {
    return pixels[(r * width + c) * kChannels + ch];
  }
  ChannelRaster channel(std::size_t ch) const;
};

struct EncodeOptions {
  bool log_scale = true;
  Interpolation interpolation = Interpolation::kBilinear;
};

// Resamples a row-major [rows x cols] matrix onto [h x w] using pixel-centre alignment.
std::vector<double> resample_matrix(const std::vector<double>& m, std::size_t rows, std::size_t cols,
                                    std::size_t h, std::size_t w, Interpolation interp);

// Min-max to [0, 1]; a constant input maps to 0.5 everywhere.
void normalize_unit_range(std::vector<double>& values);

ChannelRaster rasterize_scalogram(const Scalogram& sg, std::size_t h, std::size_t w, bool log_scale,
                                  Interpolation interp = Interpolation::kBilinear);

// Row 0 holds the highest frequency, matching scalogram row order.
ChannelRaster rasterize_psd(const PsdEstimate& psd, std::size_t h, std::size_t w, bool log_scale = true);

EncodedImage compose_rgb(const Scalogram& segment_sg, const Scalogram& full_sg, const PsdEstimate& full_psd,
                         std::size_t h, std::size_t w, const EncodeOptions& options = {});

// Builds an image from three pre-rasterised planes of identical size.
EncodedImage assemble_rgb(const ChannelRaster& r, const ChannelRaster& g, const ChannelRaster& b);

// 8-bit RGB PNG.
void write_png(const EncodedImage& img, const std::filesystem::path& path);
EncodedImage read_png(const std::filesystem::path& path);

}  // namespace esvit
