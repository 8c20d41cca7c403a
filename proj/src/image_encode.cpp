#include "esvit/image_encode.hpp"

#include <algorithm>
#include <cmath>

#include "esvit/error.hpp"

namespace esvit {

namespace {

// Source coordinate of destination pixel centre `d` when mapping n_src -> n_dst.
double source_coordinate(std::size_t d, std::size_t n_src, std::size_t n_dst) {
  const double scale = static_cast<double>(n_src) / static_cast<double>(n_dst);
  const double x = (static_cast<double>(d) + 0.5) * scale - 0.5;
  return std::clamp(x, 0.0, static_cast<double>(n_src - 1));
}

std::vector<double> maybe_log(const std::vector<double>& v, bool log_scale) {
  if (!log_scale) return v;
  std::vector<double> out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [](double x) { return std::log1p(std::max(x, 0.0)); });
  return out;
}

void check_finite(const std::vector<double>& v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) fail(ErrorKind::kInvalidArgument, std::string(what) + " contains non-finite values");
  }
}

}  // namespace

ChannelRaster EncodedImage::channel(std::size_t ch) const {
  ChannelRaster r{height, width, std::vector<double>(height * width)};
  for (std::size_t i = 0; i < height * width; ++i) r.values[i] = pixels[i * kChannels + ch];
  return r;
}

std::vector<double> resample_matrix(const std::vector<double>& m, std::size_t rows, std::size_t cols,
                                    std::size_t h, std::size_t w, Interpolation interp) {
  require(rows >= 1 && cols >= 1 && m.size() == rows * cols, "resample: malformed source matrix");
  require(h >= 1 && w >= 1, "resample: output size must be positive");
  std::vector<double> out(h * w);
  for (std::size_t r = 0; r < h; ++r) {
    const double y = source_coordinate(r, rows, h);
    for (std::size_t c = 0; c < w; ++c) {
      const double x = source_coordinate(c, cols, w);
      double v;
      if (interp == Interpolation::kNearest) {
        const auto yi = static_cast<std::size_t>(std::lround(y));
        const auto xi = static_cast<std::size_t>(std::lround(x));
        v = m[std::min(yi, rows - 1) * cols + std::min(xi, cols - 1)];
      } else {
        const auto y0 = static_cast<std::size_t>(std::floor(y));
        const auto x0 = static_cast<std::size_t>(std::floor(x));
        const std::size_t y1 = std::min(y0 + 1, rows - 1);
        const std::size_t x1 = std::min(x0 + 1, cols - 1);
        const double fy = y - static_cast<double>(y0);
        const double fx = x - static_cast<double>(x0);
        const double top = m[y0 * cols + x0] * (1.0 - fx) + m[y0 * cols + x1] * fx;
        const double bottom = m[y1 * cols + x0] * (1.0 - fx) + m[y1 * cols + x1] * fx;
        v = top * (1.0 - fy) + bottom * fy;
      }
      out[r * w + c] = v;
    }
  }
  return out;
}

void normalize_unit_range(std::vector<double>& values) {
  if (values.empty()) return;
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double range = *hi_it - lo;
  if (!(range > 0.0)) {
    std::fill(values.begin(), values.end(), 0.5);
    return;
  }
  for (double& v : values) v = std::clamp((v - lo) / range, 0.0, 1.0);
}

ChannelRaster rasterize_scalogram(const Scalogram& sg, std::size_t h, std::size_t w, bool log_scale,
                                  Interpolation interp) {
  require(sg.num_scales >= 1 && sg.num_samples >= 1 && sg.magnitudes.size() == sg.num_scales * sg.num_samples,
          "scalogram is empty or malformed");
  check_finite(sg.magnitudes, "scalogram");
  ChannelRaster r{h, w, resample_matrix(maybe_log(sg.magnitudes, log_scale), sg.num_scales, sg.num_samples, h, w, interp)};
  normalize_unit_range(r.values);
  return r;
}

ChannelRaster rasterize_psd(const PsdEstimate& psd, std::size_t h, std::size_t w, bool log_scale) {
  require(!psd.power.empty(), "PSD is empty");
  check_finite(psd.power, "PSD");
  // Descending frequency so that row 0 is the top of the band, as for scalograms.
  std::vector<double> curve(psd.power.rbegin(), psd.power.rend());
  curve = maybe_log(curve, log_scale);
  const std::vector<double> column = resample_matrix(curve, curve.size(), 1, h, 1, Interpolation::kBilinear);
  ChannelRaster r{h, w, std::vector<double>(h * w)};
  for (std::size_t row = 0; row < h; ++row) {
    std::fill_n(r.values.begin() + static_cast<std::ptrdiff_t>(row * w), w, column[row]);
  }
  normalize_unit_range(r.values);
  return r;
}

EncodedImage assemble_rgb(const ChannelRaster& r, const ChannelRaster& g, const ChannelRaster& b) {
  require(r.height == g.height && g.height == b.height && r.width == g.width && g.width == b.width,
          "channel rasters differ in size");
  EncodedImage img;
  img.height = r.height;
  img.width = r.width;
  img.pixels.resize(img.height * img.width * EncodedImage::kChannels);
  const ChannelRaster* planes[] = {&r, &g, &b};
  for (std::size_t ch = 0; ch < EncodedImage::kChannels; ++ch) {
    for (std::size_t i = 0; i < img.height * img.width; ++i) {
      img.pixels[i * EncodedImage::kChannels + ch] = planes[ch]->values[i];
    }
  }
  return img;
}

EncodedImage compose_rgb(const Scalogram& segment_sg, const Scalogram& full_sg, const PsdEstimate& full_psd,
                         std::size_t h, std::size_t w, const EncodeOptions& options) {
  if (segment_sg.source != full_sg.source || full_sg.source != full_psd.source) {
    fail(ErrorKind::kInvalidArgument, "compose_rgb: inputs come from different recordings ('" + segment_sg.source +
                                          "', '" + full_sg.source + "', '" + full_psd.source + "')");
  }
  EncodedImage img = assemble_rgb(rasterize_scalogram(segment_sg, h, w, options.log_scale, options.interpolation),
                                  rasterize_scalogram(full_sg, h, w, options.log_scale, options.interpolation),
                                  rasterize_psd(full_psd, h, w, options.log_scale));
  img.provenance.source = full_sg.source;
  return img;
}

}  // namespace esvit
