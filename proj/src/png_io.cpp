#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "esvit/error.hpp"
#include "esvit/image_encode.hpp"

namespace esvit {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) {
    const ErrorKind kind =
        (mode[0] == 'r' && !std::filesystem::exists(path)) ? ErrorKind::kMissingInput : ErrorKind::kIo;
    fail(kind, "cannot open '" + path.string() + "'");
  }
  return f;
}

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

// Only trivially destructible locals live across setjmp here.
bool write_rgb_rows(std::FILE* file, const std::uint8_t* bytes, png_uint_32 width, png_uint_32 height) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (png == nullptr || info == nullptr) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, file);
  png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(width) * EncodedImage::kChannels;
  for (png_uint_32 r = 0; r < height; ++r) png_write_row(png, bytes + r * stride);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace

void write_png(const EncodedImage& img, const std::filesystem::path& path) {
  require(img.height > 0 && img.width > 0 && img.pixels.size() == img.height * img.width * EncodedImage::kChannels,
          "write_png: malformed image");
  std::vector<std::uint8_t> bytes(img.pixels.size());
  std::transform(img.pixels.begin(), img.pixels.end(), bytes.begin(), quantize);
  FilePtr file = open_file(path, "wb");
  if (!write_rgb_rows(file.get(), bytes.data(), static_cast<png_uint_32>(img.width),
                      static_cast<png_uint_32>(img.height))) {
    fail(ErrorKind::kIo, "failed writing PNG '" + path.string() + "'");
  }
  if (std::fflush(file.get()) != 0) fail(ErrorKind::kIo, "failed flushing '" + path.string() + "'");
}

EncodedImage read_png(const std::filesystem::path& path) {
  FilePtr file = open_file(path, "rb");
  png_byte signature[8];
  if (std::fread(signature, 1, 8, file.get()) != 8 || png_sig_cmp(signature, 0, 8) != 0) {
    fail(ErrorKind::kParse, "'" + path.string() + "' is not a PNG file");
  }

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (png == nullptr || info == nullptr) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::kIo, "libpng initialisation failed for '" + path.string() + "'");
  }

  EncodedImage img;
  std::vector<std::uint8_t> row_bytes;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::kParse, "corrupt PNG '" + path.string() + "'");
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  // Normalise every colour type to 8-bit RGB.
  const png_byte color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
    if (png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
    png_set_gray_to_rgb(png);
  }
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  img.width = png_get_image_width(png, info);
  img.height = png_get_image_height(png, info);
  row_bytes.resize(png_get_rowbytes(png, info));
  if (row_bytes.size() != img.width * EncodedImage::kChannels) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::kParse, "unsupported PNG layout in '" + path.string() + "'");
  }
  img.pixels.resize(img.height * img.width * EncodedImage::kChannels);
  for (std::size_t r = 0; r < img.height; ++r) {
    png_read_row(png, row_bytes.data(), nullptr);
    for (std::size_t i = 0; i < row_bytes.size(); ++i) {
      img.pixels[r * row_bytes.size() + i] = static_cast<double>(row_bytes[i]) / 255.0;
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

}  // namespace esvit
