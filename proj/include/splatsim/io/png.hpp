#pragma once

// Thin libpng wrappers: 8-bit RGB output, 8/16-bit grayscale id masks.

#include "splatsim/io/raster.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace splatsim::png {

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.string().c_str(), mode));
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  return f;
}

inline void write_rows(const std::filesystem::path& path, int width, int height, int bit_depth, int color_type,
                       const std::vector<png_byte>& bytes, std::size_t row_stride) {
  auto file = open(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng error writing '" + path.string() + "'");
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, png_uint_32(width), png_uint_32(height), bit_depth, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(bytes.data() + std::size_t(y) * row_stride));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace detail

inline std::uint8_t to_u8(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return std::uint8_t(std::lround(c * 255.0f));
}

inline void write_rgb8(const std::filesystem::path& path, const Image& img) {
  std::vector<png_byte> bytes(img.size() * 3);
  for (std::size_t i = 0; i < img.size(); ++i)
    for (int c = 0; c < 3; ++c) bytes[i * 3 + std::size_t(c)] = to_u8(img.data[i][std::size_t(c)]);
  detail::write_rows(path, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, bytes, std::size_t(img.width) * 3);
}

/// Writes a 16-bit grayscale PNG (big-endian samples as the format requires).
inline void write_gray16(const std::filesystem::path& path, const IdMask& mask) {
  std::vector<png_byte> bytes(mask.size() * 2);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask.data[i] > 0xFFFFu) throw DataError("mask id " + std::to_string(mask.data[i]) + " exceeds 16 bits");
    bytes[2 * i] = png_byte(mask.data[i] >> 8);
    bytes[2 * i + 1] = png_byte(mask.data[i] & 0xFF);
  }
  detail::write_rows(path, mask.width, mask.height, 16, PNG_COLOR_TYPE_GRAY, bytes, std::size_t(mask.width) * 2);
}

/// Reads a single-channel 8- or 16-bit PNG verbatim (no gamma or scaling).
inline IdMask read_gray(const std::filesystem::path& path) {
  auto file = detail::open(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw FormatError("'" + path.string() + "' is not a PNG file");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  IdMask mask;
  std::vector<png_byte> row;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("libpng error reading '" + path.string() + "'");
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color_type = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  if (color_type != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("'" + path.string() + "' is not single-channel grayscale");
  }
  if (bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);

  const int w = int(png_get_image_width(png, info));
  const int h = int(png_get_image_height(png, info));
  const int depth = png_get_bit_depth(png, info);
  mask = IdMask(w, h);
  row.resize(png_get_rowbytes(png, info));
  for (int y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < w; ++x) {
      mask(x, y) = depth == 16 ? (ObjectId(row[2 * std::size_t(x)]) << 8) | ObjectId(row[2 * std::size_t(x) + 1])
                               : ObjectId(row[std::size_t(x)]);
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return mask;
}

/// Reads an 8-bit RGB PNG into a float image; used by tests and tooling.
inline Image read_rgb8(const std::filesystem::path& path) {
  auto file = detail::open(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  Image img;
  std::vector<png_byte> row;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("libpng error reading '" + path.string() + "'");
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_RGB || png_get_bit_depth(png, info) != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("'" + path.string() + "' is not 8-bit RGB");
  }
  const int w = int(png_get_image_width(png, info));
  const int h = int(png_get_image_height(png, info));
  img = Image(w, h);
  row.resize(png_get_rowbytes(png, info));
  for (int y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) img(x, y)[std::size_t(c)] = float(row[3 * std::size_t(x) + std::size_t(c)]) / 255.0f;
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

}  // namespace splatsim::png
