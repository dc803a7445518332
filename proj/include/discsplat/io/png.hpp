#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "discsplat/core/errors.hpp"
#include "discsplat/core/image.hpp"

namespace discsplat::png {

/// Raw decoded PNG: row-major samples, `channels` per pixel, 8 or 16 bits.
struct Raster {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<uint16_t> samples;
};

namespace detail {
struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using File = std::unique_ptr<FILE, FileCloser>;
}  // namespace detail

inline Raster read(const std::string& path) {
  detail::File fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng init failed");
  }
  Raster r;
  std::vector<png_bytep> rows;
  std::vector<uint8_t> buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("invalid PNG: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const int color_type = png_get_color_type(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_bit_depth(png, info) == 16) png_set_swap(png);
  png_read_update_info(png, info);
  r.width = static_cast<int>(png_get_image_width(png, info));
  r.height = static_cast<int>(png_get_image_height(png, info));
  r.channels = png_get_channels(png, info);
  r.bit_depth = png_get_bit_depth(png, info);
  const size_t stride = png_get_rowbytes(png, info);
  buffer.resize(stride * r.height);
  rows.resize(r.height);
  for (int y = 0; y < r.height; ++y) rows[y] = buffer.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  r.samples.resize(static_cast<size_t>(r.width) * r.height * r.channels);
  for (size_t i = 0; i < r.samples.size(); ++i) {
    if (r.bit_depth == 16) {
      uint16_t v;
      std::memcpy(&v, buffer.data() + 2 * i, 2);
      r.samples[i] = v;
    } else {
      r.samples[i] = buffer[i];
    }
  }
  return r;
}

inline void write(const std::string& path, int width, int height, int channels, int bit_depth,
                  const std::vector<uint16_t>& samples) {
  detail::File fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot write " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng init failed");
  }
  const size_t bytes = bit_depth == 16 ? 2 : 1;
  const size_t stride = static_cast<size_t>(width) * channels * bytes;
  std::vector<uint8_t> buffer(stride * height);
  for (size_t i = 0; i < samples.size(); ++i) {
    if (bytes == 2) {
      buffer[2 * i] = static_cast<uint8_t>(samples[i] >> 8);
      buffer[2 * i + 1] = static_cast<uint8_t>(samples[i] & 0xff);
    } else {
      buffer[i] = static_cast<uint8_t>(samples[i]);
    }
  }
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) rows[y] = buffer.data() + y * stride;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG encoding failed: " + path);
  }
  png_init_io(png, fp.get());
  const int type = channels == 1 ? PNG_COLOR_TYPE_GRAY : (channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_RGBA);
  png_set_IHDR(png, info, width, height, bit_depth, type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

/// 8-bit RGB in [0,1]; values are rounded and clamped.
inline void write_color(const std::string& path, const ColorImage& img) {
  std::vector<uint16_t> s(img.size() * 3);
  for (size_t i = 0; i < img.size(); ++i)
    for (int c = 0; c < 3; ++c) s[3 * i + c] = static_cast<uint16_t>(std::lround(std::clamp(img[i][c], 0.0, 1.0) * 255.0));
  write(path, img.width, img.height, 3, 8, s);
}

inline ColorImage read_color(const std::string& path) {
  Raster r = read(path);
  const double scale = r.bit_depth == 16 ? 65535.0 : 255.0;
  ColorImage img(r.width, r.height);
  for (size_t i = 0; i < img.size(); ++i) {
    const uint16_t* p = r.samples.data() + i * r.channels;
    img[i] = r.channels >= 3 ? Vec3(Vec3(p[0], p[1], p[2]) / scale) : Vec3(Vec3::Constant(p[0] / scale));
  }
  return img;
}

/// 16-bit depth: stored value = round(meters * depth_scale); invalid -> 0.
inline void write_depth(const std::string& path, const DepthImage& img, double depth_scale) {
  std::vector<uint16_t> s(img.size());
  for (size_t i = 0; i < img.size(); ++i) {
    const double v = img[i] > 0.0 ? std::round(img[i] * depth_scale) : 0.0;
    if (v > 65535.0) throw IoError("depth exceeds 16-bit range: " + path);
    s[i] = static_cast<uint16_t>(v);
  }
  write(path, img.width, img.height, 1, 16, s);
}

inline DepthImage read_depth(const std::string& path, double depth_scale) {
  Raster r = read(path);
  if (r.channels != 1) throw IoError("depth PNG must be single channel: " + path);
  DepthImage img(r.width, r.height);
  for (size_t i = 0; i < img.size(); ++i) img[i] = r.samples[i] / depth_scale;
  return img;
}

/// Grayscale visualization of a scalar image over [lo, hi].
inline void write_scalar(const std::string& path, const Image<double>& img, double lo, double hi) {
  std::vector<uint16_t> s(img.size());
  for (size_t i = 0; i < img.size(); ++i) {
    const double t = hi > lo ? (img[i] - lo) / (hi - lo) : 0.0;
    s[i] = static_cast<uint16_t>(std::lround(std::clamp(t, 0.0, 1.0) * 255.0));
  }
  write(path, img.width, img.height, 1, 8, s);
}

}  // namespace discsplat::png
