#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "discsplat/core/errors.hpp"
#include "discsplat/core/se3.hpp"

namespace discsplat {

/// Row-major H x W raster.
template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, const T& fill = T{}) : width(w), height(h), data(static_cast<size_t>(w) * h, fill) {}

  size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
  size_t index(int x, int y) const { return static_cast<size_t>(y) * width + x; }

  T& operator()(int x, int y) { return data[index(x, y)]; }
  const T& operator()(int x, int y) const { return data[index(x, y)]; }
  T& operator[](size_t i) { return data[i]; }
  const T& operator[](size_t i) const { return data[i]; }

  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }

  template <typename U>
  bool same_shape(const Image<U>& other) const {
    return width == other.width && height == other.height;
  }
};

using DepthImage = Image<double>;
using ColorImage = Image<Vec3>;
using Mask = Image<uint8_t>;

template <typename T, typename U>
void require_same_shape(const Image<T>& a, const Image<U>& b, const char* what) {
  if (!a.same_shape(b)) throw InvalidInput(std::string(what) + ": resolution mismatch");
}

inline size_t count(const Mask& m) {
  size_t n = 0;
  for (uint8_t v : m.data) n += v != 0;
  return n;
}

/// Registered color + metric depth. Depth <= 0 marks invalid pixels.
struct RGBDFrame {
  ColorImage color;
  DepthImage depth;
  int frame_index = 0;
  double timestamp = 0.0;

  static bool valid_depth(double d) { return d > 0.0; }
};

}  // namespace discsplat
