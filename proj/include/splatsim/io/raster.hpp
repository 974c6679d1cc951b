#pragma once

#include "splatsim/core.hpp"

#include <array>
#include <cassert>
#include <limits>
#include <vector>

namespace splatsim {

/// Row-major H×W raster. Pixel (x, y) is (column, row).
template <typename T>
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Raster() = default;
  Raster(int w, int h, T fill = T{}) : width(w), height(h), data(std::size_t(w) * std::size_t(h), fill) {}

  [[nodiscard]] bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  [[nodiscard]] std::size_t index(int x, int y) const { return std::size_t(y) * std::size_t(width) + std::size_t(x); }
  T& operator()(int x, int y) {
    assert(contains(x, y));
    return data[index(x, y)];
  }
  const T& operator()(int x, int y) const {
    assert(contains(x, y));
    return data[index(x, y)];
  }
  [[nodiscard]] std::size_t size() const { return data.size(); }
  friend bool operator==(const Raster&, const Raster&) = default;
};

/// Per-pixel object ids; 0 is background. Binary masks use {0, 1}.
using IdMask = Raster<ObjectId>;

/// Linear RGB in [0, 1].
using Rgb = std::array<float, 3>;
using Image = Raster<Rgb>;

/// Per-pixel surface depth (camera-space z). Pixels without a surface hold `sentinel`.
struct DepthMap {
  static constexpr float kNoSurface = -1.0f;

  Raster<float> depth;
  float sentinel = kNoSurface;

  DepthMap() = default;
  DepthMap(int w, int h, float sentinel_ = kNoSurface) : depth(w, h, sentinel_), sentinel(sentinel_) {}

  [[nodiscard]] int width() const { return depth.width; }
  [[nodiscard]] int height() const { return depth.height; }
  [[nodiscard]] bool has_surface(int x, int y) const { return depth(x, y) != sentinel; }
  float& operator()(int x, int y) { return depth(x, y); }
  float operator()(int x, int y) const { return depth(x, y); }
};

}  // namespace splatsim
