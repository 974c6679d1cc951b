#pragma once

// Mask IoU and Boundary IoU.
//
// The boundary band of a binary mask M with radius r is the set of pixels in
// M whose Euclidean distance to the nearest pixel outside M is at most r.
// Pixels beyond the image border count as outside.

#include "splatsim/io/raster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

namespace splatsim {

namespace metrics_detail {

// 1D squared distance transform of a sampled function (lower envelope of
// parabolas). Every line handed in here contains at least one zero sample.
inline void edt_1d(const double* f, int n, double* d, std::vector<int>& v, std::vector<double>& z) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  v.assign(std::size_t(n), 0);
  z.assign(std::size_t(n) + 1, 0.0);
  auto intersect = [&](int q, int p) { return ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p)); };
  std::size_t k = 0;
  z[0] = -kInf;
  z[1] = kInf;
  for (int q = 1; q < n; ++q) {
    double s = intersect(q, v[k]);
    while (s <= z[k]) {
      --k;
      s = intersect(q, v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    d[q] = double(q - v[k]) * double(q - v[k]) + f[v[k]];
  }
}

}  // namespace metrics_detail

/// Squared Euclidean distance from each pixel of `fg` (nonzero) to the
/// nearest background pixel, with a one-pixel background frame around the image.
inline Raster<double> squared_distance_to_background(const IdMask& fg) {
  constexpr double kFar = 1e20;
  const int W = fg.width + 2, H = fg.height + 2;
  std::vector<double> grid(std::size_t(W) * std::size_t(H), 0.0);
  for (int y = 0; y < fg.height; ++y)
    for (int x = 0; x < fg.width; ++x)
      grid[std::size_t(y + 1) * std::size_t(W) + std::size_t(x + 1)] = fg(x, y) ? kFar : 0.0;

  std::vector<double> f(std::size_t(std::max(W, H))), d(f.size());
  std::vector<int> v;
  std::vector<double> z;
  for (int x = 0; x < W; ++x) {
    for (int y = 0; y < H; ++y) f[std::size_t(y)] = grid[std::size_t(y) * std::size_t(W) + std::size_t(x)];
    metrics_detail::edt_1d(f.data(), H, d.data(), v, z);
    for (int y = 0; y < H; ++y) grid[std::size_t(y) * std::size_t(W) + std::size_t(x)] = d[std::size_t(y)];
  }
  for (int y = 0; y < H; ++y) {
    double* row = grid.data() + std::size_t(y) * std::size_t(W);
    std::copy(row, row + W, f.begin());
    metrics_detail::edt_1d(f.data(), W, d.data(), v, z);
    std::copy(d.begin(), d.begin() + W, row);
  }
  Raster<double> out(fg.width, fg.height);
  for (int y = 0; y < fg.height; ++y)
    for (int x = 0; x < fg.width; ++x) out(x, y) = grid[std::size_t(y + 1) * std::size_t(W) + std::size_t(x + 1)];
  return out;
}

/// Pixels of `fg` within `radius` of its boundary.
inline IdMask boundary_band(const IdMask& fg, double radius) {
  const auto d2 = squared_distance_to_background(fg);
  IdMask band(fg.width, fg.height, 0);
  const double r2 = radius * radius;
  for (std::size_t i = 0; i < fg.size(); ++i) band.data[i] = (fg.data[i] != 0 && d2.data[i] <= r2) ? 1 : 0;
  return band;
}

inline void check_same_size(const IdMask& a, const IdMask& b) {
  if (a.width != b.width || a.height != b.height)
    throw DataError("mask size mismatch: " + std::to_string(a.width) + "x" + std::to_string(a.height) + " vs " +
                    std::to_string(b.width) + "x" + std::to_string(b.height));
}

/// IoU of the nonzero pixels; two empty masks score 1.
inline double mask_iou(const IdMask& pred, const IdMask& gt) {
  check_same_size(pred, gt);
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred.data[i] != 0, g = gt.data[i] != 0;
    inter += p && g;
    uni += p || g;
  }
  return uni == 0 ? 1.0 : double(inter) / double(uni);
}

inline double boundary_iou(const IdMask& pred, const IdMask& gt, double radius) {
  check_same_size(pred, gt);
  if (!(radius >= 1.0)) throw ConfigError("boundary radius must be at least 1 px");
  return mask_iou(boundary_band(pred, radius), boundary_band(gt, radius));
}

/// 2% of the image diagonal, at least 1 px.
inline double default_boundary_radius(int width, int height) {
  return std::max(1.0, 0.02 * std::hypot(double(width), double(height)));
}

inline IdMask select_id(const IdMask& m, ObjectId id) {
  IdMask out(m.width, m.height, 0);
  for (std::size_t i = 0; i < m.size(); ++i) out.data[i] = m.data[i] == id ? 1 : 0;
  return out;
}

namespace metrics_detail {
inline std::vector<ObjectId> object_ids(const IdMask& a, const IdMask& b) {
  std::set<ObjectId> ids;
  for (auto v : a.data)
    if (v) ids.insert(v);
  for (auto v : b.data)
    if (v) ids.insert(v);
  return {ids.begin(), ids.end()};
}
}  // namespace metrics_detail

/// Mean over nonzero ids (present in either mask) of per-id IoU. No objects → 1.
inline double miou(const IdMask& pred, const IdMask& gt) {
  check_same_size(pred, gt);
  const auto ids = metrics_detail::object_ids(pred, gt);
  if (ids.empty()) return 1.0;
  double sum = 0;
  for (ObjectId id : ids) sum += mask_iou(select_id(pred, id), select_id(gt, id));
  return sum / double(ids.size());
}

inline double mbiou(const IdMask& pred, const IdMask& gt, double radius) {
  check_same_size(pred, gt);
  const auto ids = metrics_detail::object_ids(pred, gt);
  if (ids.empty()) return 1.0;
  double sum = 0;
  for (ObjectId id : ids) sum += boundary_iou(select_id(pred, id), select_id(gt, id), radius);
  return sum / double(ids.size());
}

}  // namespace splatsim
