#pragma once

// Depth-sorted alpha-blended splat rasterization.
//
// Splats are projected with the first-order (EWA) approximation, sorted
// globally by camera-space depth of their centers (ties by input index) and
// blended front to back per pixel. Tiles only bound which splats a pixel
// visits: every splat skipped by tiling has α below kMinAlpha at that pixel,
// and such contributions are skipped in the per-pixel rule as well.

#include "splatsim/io/camera.hpp"
#include "splatsim/io/gaussian_scene.hpp"
#include "splatsim/io/raster.hpp"
#include "splatsim/parallel.hpp"
#include "splatsim/render/sh.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

namespace splatsim {

inline constexpr double kMaxAlpha = 0.99;
inline constexpr double kMinAlpha = 1e-4;
inline constexpr double kTransmittanceStop = 1e-4;
inline constexpr double kLowPassDilation = 0.3;  // px², added to the 2D covariance diagonal

struct RenderOptions {
  Vec3 background = Vec3::Zero();
  double near_plane = 0.01;
  int tile_size = 16;
};

struct Splat2D {
  Vec2 mean;
  Mat2 cov;
  Mat2 conic;  // cov⁻¹
  double depth = 0;
  Vec3 color = Vec3::Zero();
  double opacity = 0;
  double radius = 0;  // px; α < kMinAlpha beyond it
  std::uint32_t index = 0;

  /// Blending weight at pixel center (px, py), before the kMinAlpha skip.
  [[nodiscard]] double alpha_at(double px, double py) const {
    const Vec2 d(px - mean.x(), py - mean.y());
    const double q = d.dot(conic * d);
    return std::min(kMaxAlpha, opacity * std::exp(-0.5 * q));
  }
};

/// Projects one Gaussian. `linear_transform`, when given, replaces R·diag(s)
/// as the factor A of the world covariance Σ = A·Aᵀ. Returns nullopt when
/// the splat is culled.
inline std::optional<Splat2D> project_gaussian(const GaussianPrimitive& g, const Camera& cam,
                                               const Mat3* linear_transform = nullptr,
                                               const RenderOptions& opt = {}) {
  const Vec3 mu = g.mean();
  const Vec3 pc = cam.to_camera(mu);
  if (!(pc.z() > opt.near_plane)) return std::nullopt;

  const Mat3 A = linear_transform ? *linear_transform : g.linear_transform();
  const Mat3 sigma = A * A.transpose();

  // Jacobian of the perspective map, with the usual guard band against
  // extreme off-axis splats.
  const double padx = 0.15 * cam.width / cam.fx;
  const double pady = 0.15 * cam.height / cam.fy;
  const double z = pc.z();
  const double tx = std::clamp(pc.x() / z, -cam.cx / cam.fx - padx, (cam.width - 1 - cam.cx) / cam.fx + padx) * z;
  const double ty = std::clamp(pc.y() / z, -cam.cy / cam.fy - pady, (cam.height - 1 - cam.cy) / cam.fy + pady) * z;
  Eigen::Matrix<double, 2, 3> J;
  J << cam.fx / z, 0.0, -cam.fx * tx / (z * z), 0.0, cam.fy / z, -cam.fy * ty / (z * z);
  const Eigen::Matrix<double, 2, 3> T = J * cam.rotation();

  Splat2D s;
  s.cov = T * sigma * T.transpose();
  s.cov = 0.5 * (s.cov + s.cov.transpose()).eval();
  s.cov.diagonal().array() += kLowPassDilation;
  const double det = s.cov.determinant();
  if (!(det > 0)) return std::nullopt;
  s.conic = s.cov.inverse();
  s.mean = cam.project(pc);
  s.depth = z;
  s.opacity = g.opacity();
  if (!(s.opacity > kMinAlpha)) return std::nullopt;

  const double mid = 0.5 * (s.cov(0, 0) + s.cov(1, 1));
  const double lambda_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
  s.radius = std::sqrt(2.0 * std::log(s.opacity / kMinAlpha) * lambda_max) * (1.0 + 1e-9) + 1e-9;

  if (s.mean.x() + s.radius < 0 || s.mean.y() + s.radius < 0 || s.mean.x() - s.radius > cam.width - 1 ||
      s.mean.y() - s.radius > cam.height - 1)
    return std::nullopt;

  s.color = eval_sh_color(g, (mu - cam.center()).normalized());
  return s;
}

/// Projected, depth-sorted splats of one view plus per-tile lists.
struct PreparedView {
  int width = 0, height = 0, tile_size = 16, tiles_x = 0, tiles_y = 0;
  std::vector<Splat2D> splats;                    // ascending depth, ties by index
  std::vector<std::vector<std::uint32_t>> tiles;  // indices into `splats`, in order
};

inline PreparedView prepare_view(const GaussianScene& scene, const Camera& cam,
                                 std::span<const Mat3> transforms = {}, const RenderOptions& opt = {}) {
  if (!transforms.empty() && transforms.size() != scene.size())
    throw DataError("render: " + std::to_string(transforms.size()) + " transforms for " +
                    std::to_string(scene.size()) + " Gaussians");
  PreparedView view;
  view.width = cam.width;
  view.height = cam.height;
  view.tile_size = std::max(1, opt.tile_size);
  view.tiles_x = (cam.width + view.tile_size - 1) / view.tile_size;
  view.tiles_y = (cam.height + view.tile_size - 1) / view.tile_size;

  const auto n = std::int64_t(scene.size());
  std::vector<std::optional<Splat2D>> projected(scene.size());
  parallel_for(n, [&](std::int64_t i) {
    const Mat3* A = transforms.empty() ? nullptr : &transforms[std::size_t(i)];
    projected[std::size_t(i)] = project_gaussian(scene.gaussians[std::size_t(i)], cam, A, opt);
    if (projected[std::size_t(i)]) projected[std::size_t(i)]->index = std::uint32_t(i);
  });
  for (auto& p : projected)
    if (p) view.splats.push_back(*p);
  std::sort(view.splats.begin(), view.splats.end(), [](const Splat2D& a, const Splat2D& b) {
    return a.depth < b.depth || (a.depth == b.depth && a.index < b.index);
  });

  view.tiles.resize(std::size_t(view.tiles_x) * std::size_t(view.tiles_y));
  const int ts = view.tile_size;
  for (std::uint32_t k = 0; k < view.splats.size(); ++k) {
    const auto& s = view.splats[k];
    const int x0 = std::max(0, int(std::ceil(s.mean.x() - s.radius)) / ts);
    const int x1 = std::min(view.tiles_x - 1, int(std::floor(s.mean.x() + s.radius)) / ts);
    const int y0 = std::max(0, int(std::ceil(s.mean.y() - s.radius)) / ts);
    const int y1 = std::min(view.tiles_y - 1, int(std::floor(s.mean.y() + s.radius)) / ts);
    for (int ty = y0; ty <= y1; ++ty)
      for (int tx = x0; tx <= x1; ++tx) view.tiles[std::size_t(ty) * std::size_t(view.tiles_x) + std::size_t(tx)].push_back(k);
  }
  return view;
}

/// Calls visit(x, y, splat_list) for every pixel; tiles run in parallel.
template <typename Visit>
void for_each_pixel(const PreparedView& view, Visit&& visit) {
  const std::int64_t n_tiles = std::int64_t(view.tiles.size());
  parallel_for(n_tiles, [&](std::int64_t t) {
    const int tx = int(t % view.tiles_x), ty = int(t / view.tiles_x);
    const auto& list = view.tiles[std::size_t(t)];
    for (int y = ty * view.tile_size; y < std::min(view.height, (ty + 1) * view.tile_size); ++y)
      for (int x = tx * view.tile_size; x < std::min(view.width, (tx + 1) * view.tile_size); ++x) visit(x, y, list);
  });
}

inline Image render_rgb(const PreparedView& view, const RenderOptions& opt = {}) {
  Image img(view.width, view.height);
  for_each_pixel(view, [&](int x, int y, const std::vector<std::uint32_t>& list) {
    Vec3 c = Vec3::Zero();
    double T = 1.0;
    for (std::uint32_t k : list) {
      const auto& s = view.splats[k];
      const double a = s.alpha_at(x, y);
      if (a < kMinAlpha) continue;
      c += T * a * s.color;
      T *= 1.0 - a;
      if (T < kTransmittanceStop) break;
    }
    c += T * opt.background;
    img(x, y) = {float(c.x()), float(c.y()), float(c.z())};
  });
  return img;
}

inline Image render_rgb(const GaussianScene& scene, const Camera& cam, std::span<const Mat3> transforms = {},
                        const RenderOptions& opt = {}) {
  return render_rgb(prepare_view(scene, cam, transforms, opt), opt);
}

/// Per pixel, the depth of the first splat at which transmittance drops below tau_T.
inline DepthMap render_surface_depth(const PreparedView& view, double tau_T) {
  if (!(tau_T > 0.0 && tau_T < 1.0)) throw ConfigError("tau_T must lie in (0, 1)");
  DepthMap depth(view.width, view.height);
  for_each_pixel(view, [&](int x, int y, const std::vector<std::uint32_t>& list) {
    double T = 1.0;
    for (std::uint32_t k : list) {
      const auto& s = view.splats[k];
      const double a = s.alpha_at(x, y);
      if (a < kMinAlpha) continue;
      T *= 1.0 - a;
      if (T < tau_T) {
        depth(x, y) = float(s.depth);
        break;
      }
    }
  });
  return depth;
}

inline DepthMap render_surface_depth(const GaussianScene& scene, const Camera& cam, double tau_T,
                                     const RenderOptions& opt = {}) {
  return render_surface_depth(prepare_view(scene, cam, {}, opt), tau_T);
}

/// 1 where accumulated opacity exceeds 1 − tau_T, else 0.
inline IdMask render_binary_mask(const PreparedView& view, double tau_T) {
  if (!(tau_T > 0.0 && tau_T < 1.0)) throw ConfigError("tau_T must lie in (0, 1)");
  IdMask mask(view.width, view.height, 0);
  for_each_pixel(view, [&](int x, int y, const std::vector<std::uint32_t>& list) {
    double T = 1.0;
    for (std::uint32_t k : list) {
      const double a = view.splats[k].alpha_at(x, y);
      if (a < kMinAlpha) continue;
      T *= 1.0 - a;
      if (T < tau_T) {
        mask(x, y) = 1;
        break;
      }
    }
  });
  return mask;
}

inline IdMask render_binary_mask(const GaussianScene& subset, const Camera& cam, double tau_T,
                                 const RenderOptions& opt = {}) {
  return render_binary_mask(prepare_view(subset, cam, {}, opt), tau_T);
}

}  // namespace splatsim
