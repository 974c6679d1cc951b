#pragma once

// Synthetic scenes with known ground truth: opaque Gaussian balls, cameras on
// the cube-vertex directions around them, and ray-traced id masks.

#include "splatsim/io/camera.hpp"
#include "splatsim/io/gaussian_scene.hpp"
#include "splatsim/io/ply.hpp"
#include "splatsim/io/png.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <vector>

namespace splatsim::synth {

struct Ball {
  Vec3 center = Vec3::Zero();
  double radius = 0.5;
  ObjectId id = 1;
  Vec3 color{0.8, 0.3, 0.2};
};

struct BallOptions {
  int count = 2500;
  bool solid = false;
  /// Gaussian std-dev as a multiple of the mean neighbour spacing.
  double sigma_per_spacing = 0.6;
  /// Centers sit this many sigmas inside the sphere, so the rendered
  /// silhouette lands on the analytic one.
  double inset_sigmas = 2.3;
  double opacity = 0.99;
};

/// `n` quasi-uniform unit vectors (Fibonacci lattice).
inline std::vector<Vec3> fibonacci_sphere(int n) {
  std::vector<Vec3> out;
  out.reserve(std::size_t(std::max(n, 0)));
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    out.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
  }
  return out;
}

inline GaussianPrimitive make_splat(const Vec3& x, double sigma, double opacity, const Vec3& color,
                                    std::optional<ObjectId> id) {
  GaussianPrimitive g;
  g.position = x.cast<float>();
  g.log_scale.setConstant(float(std::log(sigma)));
  g.opacity_logit = float(logit(opacity));
  g.set_base_color(color);
  g.object_id = id;
  return g;
}

/// Shell: `count` splats on one sphere. Solid: a cubic lattice clipped to the
/// ball, spaced so that roughly `count` points fit.
inline std::vector<GaussianPrimitive> make_ball(const Ball& ball, const BallOptions& opt, bool with_ids = true) {
  std::vector<GaussianPrimitive> out;
  const std::optional<ObjectId> id = with_ids ? std::optional<ObjectId>(ball.id) : std::nullopt;
  if (!opt.solid) {
    const double spacing = ball.radius * std::sqrt(4.0 * std::numbers::pi / opt.count);
    const double sigma = opt.sigma_per_spacing * spacing;
    const double r = ball.radius - opt.inset_sigmas * sigma;
    for (const auto& d : fibonacci_sphere(opt.count))
      out.push_back(make_splat(ball.center + r * d, sigma, opt.opacity, ball.color, id));
    return out;
  }
  const double h = std::cbrt(4.0 / 3.0 * std::numbers::pi * std::pow(ball.radius, 3) / opt.count);
  const double sigma = opt.sigma_per_spacing * h;
  const double r = ball.radius - opt.inset_sigmas * sigma;
  const int n = int(std::ceil(r / h));
  for (int i = -n; i <= n; ++i)
    for (int j = -n; j <= n; ++j)
      for (int k = -n; k <= n; ++k) {
        const Vec3 o = h * Vec3(i + 0.5, j + 0.5, k + 0.5);
        if (o.norm() <= r) out.push_back(make_splat(ball.center + o, sigma, opt.opacity, ball.color, id));
      }
  return out;
}

inline GaussianScene make_ball_scene(const std::vector<Ball>& balls, const BallOptions& opt, bool with_ids = true) {
  GaussianScene scene;
  for (const auto& b : balls) {
    auto splats = make_ball(b, opt, with_ids);
    scene.gaussians.insert(scene.gaussians.end(), splats.begin(), splats.end());
  }
  return scene;
}

/// The default benchmark: two disjoint balls side by side along x.
inline std::vector<Ball> two_balls() {
  return {Ball{Vec3(-0.6, 0.0, 0.0), 0.5, 1, Vec3(0.85, 0.35, 0.25)},
          Ball{Vec3(0.6, 0.0, 0.0), 0.5, 2, Vec3(0.25, 0.45, 0.85)}};
}

/// Eight cameras at `distance` from `target` along (±1, ±1, ±1)/√3.
inline std::vector<Camera> cube_vertex_cameras(const Vec3& target, double distance, double focal, int width,
                                               int height) {
  std::vector<Camera> cams;
  int k = 0;
  for (int sx : {-1, 1})
    for (int sy : {-1, 1})
      for (int sz : {-1, 1}) {
        const Vec3 dir = Vec3(sx, sy, sz).normalized();
        char name[32];
        std::snprintf(name, sizeof name, "view_%03d", k++);
        Camera c = Camera::look_at(target + distance * dir, target, Vec3::UnitZ(), focal, width, height, name);
        c.mask_file = std::string(name) + ".png";
        cams.push_back(std::move(c));
      }
  return cams;
}

/// Id of the nearest ball hit by each pixel's ray, 0 where no ball is hit.
inline IdMask analytic_id_mask(const Camera& cam, const std::vector<Ball>& balls) {
  IdMask mask(cam.width, cam.height, kBackgroundId);
  const Mat3 Rt = cam.rotation().transpose();
  const Vec3 origin = cam.center();
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const Vec3 d = (Rt * Vec3((x - cam.cx) / cam.fx, (y - cam.cy) / cam.fy, 1.0)).normalized();
      double best = std::numeric_limits<double>::infinity();
      for (const auto& b : balls) {
        const Vec3 oc = origin - b.center;
        const double bq = oc.dot(d);
        const double disc = bq * bq - (oc.squaredNorm() - b.radius * b.radius);
        if (disc < 0) continue;
        const double t = -bq - std::sqrt(disc);
        if (t > 0 && t < best) {
          best = t;
          mask(x, y) = b.id;
        }
      }
    }
  return mask;
}

struct DatasetOptions {
  std::vector<Ball> balls = two_balls();
  BallOptions ball;
  int image_size = 256;
  double camera_distance = 4.0;
  double focal = 360.0;
};

/// Writes scene.ply (no ids), cameras.json, masks/ and config.json into `dir`.
/// The masks double as ground truth for evaluation.
inline void write_dataset(const std::filesystem::path& dir, const DatasetOptions& opt = {}) {
  std::filesystem::create_directories(dir / "masks");
  Vec3 target = Vec3::Zero();
  for (const auto& b : opt.balls) target += b.center;
  if (!opt.balls.empty()) target /= double(opt.balls.size());

  save_gaussian_ply(make_ball_scene(opt.balls, opt.ball, false), dir / "scene.ply");
  const auto cams = cube_vertex_cameras(target, opt.camera_distance, opt.focal, opt.image_size, opt.image_size);
  save_cameras(cams, dir / "cameras.json");
  for (const auto& c : cams) png::write_gray16(dir / "masks" / c.mask_file, analytic_id_mask(c, opt.balls));

  nlohmann::json materials = nlohmann::json::object();
  const std::vector<Vec3> velocities = {Vec3(2, 0, 0), Vec3(1, -1, 0)};
  for (std::size_t i = 0; i < opt.balls.size(); ++i) {
    const Vec3 v = i < velocities.size() ? velocities[i] : Vec3::Zero();
    materials[std::to_string(opt.balls[i].id)] = {{"density", 1000.0},
                                                  {"youngs_modulus", 1e7},
                                                  {"poisson_ratio", 0.2},
                                                  {"model", "fixed_corotated"},
                                                  {"initial_velocity", {v.x(), v.y(), v.z()}}};
  }
  const nlohmann::json config = {
      {"scene", "scene.ply"},
      {"cameras", "cameras.json"},
      {"mask_dir", "masks"},
      {"gt_mask_dir", "masks"},
      {"output_dir", "out"},
      {"segmentation", {{"tau_T", 0.5}, {"tau_d", 0.03}}},
      {"materials", materials},
      {"simulation",
       {{"dt", 1e-4}, {"grid_resolution", 64}, {"dx", 3.0 / 64.0}, {"gravity", {0.0, 0.0, 0.0}},
        {"steps", 2000}, {"frame_stride", 400}, {"boundary_cells", 3}}},
      {"clamp", {{"lambda_R", 1.2}, {"lambda_S", 0.8}, {"mode", "eigen_clamp"}}},
      {"render", {{"background", {0.0, 0.0, 0.0}}, {"views", {0, 3}}}},
      {"seed", 0}};
  std::ofstream out(dir / "config.json");
  if (!out) throw IoError("cannot write '" + (dir / "config.json").string() + "'");
  out << config.dump(2) << "\n";
}

}  // namespace splatsim::synth
