#pragma once

// MLS-MPM with quadratic B-splines, one particle per Gaussian.
//
// Step = p2g → grid_update → g2p. P2G scatters mass, APIC momentum and the
// MLS force term −Δt·V⁰·W⁻¹·P·Fᵀ·(xᵢ − xₚ), W = Δx²/4. The scatter is made
// deterministic by binning particles into x-slabs of kSlabCells cells and
// processing even and odd slabs in two phases: slabs of one color never
// touch the same node, and each slab is walked in particle order, so node
// sums do not depend on the thread count.

#include "splatsim/io/gaussian_scene.hpp"
#include "splatsim/mpm/constitutive.hpp"
#include "splatsim/parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <unordered_set>
#include <vector>

namespace splatsim::mpm {

struct Particle {
  Vec3 x = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Mat3 F = Mat3::Identity();
  Mat3 C = Mat3::Zero();
  double mass = 0;
  double volume = 0;  // V⁰
  std::int32_t material_id = 0;
  std::int64_t gaussian_index = -1;
};

struct GroundPlane {
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
};

struct GridConfig {
  Eigen::Vector3i resolution{64, 64, 64};  // cells per axis
  double dx = 1.0 / 64.0;
  Vec3 origin = Vec3::Zero();  // world position of node (0,0,0)
  int boundary_cells = 3;      // separating walls this many cells deep on every face
  std::optional<GroundPlane> ground;

  [[nodiscard]] Vec3 extent() const { return resolution.cast<double>() * dx; }
  void validate() const {
    if (!(dx > 0)) throw ConfigError("grid spacing dx must be positive");
    if ((resolution.array() < 5).any()) throw ConfigError("grid resolution must be at least 5 cells per axis");
    if (boundary_cells < 0) throw ConfigError("boundary_cells must be non-negative");
  }
};

/// (res+1)³ nodes; node (i, j, k) sits at origin + (i, j, k)·Δx.
struct Grid {
  Eigen::Vector3i nodes = Eigen::Vector3i::Zero();
  std::vector<double> mass;
  std::vector<Vec3> momentum;  // holds velocity after grid_update

  explicit Grid(const GridConfig& cfg = {}) { resize(cfg); }
  void resize(const GridConfig& cfg) {
    nodes = cfg.resolution.array() + 1;
    const std::size_t n = std::size_t(nodes.x()) * std::size_t(nodes.y()) * std::size_t(nodes.z());
    mass.assign(n, 0.0);
    momentum.assign(n, Vec3::Zero());
  }
  void clear() {
    std::fill(mass.begin(), mass.end(), 0.0);
    std::fill(momentum.begin(), momentum.end(), Vec3::Zero());
  }
  [[nodiscard]] std::size_t index(int i, int j, int k) const {
    return (std::size_t(i) * std::size_t(nodes.y()) + std::size_t(j)) * std::size_t(nodes.z()) + std::size_t(k);
  }
  [[nodiscard]] std::size_t size() const { return mass.size(); }
};

struct SimState {
  std::vector<Particle> particles;
  std::vector<Material> materials;
  std::vector<ObjectId> material_object_ids;  // object id each material came from
  GridConfig grid_config;
  Grid grid;
  std::int64_t step = 0;
  double time = 0;
  std::int64_t inverted_count = 0;  // F projections performed so far

  [[nodiscard]] Vec3 total_momentum() const {
    Vec3 p = Vec3::Zero();
    for (const auto& q : particles) p += q.mass * q.v;
    return p;
  }
  [[nodiscard]] double total_mass() const {
    double m = 0;
    for (const auto& q : particles) m += q.mass;
    return m;
  }
  [[nodiscard]] Vec3 center_of_mass() const {
    Vec3 c = Vec3::Zero();
    for (const auto& q : particles) c += q.mass * q.x;
    return c / total_mass();
  }
};

/// Quadratic B-spline stencil of one particle.
struct Stencil {
  Eigen::Vector3i base;
  std::array<Vec3, 3> w;  // w[a][axis]
  Vec3 frac;              // particle position in cell units relative to base

  [[nodiscard]] double weight(int a, int b, int c) const { return w[std::size_t(a)].x() * w[std::size_t(b)].y() * w[std::size_t(c)].z(); }
};

inline Stencil make_stencil(const Vec3& x, const GridConfig& cfg) {
  const Vec3 g = (x - cfg.origin) / cfg.dx;
  Stencil s;
  s.base = (g.array() - 0.5).floor().cast<int>();
  s.frac = g - s.base.cast<double>();
  s.w[0] = 0.5 * (1.5 - s.frac.array()).square();
  s.w[1] = 0.75 - (s.frac.array() - 1.0).square();
  s.w[2] = 0.5 * (s.frac.array() - 0.5).square();
  return s;
}

/// True when x lies at least two cells inside every grid face.
inline bool in_interior(const Vec3& x, const GridConfig& cfg) {
  const Vec3 g = (x - cfg.origin) / cfg.dx;
  for (int a = 0; a < 3; ++a)
    if (!(g[a] >= 2.0 && g[a] <= cfg.resolution[a] - 2.0)) return false;
  return true;
}

/// Grid origin that centers the bounding box of `points` in the grid.
inline Vec3 centered_origin(const std::vector<Vec3>& points, const Eigen::Vector3i& resolution, double dx) {
  if (points.empty()) return Vec3::Zero();
  Vec3 lo = points.front(), hi = points.front();
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return 0.5 * (lo + hi) - 0.5 * resolution.cast<double>() * dx;
}

/// One particle per Gaussian whose id is a key of `materials`; background
/// (id 0) Gaussians stay static. V⁰ = Δx³ / (particles per occupied cell),
/// averaged per object.
inline SimState init_sim(const GaussianScene& scene, const std::map<ObjectId, Material>& materials,
                         const GridConfig& grid_cfg) {
  grid_cfg.validate();
  std::set<ObjectId> missing;
  for (const auto& g : scene.gaussians) {
    const ObjectId id = g.id_or_background();
    if (id != kBackgroundId && !materials.count(id)) missing.insert(id);
  }
  if (!missing.empty()) {
    std::string msg = "no material for object id(s):";
    for (auto id : missing) msg += " " + std::to_string(id);
    throw ConfigError(msg);
  }

  SimState st;
  st.grid_config = grid_cfg;
  st.grid.resize(grid_cfg);
  std::map<ObjectId, std::int32_t> slot;
  for (const auto& [id, m] : materials) {
    m.validate();
    slot[id] = std::int32_t(st.materials.size());
    st.materials.push_back(m);
    st.material_object_ids.push_back(id);
  }

  for (std::size_t i = 0; i < scene.size(); ++i) {
    const ObjectId id = scene.gaussians[i].id_or_background();
    if (id == kBackgroundId) continue;
    Particle p;
    p.x = scene.gaussians[i].mean();
    p.material_id = slot.at(id);
    p.v = st.materials[std::size_t(p.material_id)].initial_velocity;
    p.gaussian_index = std::int64_t(i);
    st.particles.push_back(p);
  }

  // Particles per occupied cell, per material.
  const double cell_volume = grid_cfg.dx * grid_cfg.dx * grid_cfg.dx;
  std::vector<std::unordered_set<std::int64_t>> occupied(st.materials.size());
  std::vector<std::int64_t> counts(st.materials.size(), 0);
  for (const auto& p : st.particles) {
    const Eigen::Vector3i c = ((p.x - grid_cfg.origin) / grid_cfg.dx).array().floor().cast<int>();
    const std::int64_t key = (std::int64_t(c.x()) * (1 << 20) + c.y()) * (1 << 20) + c.z();
    occupied[std::size_t(p.material_id)].insert(key);
    ++counts[std::size_t(p.material_id)];
  }
  for (auto& p : st.particles) {
    const auto m = std::size_t(p.material_id);
    const double ppc = double(counts[m]) / double(occupied[m].size());
    p.volume = cell_volume / ppc;
    p.mass = st.materials[m].density * p.volume;
  }
  return st;
}

namespace detail {
inline constexpr int kSlabCells = 4;  // ≥ 3 so that same-color slabs are disjoint on the grid
}

inline void p2g(SimState& st, double dt) {
  const auto& cfg = st.grid_config;
  auto& grid = st.grid;
  grid.clear();

  const auto n = st.particles.size();
  for (std::size_t p = 0; p < n; ++p)
    if (!in_interior(st.particles[p].x, cfg))
      throw SimulationError("particle " + std::to_string(p) + " outside grid interior at step " +
                                std::to_string(st.step),
                            st.step, std::int64_t(p));

  // Counting sort of particle indices into x-slabs (stable).
  const int n_slabs = (cfg.resolution.x() + detail::kSlabCells) / detail::kSlabCells + 1;
  std::vector<int> slab_of(n);
  std::vector<std::size_t> start(std::size_t(n_slabs) + 1, 0);
  std::vector<Stencil> stencils(n);
  std::vector<Mat3> affine(n);
  const double inv_w = 4.0 / (cfg.dx * cfg.dx);

  parallel_for(std::int64_t(n), [&](std::int64_t pi) {
    const auto& p = st.particles[std::size_t(pi)];
    stencils[std::size_t(pi)] = make_stencil(p.x, cfg);
    const Mat3 P = piola_kirchhoff(p.F, st.materials[std::size_t(p.material_id)]);
    affine[std::size_t(pi)] = p.mass * p.C - dt * p.volume * inv_w * P * p.F.transpose();
  });
  for (std::size_t p = 0; p < n; ++p) {
    slab_of[p] = stencils[p].base.x() / detail::kSlabCells;
    ++start[std::size_t(slab_of[p]) + 1];
  }
  for (int s = 0; s < n_slabs; ++s) start[std::size_t(s) + 1] += start[std::size_t(s)];
  std::vector<std::size_t> order(n), fill(start.begin(), start.end() - 1);
  for (std::size_t p = 0; p < n; ++p) order[fill[std::size_t(slab_of[p])]++] = p;

  for (int color = 0; color < 2; ++color) {
    const std::int64_t n_color = (n_slabs - color + 1) / 2;
    parallel_for(n_color, [&](std::int64_t k) {
      const auto s = std::size_t(2 * k + color);
      if (s >= std::size_t(n_slabs)) return;
      for (std::size_t o = start[s]; o < start[s + 1]; ++o) {
        const std::size_t pi = order[o];
        const auto& p = st.particles[pi];
        const auto& sw = stencils[pi];
        const Vec3 mv = p.mass * p.v;
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b)
            for (int c = 0; c < 3; ++c) {
              const double w = sw.weight(a, b, c);
              const Vec3 dpos = (Vec3(a, b, c) - sw.frac) * cfg.dx;  // xᵢ − xₚ
              const std::size_t idx = grid.index(sw.base.x() + a, sw.base.y() + b, sw.base.z() + c);
              grid.mass[idx] += w * p.mass;
              grid.momentum[idx] += w * (mv + affine[pi] * dpos);
            }
      }
    });
  }
}

/// Momentum → velocity, gravity, then separating walls and the optional ground plane.
inline void grid_update(Grid& grid, const GridConfig& cfg, double dt, const Vec3& gravity) {
  const int nx = grid.nodes.x(), ny = grid.nodes.y(), nz = grid.nodes.z();
  const int b = cfg.boundary_cells;
  parallel_for(std::int64_t(nx), [&](std::int64_t ii) {
    const int i = int(ii);
    for (int j = 0; j < ny; ++j)
      for (int k = 0; k < nz; ++k) {
        const std::size_t idx = grid.index(i, j, k);
        Vec3& v = grid.momentum[idx];
        if (!(grid.mass[idx] > 0)) {
          v.setZero();
          continue;
        }
        v = v / grid.mass[idx] + dt * gravity;
        const int ijk[3] = {i, j, k};
        for (int a = 0; a < 3; ++a) {
          if (ijk[a] < b && v[a] < 0) v[a] = 0;
          if (ijk[a] > cfg.resolution[a] - b && v[a] > 0) v[a] = 0;
        }
        if (cfg.ground) {
          const Vec3 n = cfg.ground->normal.normalized();
          const Vec3 xi = cfg.origin + Vec3(i, j, k) * cfg.dx;
          const double vn = v.dot(n);
          if ((xi - cfg.ground->point).dot(n) < 0 && vn < 0) v -= vn * n;
        }
      }
  });
}

inline void g2p(SimState& st, double dt) {
  const auto& cfg = st.grid_config;
  const auto& grid = st.grid;
  const double inv_w = 4.0 / (cfg.dx * cfg.dx);
  const auto n = st.particles.size();
  std::vector<unsigned char> bad(n, 0), inverted(n, 0);

  parallel_for(std::int64_t(n), [&](std::int64_t pi) {
    auto& p = st.particles[std::size_t(pi)];
    const Stencil sw = make_stencil(p.x, cfg);
    Vec3 v = Vec3::Zero();
    Mat3 B = Mat3::Zero();
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        for (int c = 0; c < 3; ++c) {
          const double w = sw.weight(a, b, c);
          const Vec3 dpos = (Vec3(a, b, c) - sw.frac) * cfg.dx;
          const Vec3& vi = grid.momentum[grid.index(sw.base.x() + a, sw.base.y() + b, sw.base.z() + c)];
          v += w * vi;
          B += w * vi * dpos.transpose();
        }
    p.v = v;
    p.C = inv_w * B;
    p.F = (Mat3::Identity() + dt * p.C) * p.F;
    if (p.F.determinant() <= 0) {
      p.F = project_inverted(p.F);
      inverted[std::size_t(pi)] = 1;
    }
    p.x += dt * p.v;
    if (!p.x.allFinite() || !p.v.allFinite() || !p.F.allFinite() || !p.C.allFinite()) bad[std::size_t(pi)] = 1;
  });
  for (std::size_t p = 0; p < n; ++p) {
    st.inverted_count += inverted[p];
    if (bad[p])
      throw SimulationError("non-finite state for particle " + std::to_string(p) + " at step " +
                                std::to_string(st.step),
                            st.step, std::int64_t(p));
  }
}

struct StepParams {
  double dt = 1e-4;
  Vec3 gravity{0.0, 0.0, -9.8};
};

inline void step(SimState& st, const StepParams& sp) {
  p2g(st, sp.dt);
  grid_update(st.grid, st.grid_config, sp.dt, sp.gravity);
  g2p(st, sp.dt);
  ++st.step;
  st.time += sp.dt;
}

/// CFL-style guidance: Δt ≤ 0.1·Δx / c over all materials.
inline double suggested_dt(const SimState& st) {
  double c = 0;
  for (const auto& m : st.materials) c = std::max(c, m.wave_speed());
  return c > 0 ? 0.1 * st.grid_config.dx / c : std::numeric_limits<double>::infinity();
}

}  // namespace splatsim::mpm
