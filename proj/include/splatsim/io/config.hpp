#pragma once

// Pipeline configuration: one JSON document driving every stage. Relative
// paths resolve against the directory holding the config file. Field names
// are listed in the README.

#include "splatsim/kinematics/eigen_clamp.hpp"
#include "splatsim/mpm/solver.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace splatsim {

struct SegmentationParams {
  double tau_T = 0.5;
  double tau_d = 0.03;
  std::optional<double> boundary_radius;  // px; default 2% of the image diagonal
};

struct SimParams {
  double dt = 1e-4;
  Eigen::Vector3i resolution{64, 64, 64};
  double dx = 1.0 / 64.0;
  std::optional<Vec3> origin;  // default: grid centered on the simulated particles
  Vec3 gravity{0.0, 0.0, -9.8};
  std::int64_t steps = 2000;
  std::int64_t frame_stride = 400;
  int boundary_cells = 3;
  std::optional<mpm::GroundPlane> ground;
};

struct ClampConfig {
  std::optional<double> tau_min;  // default per object: 0.3·median rest scale
  std::optional<double> tau_max;  // default per object: 3·median rest scale
  double lambda_R = 1.2;
  double lambda_S = 0.8;
  kinematics::CovarianceMode mode = kinematics::CovarianceMode::EigenClamp;
  bool reproject_rotation = false;
};

struct RenderConfig {
  Vec3 background = Vec3::Zero();
  std::vector<int> views;  // indices into the camera set; empty = all
  std::optional<std::filesystem::path> cameras;  // render cameras; default = input camera set
  int tile_size = 16;
};

struct PipelineConfig {
  std::filesystem::path base_dir;
  std::filesystem::path scene;
  std::filesystem::path cameras;
  std::filesystem::path mask_dir;
  std::optional<std::filesystem::path> gt_mask_dir;
  std::filesystem::path output_dir = "out";
  std::map<ObjectId, mpm::Material> materials;
  SegmentationParams segmentation;
  SimParams sim;
  ClampConfig clamp;
  RenderConfig render;
  std::uint64_t seed = 0;

  void validate() const;
};

inline void PipelineConfig::validate() const {
  if (!(segmentation.tau_T > 0 && segmentation.tau_T < 1)) throw ConfigError("segmentation.tau_T must lie in (0, 1)");
  if (!(segmentation.tau_d > 0)) throw ConfigError("segmentation.tau_d must be positive");
  if (segmentation.boundary_radius && !(*segmentation.boundary_radius >= 1))
    throw ConfigError("segmentation.boundary_radius must be >= 1 px");
  if (!(sim.dt > 0)) throw ConfigError("simulation.dt must be positive");
  if (!(sim.dx > 0)) throw ConfigError("simulation.dx must be positive");
  if ((sim.resolution.array() < 5).any()) throw ConfigError("simulation.grid_resolution must be >= 5");
  if (sim.steps < 0) throw ConfigError("simulation.steps must be non-negative");
  if (sim.frame_stride <= 0) throw ConfigError("simulation.frame_stride must be positive");
  if (clamp.tau_min && !(*clamp.tau_min > 0)) throw ConfigError("clamp.tau_min must be positive");
  if (clamp.tau_min && clamp.tau_max && !(*clamp.tau_min < *clamp.tau_max))
    throw ConfigError("clamp.tau_min must be smaller than clamp.tau_max");
  if (!(clamp.lambda_R >= 0 && clamp.lambda_S >= 0)) throw ConfigError("clamp lambdas must be non-negative");
  for (const auto& [id, m] : materials) {
    if (id == kBackgroundId) throw ConfigError("materials: object id 0 is background and cannot be simulated");
    m.validate();
  }
}

namespace config_detail {

inline Vec3 vec3(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(std::string(what) + " must be a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline kinematics::CovarianceMode parse_mode(const std::string& s) {
  if (s == "eigen_clamp") return kinematics::CovarianceMode::EigenClamp;
  if (s == "raw" || s == "raw_deformation") return kinematics::CovarianceMode::RawDeformation;
  if (s == "fixed" || s == "fixed_covariance") return kinematics::CovarianceMode::FixedCovariance;
  throw ConfigError("unknown clamp.mode '" + s + "'");
}

}  // namespace config_detail

inline PipelineConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  using config_detail::vec3;
  PipelineConfig c;
  c.base_dir = base_dir;
  auto path = [&](const std::string& key) -> std::filesystem::path {
    std::filesystem::path p = j.at(key).get<std::string>();
    return p.is_absolute() ? p : base_dir / p;
  };
  try {
    c.scene = path("scene");
    c.cameras = path("cameras");
    c.mask_dir = path("mask_dir");
    if (j.contains("gt_mask_dir")) c.gt_mask_dir = path("gt_mask_dir");
    if (j.contains("output_dir")) c.output_dir = path("output_dir");
    else c.output_dir = base_dir / "out";
    c.seed = j.value("seed", std::uint64_t{0});

    if (j.contains("segmentation")) {
      const auto& s = j["segmentation"];
      c.segmentation.tau_T = s.value("tau_T", c.segmentation.tau_T);
      c.segmentation.tau_d = s.value("tau_d", c.segmentation.tau_d);
      if (s.contains("boundary_radius") && !s["boundary_radius"].is_null())
        c.segmentation.boundary_radius = s["boundary_radius"].get<double>();
    }

    if (j.contains("materials")) {
      for (const auto& [key, m] : j["materials"].items()) {
        mpm::Material mat;
        mat.density = m.value("density", mat.density);
        mat.youngs_modulus = m.value("youngs_modulus", mat.youngs_modulus);
        mat.poisson_ratio = m.value("poisson_ratio", mat.poisson_ratio);
        mat.model = mpm::parse_model(m.value("model", std::string("fixed_corotated")));
        if (m.contains("initial_velocity")) mat.initial_velocity = vec3(m["initial_velocity"], "initial_velocity");
        c.materials[ObjectId(std::stoul(key))] = mat;
      }
    }

    if (j.contains("simulation")) {
      const auto& s = j["simulation"];
      c.sim.dt = s.value("dt", c.sim.dt);
      if (s.contains("grid_resolution")) {
        const auto& r = s["grid_resolution"];
        if (r.is_number()) c.sim.resolution.setConstant(r.get<int>());
        else c.sim.resolution = {r.at(0).get<int>(), r.at(1).get<int>(), r.at(2).get<int>()};
      }
      c.sim.dx = s.value("dx", c.sim.dx);
      if (s.contains("grid_origin") && !s["grid_origin"].is_null()) c.sim.origin = vec3(s["grid_origin"], "grid_origin");
      if (s.contains("gravity")) c.sim.gravity = vec3(s["gravity"], "gravity");
      c.sim.steps = s.value("steps", c.sim.steps);
      c.sim.frame_stride = s.value("frame_stride", c.sim.frame_stride);
      c.sim.boundary_cells = s.value("boundary_cells", c.sim.boundary_cells);
      if (s.contains("ground_plane") && !s["ground_plane"].is_null()) {
        mpm::GroundPlane g;
        g.point = vec3(s["ground_plane"].at("point"), "ground_plane.point");
        g.normal = vec3(s["ground_plane"].at("normal"), "ground_plane.normal");
        if (!(g.normal.norm() > 0)) throw ConfigError("ground_plane.normal must be nonzero");
        c.sim.ground = g;
      }
    }

    if (j.contains("clamp")) {
      const auto& s = j["clamp"];
      if (s.contains("tau_min") && !s["tau_min"].is_null()) c.clamp.tau_min = s["tau_min"].get<double>();
      if (s.contains("tau_max") && !s["tau_max"].is_null()) c.clamp.tau_max = s["tau_max"].get<double>();
      c.clamp.lambda_R = s.value("lambda_R", c.clamp.lambda_R);
      c.clamp.lambda_S = s.value("lambda_S", c.clamp.lambda_S);
      if (s.contains("mode")) c.clamp.mode = config_detail::parse_mode(s["mode"].get<std::string>());
      c.clamp.reproject_rotation = s.value("reproject_rotation", c.clamp.reproject_rotation);
    }

    if (j.contains("render")) {
      const auto& s = j["render"];
      if (s.contains("background")) c.render.background = vec3(s["background"], "render.background");
      if (s.contains("views")) c.render.views = s["views"].get<std::vector<int>>();
      if (s.contains("cameras") && !s["cameras"].is_null()) {
        std::filesystem::path p = s["cameras"].get<std::string>();
        c.render.cameras = p.is_absolute() ? p : base_dir / p;
      }
      c.render.tile_size = s.value("tile_size", c.render.tile_size);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw ConfigError("config: material keys must be integer object ids");
  }
  c.validate();
  return c;
}

/// Raw text of a config file; hashed into the run manifest.
inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }
  return parse_config(j, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

}  // namespace splatsim
