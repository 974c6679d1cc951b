#pragma once

// The four pipeline stages and the run manifest.
//
// Output layout under `output_dir`:
//   segment/segmented.ply   scene with an object_id property
//   segment/ids.csv         gaussian_index,object_id
//   segment/depth/<view>.depth
//   simulate/frames/frame_NNNNN.bin   (x, F) per simulated particle
//   simulate/checkpoint.bin           state at the last dumped frame
//   render/frame_NNNNN_<view>.png
//   render/poses/frame_NNNNN.bin      (μ, A) per simulated Gaussian
//   eval/metrics.csv
//   manifest.json

#include "splatsim/io/camera.hpp"
#include "splatsim/io/config.hpp"
#include "splatsim/io/ply.hpp"
#include "splatsim/io/png.hpp"
#include "splatsim/kinematics/eigen_clamp.hpp"
#include "splatsim/log.hpp"
#include "splatsim/mpm/checkpoint.hpp"
#include "splatsim/mpm/solver.hpp"
#include "splatsim/render/depth_io.hpp"
#include "splatsim/render/rasterizer.hpp"
#include "splatsim/segment/metrics.hpp"
#include "splatsim/segment/votes.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace splatsim::pipeline {

namespace fs = std::filesystem;

/// 64-bit FNV-1a, printed as 16 hex digits.
inline std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct Layout {
  fs::path root;

  [[nodiscard]] fs::path segment_dir() const { return root / "segment"; }
  [[nodiscard]] fs::path segmented_ply() const { return segment_dir() / "segmented.ply"; }
  [[nodiscard]] fs::path id_sidecar() const { return segment_dir() / "ids.csv"; }
  [[nodiscard]] fs::path depth_dir() const { return segment_dir() / "depth"; }
  [[nodiscard]] fs::path frames_dir() const { return root / "simulate" / "frames"; }
  [[nodiscard]] fs::path checkpoint() const { return root / "simulate" / "checkpoint.bin"; }
  [[nodiscard]] fs::path render_dir() const { return root / "render"; }
  [[nodiscard]] fs::path poses_dir() const { return render_dir() / "poses"; }
  [[nodiscard]] fs::path metrics_csv() const { return root / "eval" / "metrics.csv"; }
  [[nodiscard]] fs::path manifest() const { return root / "manifest.json"; }

  [[nodiscard]] fs::path frame_file(std::int64_t frame) const {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%05lld.bin", static_cast<long long>(frame));
    return frames_dir() / buf;
  }
};

inline std::string frame_stem(std::int64_t frame) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%05lld", static_cast<long long>(frame));
  return buf;
}

struct StageResult {
  double seconds = 0;
  std::vector<fs::path> outputs;
};

struct ObjectMetrics {
  ObjectId id = 0;
  double miou = 0;
  double mbiou = 0;
  int views = 0;
};

struct MetricTable {
  std::vector<ObjectMetrics> objects;
  double mean_miou = 0;
  double mean_mbiou = 0;
};

/// manifest.json: config hash, per-stage timings and outputs, frame count and
/// metric table. Stages merge into an existing manifest.
class Manifest {
 public:
  Manifest(fs::path path, std::string config_hash) : path_(std::move(path)) {
    if (fs::exists(path_)) {
      try {
        std::ifstream in(path_);
        doc_ = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception&) {
        doc_ = nlohmann::json::object();
      }
    }
    if (!doc_.is_object()) doc_ = nlohmann::json::object();
    if (doc_.value("config_hash", std::string()) != config_hash) doc_ = nlohmann::json::object();
    doc_["config_hash"] = config_hash;
  }

  void record(const std::string& stage, const StageResult& r, const fs::path& root) {
    nlohmann::json outputs = nlohmann::json::array();
    for (const auto& p : r.outputs) outputs.push_back(fs::relative(p, root).generic_string());
    doc_["stages"][stage] = {{"seconds", r.seconds}, {"outputs", outputs}};
  }
  void set_frame_count(std::int64_t n) { doc_["frame_count"] = n; }
  void set_metrics(const MetricTable& t) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& o : t.objects) rows.push_back({{"object_id", o.id}, {"miou", o.miou}, {"mbiou", o.mbiou}});
    doc_["metrics"] = {{"objects", rows}, {"mean_miou", t.mean_miou}, {"mean_mbiou", t.mean_mbiou}};
  }

  void save() {
    const std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    doc_["updated_at"] = stamp;
    fs::create_directories(path_.parent_path());
    std::ofstream out(path_);
    if (!out) throw IoError("cannot write '" + path_.string() + "'");
    out << doc_.dump(2) << "\n";
  }

  [[nodiscard]] const nlohmann::json& json() const { return doc_; }

 private:
  fs::path path_;
  nlohmann::json doc_ = nlohmann::json::object();
};

// ---------------------------------------------------------------- segment

inline void write_id_sidecar(const GaussianScene& scene, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "gaussian_index,object_id\n";
  for (std::size_t i = 0; i < scene.size(); ++i) out << i << "," << scene.gaussians[i].id_or_background() << "\n";
}

inline StageResult cmd_segment(const PipelineConfig& cfg) {
  log::Stopwatch clock;
  const Layout out{cfg.output_dir};
  GaussianScene scene = load_gaussian_ply(cfg.scene);
  const auto cams = load_cameras(cfg.cameras);
  if (!fs::is_directory(cfg.mask_dir)) throw IoError("mask directory '" + cfg.mask_dir.string() + "' does not exist");
  const auto masks = load_id_masks(cfg.mask_dir, cams);
  log::info("segment", "loaded inputs",
            "gaussians=" + std::to_string(scene.size()) + " views=" + std::to_string(cams.size()));

  fs::remove_all(out.depth_dir());
  fs::create_directories(out.depth_dir());
  StageResult r;
  VoteTable votes(scene.size());
  for (std::size_t v = 0; v < cams.size(); ++v) {
    const DepthMap depth = render_surface_depth(scene, cams[v], cfg.segmentation.tau_T);
    const fs::path depth_path = out.depth_dir() / (cams[v].name + ".depth");
    save_depth_map(depth, depth_path);
    r.outputs.push_back(depth_path);
    assign_view_votes(scene, cams[v], depth, masks[v], cfg.segmentation.tau_d, votes);
  }
  apply_ids(scene, vote_final_ids(votes));

  std::map<ObjectId, std::size_t> counts;
  for (const auto& g : scene.gaussians) ++counts[g.id_or_background()];
  std::string summary;
  for (const auto& [id, n] : counts) summary += " id" + std::to_string(id) + "=" + std::to_string(n);
  log::info("segment", "assigned ids", summary.substr(summary.empty() ? 0 : 1));

  save_gaussian_ply(scene, out.segmented_ply());
  write_id_sidecar(scene, out.id_sidecar());
  r.outputs.insert(r.outputs.begin(), {out.segmented_ply(), out.id_sidecar()});
  r.seconds = clock.seconds();
  return r;
}

// ---------------------------------------------------------------- simulate

/// The labelled scene the later stages work on: the segmentation output when
/// present, else the input scene if it already carries ids.
inline GaussianScene load_labelled_scene(const PipelineConfig& cfg) {
  const Layout out{cfg.output_dir};
  if (fs::exists(out.segmented_ply())) return load_gaussian_ply(out.segmented_ply());
  GaussianScene scene = load_gaussian_ply(cfg.scene);
  if (!scene.has_ids())
    throw IoError("no segmented scene at '" + out.segmented_ply().string() + "' and the input scene has no ids");
  return scene;
}

inline mpm::GridConfig grid_config(const PipelineConfig& cfg, const GaussianScene& scene) {
  mpm::GridConfig g;
  g.resolution = cfg.sim.resolution;
  g.dx = cfg.sim.dx;
  g.boundary_cells = cfg.sim.boundary_cells;
  g.ground = cfg.sim.ground;
  if (cfg.sim.origin) {
    g.origin = *cfg.sim.origin;
  } else {
    std::vector<Vec3> pts;
    for (const auto& gs : scene.gaussians)
      if (gs.id_or_background() != kBackgroundId && cfg.materials.count(gs.id_or_background())) pts.push_back(gs.mean());
    g.origin = mpm::centered_origin(pts, g.resolution, g.dx);
  }
  return g;
}

/// Only objects with a material entry are simulated; the rest stay static.
inline GaussianScene simulated_view(const PipelineConfig& cfg, GaussianScene scene) {
  for (auto& g : scene.gaussians)
    if (g.object_id && !cfg.materials.count(*g.object_id)) g.object_id = kBackgroundId;
  return scene;
}

struct SimulateOptions {
  bool resume = false;  // continue from simulate/checkpoint.bin
};

inline StageResult cmd_simulate(const PipelineConfig& cfg, const SimulateOptions& opt = {}) {
  log::Stopwatch clock;
  const Layout out{cfg.output_dir};
  if (cfg.materials.empty()) throw ConfigError("no materials configured; nothing to simulate");
  const GaussianScene scene = simulated_view(cfg, load_labelled_scene(cfg));
  mpm::SimState st = mpm::init_sim(scene, cfg.materials, grid_config(cfg, scene));
  const double dt_hint = mpm::suggested_dt(st);
  if (cfg.sim.dt > dt_hint)
    log::warn("simulate", "dt exceeds the CFL guidance",
              "dt=" + std::to_string(cfg.sim.dt) + " suggested=" + std::to_string(dt_hint));

  if (opt.resume) {
    if (!fs::exists(out.checkpoint())) throw IoError("no checkpoint at '" + out.checkpoint().string() + "'");
    mpm::load_checkpoint(st, out.checkpoint());
    if (st.step % cfg.sim.frame_stride != 0)
      throw DataError("checkpoint step " + std::to_string(st.step) + " is not on a frame boundary");
    log::info("simulate", "resumed", "step=" + std::to_string(st.step));
  } else {
    fs::remove_all(out.frames_dir());
  }
  fs::create_directories(out.frames_dir());
  log::info("simulate", "initialized",
            "particles=" + std::to_string(st.particles.size()) + " steps=" + std::to_string(cfg.sim.steps) +
                " dt=" + std::to_string(cfg.sim.dt));

  const mpm::StepParams sp{cfg.sim.dt, cfg.sim.gravity};
  auto dump = [&] {
    const std::int64_t frame = st.step / cfg.sim.frame_stride;
    mpm::save_frame(mpm::capture_frame(st), out.frame_file(frame));
    mpm::save_checkpoint(st, out.checkpoint());
    log::info("simulate", "frame", "frame=" + std::to_string(frame) + " step=" + std::to_string(st.step) +
                                       " wall=" + std::to_string(clock.seconds()));
  };
  if (!opt.resume) dump();
  try {
    while (st.step < cfg.sim.steps) {
      mpm::step(st, sp);
      if (st.step % cfg.sim.frame_stride == 0) dump();
    }
  } catch (const SimulationError&) {
    log::warn("simulate", "unstable step; last good checkpoint retained", "path=" + out.checkpoint().string());
    throw;
  }

  StageResult r;
  for (const auto& e : fs::directory_iterator(out.frames_dir())) r.outputs.push_back(e.path());
  std::sort(r.outputs.begin(), r.outputs.end());
  r.outputs.push_back(out.checkpoint());
  r.seconds = clock.seconds();
  return r;
}

inline std::vector<fs::path> trajectory_files(const PipelineConfig& cfg) {
  const Layout out{cfg.output_dir};
  std::vector<fs::path> files;
  if (fs::is_directory(out.frames_dir()))
    for (const auto& e : fs::directory_iterator(out.frames_dir()))
      if (e.path().extension() == ".bin") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  return files;
}

// ---------------------------------------------------------------- render

inline std::map<ObjectId, kinematics::ClampParams> clamp_params(const PipelineConfig& cfg, const GaussianScene& scene) {
  std::map<ObjectId, kinematics::ClampParams> out;
  for (const auto& [id, m] : cfg.materials) {
    auto p = kinematics::default_clamp_params(extract_object(scene, id), cfg.clamp.lambda_R, cfg.clamp.lambda_S);
    if (cfg.clamp.tau_min) p.tau_min = *cfg.clamp.tau_min;
    if (cfg.clamp.tau_max) p.tau_max = *cfg.clamp.tau_max;
    p.validate();
    out[id] = p;
  }
  return out;
}

inline std::vector<Camera> render_cameras(const PipelineConfig& cfg) {
  const auto all = load_cameras(cfg.render.cameras.value_or(cfg.cameras));
  if (cfg.render.views.empty()) return all;
  std::vector<Camera> out;
  for (int v : cfg.render.views) {
    if (v < 0 || std::size_t(v) >= all.size())
      throw ConfigError("render.views: index " + std::to_string(v) + " outside the camera set of " +
                        std::to_string(all.size()));
    out.push_back(all[std::size_t(v)]);
  }
  return out;
}

inline RenderOptions render_options(const PipelineConfig& cfg) {
  RenderOptions o;
  o.background = cfg.render.background;
  o.tile_size = cfg.render.tile_size;
  return o;
}

inline void check_finite(const Image& img, const std::string& what) {
  for (const auto& px : img.data)
    for (float c : px)
      if (!std::isfinite(c)) throw SimulationError("non-finite pixel in " + what, -1, -1);
}

inline StageResult cmd_render(const PipelineConfig& cfg) {
  log::Stopwatch clock;
  const Layout out{cfg.output_dir};
  const auto frames = trajectory_files(cfg);
  if (frames.empty()) throw IoError("no trajectory files in '" + out.frames_dir().string() + "'");
  const GaussianScene scene = simulated_view(cfg, load_labelled_scene(cfg));
  const auto cams = render_cameras(cfg);
  const auto params = clamp_params(cfg, scene);
  const kinematics::PoseOptions pose_opt{cfg.clamp.mode, cfg.clamp.reproject_rotation};
  const RenderOptions ropt = render_options(cfg);

  fs::remove_all(out.render_dir());
  fs::create_directories(out.poses_dir());
  StageResult r;
  for (const auto& file : frames) {
    const mpm::Frame frame = mpm::load_frame(file);
    const auto posed = kinematics::update_gaussians(scene, frame, params, pose_opt);
    const std::string stem = file.stem().string();

    std::vector<mpm::PoseRecord> poses;
    poses.reserve(frame.records.size());
    for (const auto& rec : frame.records) {
      const auto gi = std::size_t(rec.gaussian_index);
      poses.push_back({rec.gaussian_index, posed.scene.gaussians[gi].mean(), posed.transforms[gi]});
    }
    mpm::save_poses(frame.step, frame.time, poses, out.poses_dir() / (stem + ".bin"));
    r.outputs.push_back(out.poses_dir() / (stem + ".bin"));

    for (const auto& cam : cams) {
      const Image img = render_rgb(prepare_view(posed.scene, cam, posed.transforms, ropt), ropt);
      check_finite(img, stem + " view " + cam.name);
      const fs::path png_path = out.render_dir() / (stem + "_" + cam.name + ".png");
      png::write_rgb8(png_path, img);
      r.outputs.push_back(png_path);
    }
    log::info("render", "frame", "file=" + stem + " views=" + std::to_string(cams.size()) +
                                     " wall=" + std::to_string(clock.seconds()));
  }
  r.seconds = clock.seconds();
  return r;
}

// ---------------------------------------------------------------- eval

/// Per-pixel id of the nearest object surface, each object rendered on its
/// own at transmittance threshold tau_T. Background Gaussians are ignored.
inline IdMask render_id_mask(const GaussianScene& scene, const Camera& cam, double tau_T,
                             const RenderOptions& opt = {}) {
  IdMask ids(cam.width, cam.height, kBackgroundId);
  Raster<float> nearest(cam.width, cam.height, std::numeric_limits<float>::infinity());
  for (ObjectId id : scene_ids(scene)) {
    if (id == kBackgroundId) continue;
    const DepthMap d = render_surface_depth(extract_object(scene, id), cam, tau_T, opt);
    for (int y = 0; y < cam.height; ++y)
      for (int x = 0; x < cam.width; ++x)
        if (d.has_surface(x, y) && d(x, y) < nearest(x, y)) {
          nearest(x, y) = d(x, y);
          ids(x, y) = id;
        }
  }
  return ids;
}

/// Per-object IoU and Boundary IoU, averaged over the views where the object
/// appears in the prediction or the ground truth.
inline MetricTable score_views(const std::vector<IdMask>& pred, const std::vector<IdMask>& gt,
                               std::optional<double> boundary_radius) {
  if (pred.size() != gt.size()) throw DataError("prediction and ground truth have different view counts");
  std::map<ObjectId, ObjectMetrics> acc;
  for (std::size_t v = 0; v < pred.size(); ++v) {
    check_same_size(pred[v], gt[v]);
    const double radius = boundary_radius.value_or(default_boundary_radius(gt[v].width, gt[v].height));
    for (ObjectId id : metrics_detail::object_ids(pred[v], gt[v])) {
      auto& m = acc[id];
      m.id = id;
      const IdMask p = select_id(pred[v], id), g = select_id(gt[v], id);
      m.miou += mask_iou(p, g);
      m.mbiou += boundary_iou(p, g, radius);
      ++m.views;
    }
  }
  MetricTable t;
  for (auto& [id, m] : acc) {
    m.miou /= m.views;
    m.mbiou /= m.views;
    t.objects.push_back(m);
    t.mean_miou += m.miou;
    t.mean_mbiou += m.mbiou;
  }
  if (t.objects.empty()) {
    t.mean_miou = t.mean_mbiou = 1.0;
  } else {
    t.mean_miou /= double(t.objects.size());
    t.mean_mbiou /= double(t.objects.size());
  }
  return t;
}

inline void write_metrics_csv(const MetricTable& t, const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << std::setprecision(6) << std::fixed;
  out << "object_id,miou,mbiou,views\n";
  for (const auto& o : t.objects) out << o.id << "," << o.miou << "," << o.mbiou << "," << o.views << "\n";
  out << "mean," << t.mean_miou << "," << t.mean_mbiou << ",\n";
}

inline std::string format_metrics(const MetricTable& t) {
  std::ostringstream s;
  s << std::setprecision(4) << std::fixed;
  s << "object    mIoU    mBIoU\n";
  for (const auto& o : t.objects) s << std::setw(6) << o.id << "  " << o.miou << "  " << o.mbiou << "\n";
  s << "  mean  " << t.mean_miou << "  " << t.mean_mbiou << "\n";
  return s.str();
}

inline StageResult cmd_eval(const PipelineConfig& cfg, MetricTable* table = nullptr) {
  log::Stopwatch clock;
  const Layout out{cfg.output_dir};
  if (!cfg.gt_mask_dir) throw ConfigError("eval needs gt_mask_dir");
  const GaussianScene scene = load_labelled_scene(cfg);
  const auto cams = load_cameras(cfg.cameras);
  const auto gt = load_id_masks(*cfg.gt_mask_dir, cams);
  std::vector<IdMask> pred;
  pred.reserve(cams.size());
  for (const auto& cam : cams) pred.push_back(render_id_mask(scene, cam, cfg.segmentation.tau_T));
  const MetricTable t = score_views(pred, gt, cfg.segmentation.boundary_radius);
  write_metrics_csv(t, out.metrics_csv());
  if (table) *table = t;
  StageResult r;
  r.outputs.push_back(out.metrics_csv());
  r.seconds = clock.seconds();
  log::info("eval", "scored", "objects=" + std::to_string(t.objects.size()) + " miou=" +
                                  std::to_string(t.mean_miou) + " mbiou=" + std::to_string(t.mean_mbiou));
  return r;
}

}  // namespace splatsim::pipeline
