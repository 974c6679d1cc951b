// Acceptance run: one PASS/FAIL line per criterion, exit status 0 iff all pass.

#include "splatsim/kinematics/eigen_clamp.hpp"
#include "splatsim/mpm/constitutive.hpp"
#include "splatsim/mpm/solver.hpp"
#include "splatsim/parallel.hpp"
#include "splatsim/pipeline/stages.hpp"
#include "splatsim/pipeline/synthetic.hpp"
#include "test_util.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>

using namespace splatsim;
namespace fs = std::filesystem;
using fixtures::TempDir;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
  std::string fingerprint;  // compared across reruns
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

template <class T>
void hash_bytes(std::string& h, const T& v) {
  h += pipeline::fnv1a_hex(std::string_view(reinterpret_cast<const char*>(&v), sizeof v));
  h = pipeline::fnv1a_hex(h);
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Mat3 random_rotation(std::mt19937& rng) {
  std::normal_distribution<double> nd;
  return Quat(nd(rng), nd(rng), nd(rng), nd(rng)).normalized().toRotationMatrix();
}

// ---------------------------------------------------------------- 1

Outcome synthetic_segmentation() {
  TempDir dir("acc_seg");
  synth::DatasetOptions o;  // 2 × 2500 splats, 8 views of 256²
  synth::write_dataset(dir.path(), o);
  const PipelineConfig cfg = load_config(dir / "config.json");
  const auto t0 = std::chrono::steady_clock::now();
  pipeline::cmd_segment(cfg);
  pipeline::MetricTable t;
  pipeline::cmd_eval(cfg, &t);
  const double secs = seconds_since(t0);

  const GaussianScene seg = load_gaussian_ply(pipeline::Layout{cfg.output_dir}.segmented_ply());
  const std::size_t per_ball = std::size_t(o.ball.count);
  std::size_t ok = 0;
  Outcome r;
  for (std::size_t i = 0; i < seg.size(); ++i) {
    const ObjectId id = seg.gaussians[i].id_or_background();
    ok += id == (i < per_ball ? 1u : 2u);
    hash_bytes(r.fingerprint, id);
  }
  hash_bytes(r.fingerprint, t.mean_miou);
  hash_bytes(r.fingerprint, t.mean_mbiou);
  const double frac = double(ok) / double(seg.size());
  r.pass = seg.size() >= 4000 && frac >= 0.99 && t.mean_miou >= 0.95 && t.mean_mbiou >= 0.85 && secs < 60;
  r.detail = fmt("gaussians=%zu tau_T=%.2f tau_d=%.2f correct=%.2f%% (>=99%%) mIoU=%.4f (>=0.95) mBIoU=%.4f (>=0.85) "
                 "time=%.1fs (<60s)",
                 seg.size(), cfg.segmentation.tau_T, cfg.segmentation.tau_d, 100 * frac, t.mean_miou, t.mean_mbiou, secs);
  return r;
}

// ---------------------------------------------------------------- 2

Outcome renderer_golden() {
  const Camera cam = fixtures::axis_camera(64, 48, 120);
  const double sigma = 0.05, z = 2.5, opacity = 0.8;
  const Vec3 rgb(0.9, 0.4, 0.1), bg(0.2, 0.3, 0.5);
  GaussianScene scene;
  scene.gaussians.push_back(fixtures::splat_at(Vec3(0, 0, z), sigma, opacity, rgb));
  RenderOptions opt;
  opt.background = bg;
  const Image img = render_rgb(scene, cam, {}, opt);
  // On the optical axis the screen covariance is isotropic: (fσ/z)² + dilation.
  const double var = std::pow(cam.fx * sigma / z, 2) + kLowPassDilation;
  const double o = scene.gaussians[0].opacity();
  double worst = 0;
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const double a = std::min(kMaxAlpha, o * std::exp(-0.5 * (std::pow(x - cam.cx, 2) + std::pow(y - cam.cy, 2)) / var));
      for (int c = 0; c < 3; ++c)
        worst = std::max(worst, std::abs(img(x, y)[std::size_t(c)] - (a * rgb[c] + (1 - a) * bg[c])));
    }

  const Camera dcam = fixtures::axis_camera(33, 33, 100);
  GaussianScene opaque;
  opaque.gaussians.push_back(fixtures::splat_at(Vec3(0, 0, 2.0), 0.1, 0.999, Vec3::Ones()));
  const DepthMap d = render_surface_depth(opaque, dcam, 0.5);
  const double centre = d(16, 16);
  Outcome r;
  r.pass = worst < 1e-3 && std::abs(centre - 2.0) < 1e-6;
  r.detail = fmt("max pixel error=%.2e (<1e-3) center depth=%.6f (2.0)", worst, centre);
  return r;
}

// ---------------------------------------------------------------- 3

GaussianScene lattice_cube(const Vec3& lo, int n, double h) {
  GaussianScene s;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        GaussianPrimitive g;
        g.position = (lo + h * Vec3(i + 0.5, j + 0.5, k + 0.5)).cast<float>();
        g.object_id = 1;
        s.gaussians.push_back(g);
      }
  return s;
}

void hash_state(std::string& h, const mpm::SimState& st) {
  for (const auto& p : st.particles) {
    hash_bytes(h, p.x);
    hash_bytes(h, p.v);
    hash_bytes(h, p.F);
    hash_bytes(h, p.C);
  }
}

Outcome mpm_suite() {
  Outcome r;
  mpm::GridConfig grid;
  grid.resolution.setConstant(32);
  grid.dx = 1.0 / 32;

  // Elastic cube at rest.
  mpm::SimState rest = mpm::init_sim(lattice_cube(Vec3(0.4, 0.4, 0.4), 8, grid.dx / 2), {{1, mpm::Material{}}}, grid);
  const auto start = rest.particles;
  for (int k = 0; k < 100; ++k) mpm::step(rest, {1e-4, Vec3::Zero()});
  double moved = 0;
  for (std::size_t i = 0; i < start.size(); ++i) moved = std::max(moved, (rest.particles[i].x - start[i].x).norm());
  hash_state(r.fingerprint, rest);

  // Free fall for 0.5 s: the grid spans 2.4 m vertically.
  mpm::GridConfig tall;
  tall.resolution = Eigen::Vector3i(16, 16, 96);
  tall.dx = 0.025;
  mpm::SimState fall = mpm::init_sim(lattice_cube(Vec3(0.15, 0.15, 2.0), 4, tall.dx / 2), {{1, mpm::Material{}}}, tall);
  const double z0 = fall.center_of_mass().z();
  for (int k = 0; k < 5000; ++k) mpm::step(fall, {1e-4, Vec3(0, 0, -9.8)});
  const double drop = z0 - fall.center_of_mass().z(), expect = 0.5 * 9.8 * 0.25;
  const double fall_err = std::abs(drop - expect) / expect;
  hash_state(r.fingerprint, fall);

  // Momentum with g = 0 and a perturbed velocity field.
  mpm::Material m;
  m.initial_velocity = Vec3(0.5, 0.2, -0.1);
  mpm::SimState mom = mpm::init_sim(lattice_cube(Vec3(0.35, 0.35, 0.35), 10, grid.dx / 2), {{1, m}}, grid);
  std::mt19937 rng(11);
  std::normal_distribution<double> nd(0.0, 0.05);
  for (auto& p : mom.particles) p.v += Vec3(nd(rng), nd(rng), nd(rng));
  const Vec3 p0 = mom.total_momentum();
  for (int k = 0; k < 100; ++k) mpm::step(mom, {1e-5, Vec3::Zero()});
  const double drift = (mom.total_momentum() - p0).norm() / p0.norm();
  hash_state(r.fingerprint, mom);

  r.pass = moved < 1e-9 && fall_err < 0.01 && drift < 1e-6;
  r.detail = fmt("rest displacement=%.1e (<1e-9) free-fall drop=%.5f m vs %.5f m err=%.3f%% (<1%%) "
                 "momentum drift=%.1e (<1e-6)",
                 moved, drop, expect, 100 * fall_err, drift);
  return r;
}

// ---------------------------------------------------------------- 4

Outcome stress_gradient() {
  const mpm::Material m;
  std::mt19937 rng(12);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    const Mat3 F = random_rotation(rng) * Vec3(u(rng), u(rng), u(rng)).asDiagonal() * random_rotation(rng).transpose();
    const Mat3 P = mpm::piola_kirchhoff(F, m);
    Mat3 G;
    const double h = 1e-6;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        Mat3 a = F, b = F;
        a(i, j) += h;
        b(i, j) -= h;
        G(i, j) = (mpm::fixed_corotated_energy(a, m.mu(), m.lambda()) - mpm::fixed_corotated_energy(b, m.mu(), m.lambda())) /
                  (2 * h);
      }
    worst = std::max(worst, (P - G).norm() / G.norm());
  }
  Outcome r;
  r.pass = worst < 1e-4;
  r.detail = fmt("max relative error=%.2e over 100 F (<1e-4)", worst);
  return r;
}

// ---------------------------------------------------------------- 5

Outcome eigen_clamp_suite() {
  std::mt19937 rng(13);
  std::uniform_real_distribution<double> lg(-2.0, 2.0), us(0.005, 0.2), ur(0.011, 0.099);
  kinematics::ClampParams p{0.01, 0.1, 1.2, 0.8};
  long bound_fail = 0, range_fail = 0;
  double worst_cond = 0;
  for (int t = 0; t < 10000; ++t) {
    const Mat3 R = random_rotation(rng);
    const Vec3 S(us(rng), us(rng), us(rng));
    const Vec3 sv(std::pow(10.0, lg(rng)), std::pow(10.0, lg(rng)), std::pow(10.0, lg(rng)));
    const Mat3 F = random_rotation(rng) * sv.asDiagonal() * random_rotation(rng).transpose();
    worst_cond = std::max(worst_cond, sv.maxCoeff() / sv.minCoeff());
    const auto me = kinematics::eigen_decompose_matched(kinematics::deformed_covariance(R, S, F), R);
    const Vec3 st = kinematics::adaptive_eigen_clamp(me.axes, p.tau_min, p.tau_max);
    const auto pose = kinematics::blend_correction(R, S, me.Q, st, p.lambda_R, p.lambda_S);
    for (int i = 0; i < 3; ++i) {
      const double lo = (1 - p.lambda_S) * S[i] + p.lambda_S * p.tau_min;
      const double hi = (1 - p.lambda_S) * S[i] + p.lambda_S * p.tau_max;
      bound_fail += pose.S[i] < lo * (1 - 1e-12) || pose.S[i] > hi * (1 + 1e-12);
    }
    const auto full = kinematics::blend_correction(R, S, me.Q, st, p.lambda_R, 1.0);
    range_fail += (full.S.array() < p.tau_min).any() || (full.S.array() > p.tau_max).any();
  }
  double rest_err = 0;
  for (int t = 0; t < 1000; ++t) {
    const Mat3 R = random_rotation(rng);
    const Vec3 S(ur(rng), ur(rng), ur(rng));
    rest_err = std::max(rest_err, (kinematics::corrected_transform(R, S, Mat3::Identity(), p) - R * S.asDiagonal()).norm());
  }
  Outcome r;
  r.pass = bound_fail == 0 && range_fail == 0 && rest_err < 1e-6;
  r.detail = fmt("10000 samples cond<=%.0f: bound violations=%ld lambda_S=1 out-of-range=%ld identity error=%.1e (<1e-6)",
                 worst_cond, bound_fail, range_fail, rest_err);
  return r;
}

// ---------------------------------------------------------------- 6

Outcome noop_frame() {
  TempDir dir("acc_frame0");
  synth::write_dataset(dir.path());
  PipelineConfig cfg = load_config(dir / "config.json");
  cfg.sim.steps = 0;
  pipeline::cmd_segment(cfg);
  pipeline::cmd_simulate(cfg);
  const GaussianScene scene = pipeline::simulated_view(cfg, pipeline::load_labelled_scene(cfg));
  const mpm::Frame f0 = mpm::load_frame(pipeline::trajectory_files(cfg).front());
  const auto posed = kinematics::update_gaussians(scene, f0, pipeline::clamp_params(cfg, scene));
  double worst = 0;
  for (const auto& cam : pipeline::render_cameras(cfg)) {
    const Image a = render_rgb(posed.scene, cam, posed.transforms, pipeline::render_options(cfg));
    const Image b = render_rgb(scene, cam, {}, pipeline::render_options(cfg));
    for (std::size_t i = 0; i < a.data.size(); ++i)
      for (std::size_t c = 0; c < 3; ++c) worst = std::max(worst, double(std::abs(a.data[i][c] - b.data[i][c])));
  }
  Outcome r;
  r.pass = worst < 1e-5;
  r.detail = fmt("records=%zu max pixel difference=%.2e (<1e-5)", f0.records.size(), worst);
  return r;
}

// ---------------------------------------------------------------- 7

Outcome smoke() {
  TempDir dir("acc_smoke");
  synth::DatasetOptions o;
  o.ball.solid = true;
  o.ball.count = 7350;  // ≈5000 lattice points per ball survive the inset
  synth::write_dataset(dir.path(), o);
  const GaussianScene labelled = synth::make_ball_scene(o.balls, o.ball, true);
  save_gaussian_ply(labelled, dir / "scene.ply");
  const PipelineConfig cfg = load_config(dir / "config.json");

  const auto t0 = std::chrono::steady_clock::now();
  Outcome r;
  std::string failure;
  std::size_t pngs = 0, frames = 0;
  bool inside = true;
  try {
    pipeline::cmd_simulate(cfg);
    const auto rendered = pipeline::cmd_render(cfg);
    for (const auto& p : rendered.outputs)
      if (p.extension() == ".png") {
        ++pngs;
        r.fingerprint = pipeline::fnv1a_hex(r.fingerprint + file_bytes(p));
      }
    const auto files = pipeline::trajectory_files(cfg);
    frames = files.size();
    const GaussianScene scene = pipeline::load_labelled_scene(cfg);
    const mpm::GridConfig grid = pipeline::grid_config(cfg, scene);
    for (const auto& f : files) {
      r.fingerprint = pipeline::fnv1a_hex(r.fingerprint + file_bytes(f));
      for (const auto& rec : mpm::load_frame(f).records) inside = inside && mpm::in_interior(rec.x, grid);
    }
  } catch (const std::exception& e) {
    failure = e.what();
  }
  const double secs = seconds_since(t0);
  const auto& m1 = cfg.materials.at(1);
  r.pass = failure.empty() && inside && frames == 6 && pngs == frames * cfg.render.views.size() && secs < 120;
  r.detail = fmt("particles=%zu E=%.0e nu=%.1f v1=(%g,%g,%g) lambda=(%.1f,%.1f) steps=%lld frames=%zu pngs=%zu "
                 "finite=%s inside=%s time=%.1fs (<120s)%s%s",
                 labelled.size(), m1.youngs_modulus, m1.poisson_ratio, m1.initial_velocity.x(), m1.initial_velocity.y(),
                 m1.initial_velocity.z(), cfg.clamp.lambda_R, cfg.clamp.lambda_S, static_cast<long long>(cfg.sim.steps),
                 frames, pngs, failure.empty() ? "yes" : "no", inside ? "yes" : "no", secs,
                 failure.empty() ? "" : " error: ", failure.c_str());
  return r;
}

// ---------------------------------------------------------------- 9

Outcome squash() {
  // Anisotropic rest splats (axis ratio up to 2) squashed by F = diag(1, 1, 0.01).
  std::mt19937 rng(14);
  std::uniform_real_distribution<double> us(0.02, 0.04);
  GaussianScene scene;
  mpm::Frame frame;
  const Mat3 F = Vec3(1.0, 1.0, 0.01).asDiagonal();
  for (int i = 0; i < 2000; ++i) {
    GaussianPrimitive g;
    const Quat q(random_rotation(rng));
    g.rotation = Eigen::Vector4f(float(q.w()), float(q.x()), float(q.y()), float(q.z()));
    g.log_scale = Vec3(us(rng), us(rng), us(rng)).array().log().cast<float>().matrix();
    g.object_id = 1;
    scene.gaussians.push_back(g);
    frame.records.push_back({i, Vec3::Zero(), F});
  }
  const std::map<ObjectId, kinematics::ClampParams> params{{1, kinematics::default_clamp_params(scene)}};
  const auto clamped = kinematics::update_gaussians(scene, frame, params, {kinematics::CovarianceMode::EigenClamp});
  const auto raw = kinematics::update_gaussians(scene, frame, params, {kinematics::CovarianceMode::RawDeformation});
  double rest_ratio = 0, clamp_ratio = 0, raw_ratio = 0;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    rest_ratio = std::max(rest_ratio, kinematics::axis_ratio(scene.gaussians[i].linear_transform()));
    clamp_ratio = std::max(clamp_ratio, kinematics::axis_ratio(clamped.transforms[i]));
    raw_ratio = std::max(raw_ratio, kinematics::axis_ratio(raw.transforms[i]));
  }
  Eigen::JacobiSVD<Mat3> svd(F);
  const double cond = svd.singularValues()[0] / svd.singularValues()[2];
  Outcome r;
  r.pass = cond >= 100 && clamp_ratio <= 10 * rest_ratio && raw_ratio > 10 * rest_ratio;
  r.detail = fmt("cond(F)=%.0f rest ratio=%.2f clamped=%.2f (<=%.2f) raw=%.2f (>%.2f)", cond, rest_ratio, clamp_ratio,
                 10 * rest_ratio, raw_ratio, 10 * rest_ratio);
  return r;
}

void report(int id, const char* name, const Outcome& o, bool& all) {
  std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << " " << name << ": " << o.detail << std::endl;
  all = all && o.pass;
}

}  // namespace

int main() {
  configure_threads_from_env();
  log::threshold() = log::Level::Warn;
  bool all = true;
  try {
    const Outcome c1 = synthetic_segmentation();
    report(1, "synthetic segmentation", c1, all);
    report(2, "renderer golden", renderer_golden(), all);
    const Outcome c3 = mpm_suite();
    report(3, "mpm rest/ballistic", c3, all);
    report(4, "stress gradient", stress_gradient(), all);
    report(5, "eigen clamp", eigen_clamp_suite(), all);
    report(6, "no-op frame", noop_frame(), all);
    const Outcome c7 = smoke();
    report(7, "end-to-end smoke", c7, all);

    const Outcome r1 = synthetic_segmentation(), r3 = mpm_suite(), r7 = smoke();
    Outcome c8;
    c8.pass = r1.fingerprint == c1.fingerprint && r3.fingerprint == c3.fingerprint && r7.fingerprint == c7.fingerprint &&
              !c7.fingerprint.empty();
    c8.detail = fmt("threads=%d criterion1 %s, criterion3 %s, criterion7 %s", num_threads(),
                    r1.fingerprint == c1.fingerprint ? "identical" : "differs",
                    r3.fingerprint == c3.fingerprint ? "identical" : "differs",
                    r7.fingerprint == c7.fingerprint ? "identical" : "differs");
    report(8, "determinism", c8, all);
    report(9, "squash artifact metric", squash(), all);
  } catch (const std::exception& e) {
    std::cout << "FAIL  acceptance aborted: " << e.what() << std::endl;
    return 1;
  }
  return all ? 0 : 1;
}
