// splatsim: segment | simulate | render | eval | all | synth
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure, 1 other.

#include "splatsim/parallel.hpp"
#include "splatsim/pipeline/stages.hpp"
#include "splatsim/pipeline/synthetic.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace splatsim;
namespace fs = std::filesystem;

struct Overrides {
  std::optional<std::string> output_dir;
  std::optional<double> tau_T, tau_d, dt, lambda_R, lambda_S, tau_min, tau_max;
  std::optional<std::int64_t> steps, frame_stride;
  std::optional<std::string> clamp_mode;
  std::optional<std::vector<int>> views;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

void add_overrides(CLI::App* app, Overrides& o) {
  app->add_option("--output-dir", o.output_dir, "Output directory");
  app->add_option("--tau-T", o.tau_T, "Transmittance threshold");
  app->add_option("--tau-d", o.tau_d, "Relative depth tolerance");
  app->add_option("--dt", o.dt, "Simulation time step");
  app->add_option("--steps", o.steps, "Number of substeps");
  app->add_option("--frame-stride", o.frame_stride, "Substeps per dumped frame");
  app->add_option("--lambda-R", o.lambda_R, "Rotation correction weight");
  app->add_option("--lambda-S", o.lambda_S, "Scale correction weight");
  app->add_option("--tau-min", o.tau_min, "Lower clamp bound");
  app->add_option("--tau-max", o.tau_max, "Upper clamp bound");
  app->add_option("--clamp-mode", o.clamp_mode, "eigen_clamp | raw | fixed");
  app->add_option("--views", o.views, "Camera indices to render");
  app->add_option("--seed", o.seed, "Seed for stochastic choices");
  app->add_option("--threads", o.threads, "Worker threads (overrides SPLATSIM_NUM_THREADS)");
}

std::string apply(const Overrides& o, PipelineConfig& c) {
  std::string text;
  auto note = [&](const char* k, const auto& v) {
    std::ostringstream s;
    s << k << "=" << v << ";";
    text += s.str();
  };
  if (o.output_dir) c.output_dir = *o.output_dir;
  if (o.tau_T) note("tau_T", c.segmentation.tau_T = *o.tau_T);
  if (o.tau_d) note("tau_d", c.segmentation.tau_d = *o.tau_d);
  if (o.dt) note("dt", c.sim.dt = *o.dt);
  if (o.steps) note("steps", c.sim.steps = *o.steps);
  if (o.frame_stride) note("frame_stride", c.sim.frame_stride = *o.frame_stride);
  if (o.lambda_R) note("lambda_R", c.clamp.lambda_R = *o.lambda_R);
  if (o.lambda_S) note("lambda_S", c.clamp.lambda_S = *o.lambda_S);
  if (o.tau_min) note("tau_min", *(c.clamp.tau_min = *o.tau_min));
  if (o.tau_max) note("tau_max", *(c.clamp.tau_max = *o.tau_max));
  if (o.clamp_mode) {
    c.clamp.mode = config_detail::parse_mode(*o.clamp_mode);
    note("clamp_mode", *o.clamp_mode);
  }
  if (o.views) {
    c.render.views = *o.views;
    for (int v : *o.views) note("view", v);
  }
  if (o.seed) note("seed", c.seed = *o.seed);
  c.validate();
  return text;
}

int run(const std::string& command, const fs::path& config_path, const Overrides& o, bool resume) {
  configure_threads_from_env();
  if (o.threads) set_num_threads(*o.threads);

  PipelineConfig cfg = load_config(config_path);
  const std::string extra = apply(o, cfg);
  const pipeline::Layout out{cfg.output_dir};
  fs::create_directories(out.root);
  pipeline::Manifest manifest(out.manifest(), pipeline::fnv1a_hex(read_text(config_path) + "\n" + extra));

  const bool all = command == "all";
  if (all || command == "segment") {
    manifest.record("segment", pipeline::cmd_segment(cfg), out.root);
    manifest.save();
  }
  if (all || command == "simulate") {
    manifest.record("simulate", pipeline::cmd_simulate(cfg, {resume}), out.root);
    manifest.set_frame_count(std::int64_t(pipeline::trajectory_files(cfg).size()));
    manifest.save();
  }
  if (all || command == "render") {
    manifest.record("render", pipeline::cmd_render(cfg), out.root);
    manifest.set_frame_count(std::int64_t(pipeline::trajectory_files(cfg).size()));
    manifest.save();
  }
  if (all || command == "eval") {
    if (all && !cfg.gt_mask_dir) {
      log::info("eval", "skipped: no gt_mask_dir configured");
    } else {
      pipeline::MetricTable table;
      manifest.record("eval", pipeline::cmd_eval(cfg, &table), out.root);
      manifest.set_metrics(table);
      manifest.save();
      std::cout << pipeline::format_metrics(table);
    }
  }
  return 0;
}

int guarded(const std::string& stage, const std::function<int()>& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    log::line(log::Level::Error, stage, e.what());
    return 2;
  } catch (const SimulationError& e) {
    log::line(log::Level::Error, stage, e.what(),
              "step=" + std::to_string(e.step) + " particle=" + std::to_string(e.particle));
    return 3;
  } catch (const std::exception& e) {
    log::line(log::Level::Error, stage, e.what());
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian-splat segmentation, MPM simulation and rendering"};
  app.require_subcommand(1);

  std::string config;
  Overrides overrides;
  bool resume = false;
  for (const char* name : {"segment", "simulate", "render", "eval", "all"}) {
    auto* sub = app.add_subcommand(name, std::string("Run the ") + name + " stage");
    sub->add_option("config", config, "Pipeline config (JSON)")->required();
    add_overrides(sub, overrides);
    if (std::string(name) == "simulate") sub->add_flag("--resume", resume, "Continue from the last checkpoint");
  }

  fs::path synth_dir;
  synth::DatasetOptions synth_opt;
  auto* synth_cmd = app.add_subcommand("synth", "Write the synthetic two-ball dataset");
  synth_cmd->add_option("dir", synth_dir, "Output directory")->required();
  synth_cmd->add_option("--gaussians-per-ball", synth_opt.ball.count, "Splats per ball");
  synth_cmd->add_option("--image-size", synth_opt.image_size, "Mask and render size (px)");
  synth_cmd->add_flag("--solid", synth_opt.ball.solid, "Fill the balls instead of only their surface");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  const auto* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  if (command == "synth")
    return guarded("synth", [&] {
      synth::write_dataset(synth_dir, synth_opt);
      return 0;
    });
  return guarded(command, [&] { return run(command, config, overrides, resume); });
}
