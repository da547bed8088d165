#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "randt/config.hpp"
#include "randt/dataset.hpp"
#include "randt/metrics.hpp"
#include "randt/pipeline.hpp"
#include "randt/simulation.hpp"

namespace {

struct RunArgs {
  std::string config;
  std::string preset;
  std::string dataset;
  std::string out;
  std::string diagnostics;
  std::string loop_log;
  std::string graph;
  bool no_loop_closure = false;
  bool deterministic = false;
};

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  return os;
}

int run(const RunArgs& a) {
  randt::SlamConfig cfg = a.config.empty() ? randt::make_preset(a.preset.empty() ? "indoor" : a.preset)
                                           : randt::load_config(a.config);
  if (a.no_loop_closure) cfg.loop.enabled = false;
  const randt::Dataset data = randt::load_dataset(a.dataset);
  if (!data.imu) cfg.use_imu = false;

  const auto start = std::chrono::steady_clock::now();
  randt::SlamSession session(cfg, randt::SessionOptions{a.deterministic});
  if (data.imu) session.add_imu(*data.imu);
  for (const auto& scan : data.scans) session.process_scan(scan);
  const randt::Trajectory traj = session.finalize();
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  randt::write_tum(a.out, traj);
  if (!a.diagnostics.empty()) {
    auto os = open_out(a.diagnostics);
    for (const auto& d : session.diagnostics()) os << randt::format_diagnostics(d) << '\n';
  }
  if (!a.loop_log.empty()) {
    auto os = open_out(a.loop_log);
    for (const auto& e : session.loop_events()) os << randt::format_loop_event(e) << '\n';
  }
  if (!a.graph.empty()) {
    auto os = open_out(a.graph);
    randt::write_g2o(os, session.graph());
  }
  std::size_t accepted = 0;
  for (const auto& e : session.loop_events()) accepted += e.accepted ? 1 : 0;
  std::size_t degraded = 0;
  for (auto s : session.statuses()) degraded += s == randt::ScanStatus::degraded ? 1 : 0;
  std::printf("scans = %zu\nkeyframes = %zu\nsubmaps = %zu\nloop_closures = %zu\ndegraded = %zu\nseconds = %.3f\n",
              traj.size(), session.graph().size(), session.submap_count(), accepted, degraded, seconds);
  return 0;
}

int simulate(const std::string& world_path, std::uint64_t seed, const std::string& out) {
  const randt::SyntheticWorld world = randt::load_world(world_path);
  randt::SimulationStats stats;
  const randt::Dataset data = randt::simulate(world, seed, &stats);
  randt::write_dataset(out, data);
  std::printf("scans = %zu\nbeams = %zu\nreturns = %zu\nclutter_fraction = %.6f\n", data.scans.size(), stats.beams,
              stats.returns, stats.clutter_fraction());
  return 0;
}

int evaluate(const std::string& est_path, const std::string& gt_path, const std::string& metric, bool align) {
  const randt::Trajectory est = randt::read_tum(est_path);
  const randt::Trajectory gt = randt::read_tum(gt_path);
  const bool all = metric == "all";
  if (all || metric == "ate") std::printf("ate_m = %.6f\n", randt::ate(est, gt, align));
  if (all || metric == "rpe") {
    const auto r = randt::mean_rpe(est, gt);
    std::printf("rpe_translation_m = %.6f\nrpe_rotation_deg = %.6f\n", r.translation, r.rotation_deg);
  }
  if (all || metric == "kitti") {
    try {
      const auto d = randt::kitti_drift(est, gt);
      std::printf("kitti_translation_percent = %.6f\nkitti_rotation_deg_per_100m = %.6f\n", d.translation_percent,
                  d.rotation_deg_per_100m);
    } catch (const randt::TrajectoryTooShort& e) {
      if (!all) throw;
      std::printf("kitti = n/a (%s)\n", e.what());
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Radar SLAM with intensity-augmented NDT"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run_cmd = app.add_subcommand("run", "Run SLAM on a dataset directory");
  run_cmd->add_option("--config", run_args.config, "Config file (key = value)")->check(CLI::ExistingFile);
  run_cmd->add_option("--preset", run_args.preset, "Preset when no config file is given")
      ->check(CLI::IsMember({"indoor", "outdoor", "mixed", "oxford", "custom"}));
  run_cmd->add_option("--dataset", run_args.dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  run_cmd->add_option("--out", run_args.out, "Output TUM trajectory")->required();
  run_cmd->add_option("--diagnostics", run_args.diagnostics, "Per-scan diagnostic log");
  run_cmd->add_option("--loop-log", run_args.loop_log, "Loop-closure event log");
  run_cmd->add_option("--graph", run_args.graph, "Pose graph export (g2o)");
  run_cmd->add_flag("--no-loop-closure", run_args.no_loop_closure, "Disable loop closure");
  run_cmd->add_flag("--deterministic", run_args.deterministic, "Single-threaded loop detection");

  std::string world;
  std::uint64_t seed = 0;
  std::string sim_out;
  auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic dataset");
  sim_cmd->add_option("--world", world, "World description")->required()->check(CLI::ExistingFile);
  sim_cmd->add_option("--seed", seed, "Random seed")->required();
  sim_cmd->add_option("--out", sim_out, "Output dataset directory")->required();

  std::string est;
  std::string gt;
  std::string metric = "all";
  bool align = false;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a trajectory against ground truth");
  eval_cmd->add_option("--est", est, "Estimated TUM trajectory")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--gt", gt, "Ground-truth TUM trajectory")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--metric", metric, "ate, rpe, kitti or all")
      ->check(CLI::IsMember({"ate", "rpe", "kitti", "all"}));
  eval_cmd->add_flag("--align", align, "Rigidly align the estimate before ATE");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run_cmd) return run(run_args);
    if (*sim_cmd) return simulate(world, seed, sim_out);
    if (*eval_cmd) return evaluate(est, gt, metric, align);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
