#pragma once

#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "randt/config.hpp"
#include "randt/estimator.hpp"
#include "randt/loop_closure.hpp"
#include "randt/ndt.hpp"
#include "randt/pose_graph.hpp"
#include "randt/trajectory.hpp"

namespace randt {

enum class ScanStatus { bootstrap, ok, degraded };

struct ScanResult {
  double timestamp = 0.0;
  Pose2d global_pose;
  ScanStatus status = ScanStatus::ok;
};

/// One line per scan: timestamp, solved global pose, final cost, LM
/// iterations per stage, correspondence count, status.
struct ScanDiagnostics {
  double timestamp = 0.0;
  Pose2d pose;
  double final_cost = 0.0;
  std::vector<int> iterations_per_stage;
  std::size_t correspondences = 0;
  std::size_t points = 0;
  ScanStatus status = ScanStatus::ok;
};
std::string format_diagnostics(const ScanDiagnostics& d);

struct SessionOptions {
  /// Single-threaded loop detection. Otherwise loop candidates are evaluated
  /// on a background thread and folded in at keyframe boundaries.
  bool deterministic = true;
};

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Work item for the loop detector: immutable snapshots only.
struct LoopJob {
  KeyframeNode query;
  std::vector<KeyframeNode> database;
  // Indexed by submap id; the active submap's grid is null.
  std::vector<std::shared_ptr<const NdtGrid>> grids;
  std::vector<Pose2d> roots;
  std::vector<int> root_nodes;
  std::shared_ptr<const NdtGrid> query_ndt;
};

struct LoopOutcome {
  LoopEvent event;
  std::optional<Constraint> constraint;
};

LoopOutcome run_loop_job(const LoopJob& job, const EstimatorConfig& estimator, const LoopClosureConfig& loop,
                         const Eigen::Matrix3d& omega_lo);

class SlamSession {
 public:
  explicit SlamSession(SlamConfig cfg, SessionOptions options = {});
  ~SlamSession();
  SlamSession(const SlamSession&) = delete;
  SlamSession& operator=(const SlamSession&) = delete;

  /// Appends gyro samples (timestamps strictly increasing across calls).
  void add_imu(std::span<const GyroSample> samples);

  /// Filters the scan, advances and solves the window, manages keyframes and
  /// submaps and triggers loop search. Throws InputError on a non-increasing
  /// timestamp.
  ScanResult process_scan(const RadarScan& scan);

  /// Flushes the window, runs a final graph optimization and returns the
  /// corrected trajectory, one entry per processed scan.
  Trajectory finalize();

  const Trajectory& raw_trajectory() const { return log_; }
  const std::vector<ScanStatus>& statuses() const { return statuses_; }
  const PoseGraph& graph() const { return graph_; }
  const std::vector<ScanDiagnostics>& diagnostics() const { return diagnostics_; }
  const std::vector<LoopEvent>& loop_events() const { return loop_events_; }
  std::size_t submap_count() const { return submaps_.size(); }
  const NdtSubmap& submap(std::size_t i) const { return *submaps_.at(i); }
  std::size_t active_submap() const { return active_; }
  const SlamConfig& config() const { return cfg_; }

 private:
  struct Slot {
    WindowState state;
    std::shared_ptr<const NdtGrid> scan_ndt;
    std::shared_ptr<const PointCloud> points;
    std::optional<ImuSegment> imu;
    std::size_t log_index = 0;
  };

  void bootstrap(Slot slot);
  void depart(Slot slot);
  void make_keyframe(const Slot& slot);
  void start_submap(int root_node, const Pose2d& root_local);
  void queue_loop_search(int node_id);
  void apply_outcome(const LoopOutcome& outcome);
  void drain_background(bool wait);
  void propagate_correction();
  Pose2d global(const Pose2d& local) const { return submaps_[active_]->root_pose * local; }
  std::shared_ptr<NdtSubmap> active() { return submaps_[active_]; }

  void worker_loop();

  SlamConfig cfg_;
  SessionOptions options_;
  std::vector<GyroSample> imu_;
  std::vector<double> schedule_;

  std::deque<Slot> window_;
  std::optional<Slot> anchor_;
  std::vector<std::shared_ptr<NdtSubmap>> submaps_;
  std::size_t active_ = 0;
  int keyframes_in_active_ = 0;

  PoseGraph graph_;
  std::vector<Pose2d> keyframe_logged_;  // global pose of each node when it was created
  int last_keyframe_ = -1;
  Pose2d last_keyframe_local_;
  std::deque<std::pair<int, Pose2d>> recent_keyframes_;  // (node, pose in the active frame)
  double traveled_ = 0.0;

  Trajectory log_;
  std::vector<ScanStatus> statuses_;
  std::vector<ScanDiagnostics> diagnostics_;
  std::vector<LoopEvent> loop_events_;

  // Background loop detection.
  std::thread worker_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<LoopJob> jobs_;
  std::deque<LoopOutcome> outcomes_;
  std::size_t pending_ = 0;
  bool stop_ = false;
};

}  // namespace randt
