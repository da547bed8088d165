#include "randt/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

namespace randt {

namespace {

const char* status_name(ScanStatus s) {
  switch (s) {
    case ScanStatus::bootstrap:
      return "bootstrap";
    case ScanStatus::ok:
      return "ok";
    case ScanStatus::degraded:
      return "degraded";
  }
  return "?";
}

}  // namespace

std::string format_diagnostics(const ScanDiagnostics& d) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%.6f %.6f %.6f %.6f %.9g ", d.timestamp, d.pose.x(), d.pose.y(), d.pose.angle(),
                d.final_cost);
  std::string line(buf);
  if (d.iterations_per_stage.empty()) line += "-";
  for (std::size_t i = 0; i < d.iterations_per_stage.size(); ++i) {
    if (i) line += ',';
    line += std::to_string(d.iterations_per_stage[i]);
  }
  line += ' ' + std::to_string(d.correspondences) + ' ' + std::to_string(d.points) + ' ' + status_name(d.status);
  return line;
}

LoopOutcome run_loop_job(const LoopJob& job, const EstimatorConfig& estimator, const LoopClosureConfig& loop,
                         const Eigen::Matrix3d& omega_lo) {
  LoopOutcome out;
  out.event.timestamp = job.query.timestamp;
  out.event.query_node = job.query.id;
  const auto cand = find_candidate(job.query, job.database, loop);
  if (!cand) {
    out.event.cause = "no-candidate";
    return out;
  }
  out.event.candidate_node = cand->candidate_node;
  out.event.d_sc = cand->d_sc;
  out.event.d_od = cand->d_od;
  const auto sub = static_cast<std::size_t>(cand->candidate_submap);
  if (sub >= job.grids.size() || !job.grids[sub]) {
    out.event.cause = "active-submap";
    return out;
  }
  if (!job.query_ndt || !job.query.filtered_scan) {
    out.event.cause = "empty-scan";
    return out;
  }
  const Pose2d guess = job.roots[sub].inverse() * job.query.pose;
  const GateDecision d = refine_and_gate(*cand, *job.query_ndt, *job.query.filtered_scan, *job.grids[sub], guess, estimator, loop);
  out.event.divergence = d.candidate.divergence;
  out.event.accepted = d.accepted;
  out.event.cause = d.cause;
  if (d.accepted) {
    out.constraint = Constraint{job.root_nodes[sub], job.query.id, d.candidate.refined_transform, omega_lo,
                                ConstraintKind::loop};
  }
  return out;
}

SlamSession::SlamSession(SlamConfig cfg, SessionOptions options)
    : cfg_(std::move(cfg)), options_(options), schedule_(cfg_.estimator.schedule()), graph_(cfg_.graph) {
  if (!options_.deterministic && cfg_.loop.enabled) worker_ = std::thread([this] { worker_loop(); });
}

SlamSession::~SlamSession() {
  {
    std::lock_guard lock(mutex_);
    stop_ = true;
  }
  cv_.notify_all();
  if (worker_.joinable()) worker_.join();
}

void SlamSession::add_imu(std::span<const GyroSample> samples) {
  for (const auto& s : samples) {
    if (!imu_.empty() && !(s.timestamp > imu_.back().timestamp)) {
      throw InputError("gyro timestamps must strictly increase");
    }
    imu_.push_back(s);
  }
}

ScanResult SlamSession::process_scan(const RadarScan& scan) {
  if (!log_.empty() && !(scan.timestamp > log_.back().timestamp)) {
    throw InputError("scan timestamp " + std::to_string(scan.timestamp) + " does not increase");
  }
  Slot slot;
  auto points = std::make_shared<PointCloud>(filter_scan(scan, cfg_.filter));
  if (!points->empty()) {
    auto grid = std::make_shared<NdtGrid>(build_ndt(*points, cfg_.scan_ndt_params()));
    if (grid->usable_count() > 0) slot.scan_ndt = std::move(grid);
  }
  slot.points = std::move(points);
  slot.log_index = log_.size();

  ScanDiagnostics diag;
  diag.timestamp = scan.timestamp;
  diag.points = slot.points->size();

  if (!anchor_ && window_.empty()) {
    slot.state.timestamp = scan.timestamp;
    bootstrap(std::move(slot));
    diag.status = ScanStatus::bootstrap;
    diagnostics_.push_back(diag);
    return {scan.timestamp, log_.back().pose, ScanStatus::bootstrap};
  }

  // Constant-velocity prediction, rotation from the gyro when available.
  const WindowState& prev = window_.empty() ? anchor_->state : window_.back().state;
  const double dt = scan.timestamp - prev.timestamp;
  WindowState pred = prev;
  pred.timestamp = scan.timestamp;
  pred.pose = (prev.pose * exp_map<double>(prev.velocity * dt)).normalized();
  if (cfg_.use_imu && !imu_.empty()) {
    try {
      const ImuSegment seg = integrate_gyro(imu_, prev.timestamp, scan.timestamp);
      slot.imu = seg;
      pred.pose = Pose2d(prev.pose.angle() + seg.delta_rotation + prev.bias * dt, pred.pose.translation());
    } catch (const MissingImuData&) {
      // No IMU term for this step.
    }
  }
  slot.state = pred;
  log_.push_back({scan.timestamp, global(pred.pose)});
  statuses_.push_back(ScanStatus::ok);
  window_.push_back(std::move(slot));
  if (window_.size() > static_cast<std::size_t>(cfg_.estimator.window_length)) {
    Slot departing = std::move(window_.front());
    window_.pop_front();
    depart(std::move(departing));
  }

  bool degraded = !window_.back().scan_ndt;
  try {
    std::vector<WindowEntry> entries;
    entries.reserve(window_.size());
    for (const auto& s : window_) entries.push_back({s.state, s.scan_ndt, s.imu});
    std::optional<WindowState> anchor;
    if (anchor_) anchor = anchor_->state;
    WindowProblem problem = build_problem(anchor, std::move(entries), active()->grid, cfg_.estimator);
    const SolveReport report = solve(problem, schedule_, cfg_.estimator);
    diag.final_cost = report.final_cost;
    diag.iterations_per_stage = report.iterations_per_stage;
    diag.correspondences = report.correspondences;
    if (report.degraded) {
      degraded = true;
    } else {
      for (std::size_t i = 0; i < window_.size(); ++i) window_[i].state = report.states[i];
    }
  } catch (const NoUsableMap&) {
    degraded = true;
  } catch (const NonInvertibleCovariance&) {
    degraded = true;
  }

  for (const auto& s : window_) log_[s.log_index].pose = global(s.state.pose);
  const ScanStatus status = degraded ? ScanStatus::degraded : ScanStatus::ok;
  statuses_.back() = status;
  diag.pose = log_.back().pose;
  diag.status = status;
  diagnostics_.push_back(std::move(diag));
  return {scan.timestamp, log_.back().pose, status};
}

void SlamSession::bootstrap(Slot slot) {
  auto submap = std::make_shared<NdtSubmap>(NdtSubmap{0, NdtGrid(cfg_.ndt), Pose2d(), 0, {}});
  insert_scan(*submap, *slot.points, Pose2d());
  submaps_.push_back(std::move(submap));
  active_ = 0;

  KeyframeNode node;
  node.timestamp = slot.state.timestamp;
  node.submap_id = 0;
  node.is_submap_root = true;
  node.descriptor = make_descriptor(*slot.points, cfg_.loop.descriptor);
  node.filtered_scan = slot.points;
  const int id = graph_.add_node(std::move(node));
  keyframe_logged_.push_back(Pose2d());
  submaps_[0]->keyframe_ids.push_back(id);
  keyframes_in_active_ = 1;
  last_keyframe_ = id;
  last_keyframe_local_ = Pose2d();
  recent_keyframes_.push_back({id, Pose2d()});

  log_.push_back({slot.state.timestamp, Pose2d()});
  statuses_.push_back(ScanStatus::bootstrap);
  anchor_ = std::move(slot);
}

void SlamSession::depart(Slot slot) {
  if (anchor_) traveled_ += (slot.state.pose.translation() - anchor_->state.pose.translation()).norm();
  insert_scan(*active(), *slot.points, slot.state.pose);
  log_[slot.log_index].pose = global(slot.state.pose);
  anchor_ = std::move(slot);

  const Pose2d rel = between(last_keyframe_local_, anchor_->state.pose);
  const double rot_limit = cfg_.keyframe.rotation_deg * std::numbers::pi / 180.0;
  if (rel.translation().norm() > cfg_.keyframe.translation || std::abs(rel.angle()) > rot_limit) {
    make_keyframe(*anchor_);
  }
}

void SlamSession::make_keyframe(const Slot& slot) {
  drain_background(false);
  const Pose2d local = slot.state.pose;
  const bool new_submap = keyframes_in_active_ >= cfg_.keyframe.max_per_submap;

  KeyframeNode node;
  node.pose = global(local);
  node.timestamp = slot.state.timestamp;
  node.submap_id = new_submap ? static_cast<int>(submaps_.size()) : static_cast<int>(active_);
  node.is_submap_root = new_submap;
  node.traveled_distance = traveled_;
  node.descriptor = make_descriptor(*slot.points, cfg_.loop.descriptor);
  node.filtered_scan = slot.points;
  const Pose2d logged = node.pose;
  const int id = graph_.add_node(std::move(node));
  keyframe_logged_.push_back(logged);
  graph_.add_odometry_constraint(last_keyframe_, id, between(last_keyframe_local_, local));
  last_keyframe_ = id;
  last_keyframe_local_ = local;
  recent_keyframes_.push_back({id, local});
  while (recent_keyframes_.size() > static_cast<std::size_t>(cfg_.keyframe.submap_overlap) + 1) {
    recent_keyframes_.pop_front();
  }

  if (new_submap) {
    start_submap(id, local);
  } else {
    active()->keyframe_ids.push_back(id);
    ++keyframes_in_active_;
  }
  queue_loop_search(id);
}

void SlamSession::start_submap(int root_node, const Pose2d& root_local) {
  const Pose2d to_new = root_local.inverse();
  auto submap = std::make_shared<NdtSubmap>(
      NdtSubmap{static_cast<int>(submaps_.size()), NdtGrid(cfg_.ndt), global(root_local), root_node, {root_node}});

  // Re-express everything held in the old submap frame.
  for (auto& [id, pose] : recent_keyframes_) pose = (to_new * pose).normalized();
  if (anchor_) anchor_->state.pose = (to_new * anchor_->state.pose).normalized();
  for (auto& s : window_) s.state.pose = (to_new * s.state.pose).normalized();
  last_keyframe_local_ = (to_new * last_keyframe_local_).normalized();

  // Seed with the root scan and the preceding keyframe scans.
  for (const auto& [id, pose] : recent_keyframes_) {
    insert_scan(*submap, *graph_.node(id).filtered_scan, pose);
  }
  submaps_.push_back(std::move(submap));
  active_ = submaps_.size() - 1;
  keyframes_in_active_ = 1;
}

void SlamSession::queue_loop_search(int node_id) {
  if (!cfg_.loop.enabled) return;
  LoopJob job;
  job.query = graph_.node(node_id);
  job.database.assign(graph_.nodes().begin(), graph_.nodes().begin() + node_id);
  for (std::size_t i = 0; i < submaps_.size(); ++i) {
    const auto& sm = submaps_[i];
    job.grids.push_back(i == active_ ? nullptr : std::shared_ptr<const NdtGrid>(sm, &sm->grid));
    job.roots.push_back(sm->root_pose);
    job.root_nodes.push_back(sm->root_node);
  }
  job.query_ndt = anchor_ && anchor_->state.timestamp == job.query.timestamp ? anchor_->scan_ndt : nullptr;

  if (options_.deterministic) {
    apply_outcome(run_loop_job(job, cfg_.estimator, cfg_.loop, cfg_.graph.omega_lo));
    return;
  }
  {
    std::lock_guard lock(mutex_);
    jobs_.push_back(std::move(job));
    ++pending_;
  }
  cv_.notify_all();
}

void SlamSession::apply_outcome(const LoopOutcome& outcome) {
  loop_events_.push_back(outcome.event);
  if (!outcome.constraint) return;
  graph_.add_constraint(*outcome.constraint);
  graph_.optimize();
  propagate_correction();
}

void SlamSession::propagate_correction() {
  for (auto& sm : submaps_) sm->root_pose = graph_.node(sm->root_node).pose;
}

void SlamSession::worker_loop() {
  for (;;) {
    LoopJob job;
    {
      std::unique_lock lock(mutex_);
      cv_.wait(lock, [this] { return stop_ || !jobs_.empty(); });
      if (stop_ && jobs_.empty()) return;
      job = std::move(jobs_.front());
      jobs_.pop_front();
    }
    LoopOutcome outcome = run_loop_job(job, cfg_.estimator, cfg_.loop, cfg_.graph.omega_lo);
    {
      std::lock_guard lock(mutex_);
      outcomes_.push_back(std::move(outcome));
      --pending_;
    }
    cv_.notify_all();
  }
}

void SlamSession::drain_background(bool wait) {
  if (options_.deterministic) return;
  std::deque<LoopOutcome> ready;
  {
    std::unique_lock lock(mutex_);
    if (wait) cv_.wait(lock, [this] { return pending_ == 0; });
    ready.swap(outcomes_);
  }
  for (const auto& o : ready) apply_outcome(o);
}

Trajectory SlamSession::finalize() {
  while (!window_.empty()) {
    Slot s = std::move(window_.front());
    window_.pop_front();
    depart(std::move(s));
  }
  drain_background(true);
  if (graph_.size() > 1) {
    graph_.optimize();
    propagate_correction();
  }

  // Keyframe corrections, interpolated to the other scans by timestamp.
  const auto& nodes = graph_.nodes();
  std::vector<Pose2d> corrections;
  corrections.reserve(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) corrections.push_back(nodes[k].pose * keyframe_logged_[k].inverse());

  Trajectory out = log_;
  std::size_t k = 0;
  for (auto& e : out) {
    while (k + 1 < nodes.size() && nodes[k + 1].timestamp <= e.timestamp) ++k;
    Pose2d c = corrections[k];
    if (k + 1 < nodes.size() && e.timestamp > nodes[k].timestamp) {
      const double s = (e.timestamp - nodes[k].timestamp) / (nodes[k + 1].timestamp - nodes[k].timestamp);
      c = interpolate(corrections[k], corrections[k + 1], s);
    }
    e.pose = (c * e.pose).normalized();
  }
  return out;
}

}  // namespace randt
