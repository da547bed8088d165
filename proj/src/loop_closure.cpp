#include "randt/loop_closure.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

namespace randt {

double drift_bound(const LoopClosureConfig& cfg, double separation) {
  return cfg.drift_allowance + cfg.drift_ratio * separation;
}

std::optional<LoopCandidate> find_candidate(const KeyframeNode& query, std::span<const KeyframeNode> database,
                                            const LoopClosureConfig& cfg) {
  std::optional<LoopCandidate> best;
  for (const auto& cand : database) {
    if (cand.id == query.id || cand.submap_id == query.submap_id) continue;
    const double separation = std::abs(query.traveled_distance - cand.traveled_distance);
    if (separation < cfg.min_separation) continue;
    if ((query.pose.translation() - cand.pose.translation()).norm() > drift_bound(cfg, separation)) continue;
    LoopCandidate c;
    c.query_node = query.id;
    c.candidate_node = cand.id;
    c.candidate_submap = cand.submap_id;
    c.d_sc = descriptor_distance(query.descriptor, cand.descriptor);
    c.d_od = odometry_similarity(query.traveled_distance, cand.traveled_distance, cfg.w_od);
    c.score = c.d_sc + c.d_od;
    c.separation = separation;
    if (!best || c.score < best->score) best = c;
  }
  return best;
}

double alignment_divergence(std::span<const AugmentedPoint> scan_points, const Pose2d& pose, const NdtGrid& map,
                            double radius, double sigma) {
  const Eigen::Matrix2d smoothing = sigma * sigma * Eigen::Matrix2d::Identity();
  NdtGrid moved(map.params());
  moved.insert(scan_points, pose);
  GaussianMixture<2> p;
  for (const NdtCell* cell : moved.usable_cells()) {
    p.add(1.0, cell->mean.head<2>(), cell->regularized.topLeftCorner<2, 2>() + smoothing);
  }
  GaussianMixture<2> q;
  for (const NdtCell* cell : map.usable_cells()) {
    if (radius > 0.0 && (cell->mean.head<2>() - pose.translation()).norm() > radius) continue;
    q.add(1.0, cell->mean.head<2>(), cell->regularized.topLeftCorner<2, 2>() + smoothing);
  }
  if (p.size() == 0 || q.size() == 0) return std::numeric_limits<double>::infinity();
  for (double& w : p.weights) w /= static_cast<double>(p.size());
  for (double& w : q.weights) w /= static_cast<double>(q.size());
  return cauchy_schwarz_divergence(p, q);
}

GateDecision refine_and_gate(const LoopCandidate& candidate, const NdtGrid& query_scan,
                             std::span<const AugmentedPoint> query_points, const NdtGrid& submap,
                             const Pose2d& initial_guess, const EstimatorConfig& estimator,
                             const LoopClosureConfig& cfg) {
  GateDecision d;
  d.candidate = candidate;
  if (submap.usable_count() == 0) {
    d.cause = "empty-submap";
    return d;
  }
  RegistrationResult reg;
  try {
    reg = register_ndt(query_scan, submap, initial_guess, estimator);
  } catch (const std::exception& e) {
    d.cause = std::string("registration-error:") + e.what();
    return d;
  }
  if (reg.degraded) {
    d.cause = "registration-diverged";
    return d;
  }
  d.candidate.refined_transform = reg.pose;
  const double correction = (reg.pose.translation() - initial_guess.translation()).norm();
  if (correction > drift_bound(cfg, candidate.separation)) {
    d.cause = "implausible-correction";
    return d;
  }
  const double radius = cfg.gate_radius > 0.0 ? cfg.gate_radius : cfg.descriptor.max_range;
  d.candidate.divergence = alignment_divergence(query_points, reg.pose, submap, radius, cfg.gate_sigma);
  d.accepted = std::isfinite(d.candidate.divergence) && d.candidate.divergence <= cfg.gate;
  if (!d.accepted) d.cause = "divergence";
  return d;
}

std::string format_loop_event(const LoopEvent& e) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%.6f %d %d %.6f %.6f %.6f ", e.timestamp, e.query_node, e.candidate_node, e.d_sc,
                e.d_od, e.divergence);
  std::string line(buf);
  line += e.accepted ? "accepted" : "rejected";
  if (!e.accepted && !e.cause.empty()) line += ":" + e.cause;
  return line;
}

}  // namespace randt
