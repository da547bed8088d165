#pragma once

#include <optional>
#include <span>
#include <string>

#include "randt/estimator.hpp"
#include "randt/gaussian_mixture.hpp"
#include "randt/ndt.hpp"
#include "randt/pose_graph.hpp"
#include "randt/scan_context.hpp"

namespace randt {

struct LoopClosureConfig {
  bool enabled = true;
  ScanContextParams descriptor;
  double w_od = 0.5;
  double min_separation = 10.0;  // m of traveled distance
  double gate = 1.0;             // maximum accepted divergence
  /// Submap cells farther than this from the query position are left out of
  /// the gate mixture; <= 0 uses descriptor.max_range.
  double gate_radius = 0.0;
  /// Isotropic smoothing (m) added to every gate component so that sampling
  /// differences between a single scan and a submap do not dominate.
  double gate_sigma = 0.1;
  /// Largest position error odometry is trusted to accumulate between two
  /// keyframes: drift_allowance + drift_ratio * (traveled distance between).
  /// Bounds both the candidate search and the registration correction.
  double drift_allowance = 1.0;  // m
  double drift_ratio = 0.05;
};

struct LoopCandidate {
  int query_node = -1;
  int candidate_node = -1;
  int candidate_submap = -1;
  double d_sc = 1.0;
  double d_od = 0.0;
  double score = 0.0;  // d_sc + d_od
  double separation = 0.0;  // traveled distance between query and candidate
  Pose2d refined_transform;  // query pose in the candidate submap's root frame
  double divergence = 0.0;
};

double drift_bound(const LoopClosureConfig& cfg, double separation);

/// Exhaustive argmin of d_sc + d_od over keyframes of other submaps whose
/// traveled distance differs from the query's by at least min_separation and
/// whose estimated position lies within the drift bound of the query's.
/// Ties keep the lower node id.
std::optional<LoopCandidate> find_candidate(const KeyframeNode& query, std::span<const KeyframeNode> database,
                                            const LoopClosureConfig& cfg);

/// 2D Cauchy-Schwarz divergence between a scan and a map at `pose`. The
/// scan points are moved by `pose` and binned on the map's grid; both sides
/// become equally weighted mixtures of their usable cells with sigma^2 I
/// added to each covariance. Map cells farther than `radius` from
/// pose.translation() are skipped when radius > 0.
double alignment_divergence(std::span<const AugmentedPoint> scan_points, const Pose2d& pose, const NdtGrid& map,
                            double radius = 0.0, double sigma = 0.0);

struct GateDecision {
  bool accepted = false;
  std::string cause;  // reason for a rejection
  LoopCandidate candidate;
};

/// Registers the query scan NDT against the candidate submap from
/// `initial_guess` (query pose in the submap root frame) and gates the
/// result by the divergence of the query points at the refined pose.
GateDecision refine_and_gate(const LoopCandidate& candidate, const NdtGrid& query_scan,
                             std::span<const AugmentedPoint> query_points, const NdtGrid& submap,
                             const Pose2d& initial_guess, const EstimatorConfig& estimator,
                             const LoopClosureConfig& cfg);

struct LoopEvent {
  double timestamp = 0.0;
  int query_node = -1;
  int candidate_node = -1;  // -1 when no candidate was eligible
  double d_sc = 0.0;
  double d_od = 0.0;
  double divergence = 0.0;
  bool accepted = false;
  std::string cause;
};

/// `timestamp query candidate d_sc d_od d_cs accepted|rejected[:cause]`.
std::string format_loop_event(const LoopEvent& e);

}  // namespace randt
