#pragma once

#include <stdexcept>
#include <vector>

#include "randt/trajectory.hpp"

namespace randt {

/// Ground-truth poses paired with the estimate interpolated at their
/// timestamps. Ground-truth entries outside the estimate's time span are
/// dropped. Throws if nothing overlaps.
struct PosePairs {
  std::vector<Pose2d> gt;
  std::vector<Pose2d> est;
};
PosePairs associate_poses(const Trajectory& est, const Trajectory& gt);

/// Rigid 2D transform A minimizing sum |A p_i - q_i|^2 over positions.
Pose2d align_rigid(const std::vector<Pose2d>& est, const std::vector<Pose2d>& gt);

/// RMSE of trans(Q_i^-1 P_i). With `align` the estimate is first moved by align_rigid.
double ate(const Trajectory& est, const Trajectory& gt, bool align = false);

struct RpeResult {
  double translation = 0.0;  // m
  double rotation_deg = 0.0;
};
/// Means over consecutive steps of E_i = (Q_i^-1 Q_i+1)^-1 (P_i^-1 P_i+1).
RpeResult mean_rpe(const Trajectory& est, const Trajectory& gt);

struct DriftResult {
  double translation_percent = 0.0;
  double rotation_deg_per_100m = 0.0;
  std::size_t segments = 0;
};

class TrajectoryTooShort : public std::runtime_error {
 public:
  TrajectoryTooShort() : std::runtime_error("trajectory too short") {}
};

/// Relative errors over ground-truth segments of 100, 200, ..., 800 m from
/// every start pose, normalized by segment length and averaged.
DriftResult kitti_drift(const Trajectory& est, const Trajectory& gt);

}  // namespace randt
