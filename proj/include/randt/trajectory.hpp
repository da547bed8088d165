#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "randt/se2.hpp"

namespace randt {

struct TrajectoryEntry {
  double timestamp = 0.0;
  Pose2d pose;
};

using Trajectory = std::vector<TrajectoryEntry>;

/// Throws std::invalid_argument unless timestamps strictly increase.
void validate_trajectory(const Trajectory& traj);

/// Pose at time t by tangent-space interpolation between the bracketing
/// entries; nullopt outside the covered time range.
std::optional<Pose2d> pose_at(const Trajectory& traj, double t);

/// Shortest round-trip decimal form of a double.
std::string format_number(double v);

/// TUM format: `timestamp tx ty tz qx qy qz qw`, planar so tz = qx = qy = 0.
void write_tum(std::ostream& os, const Trajectory& traj);
void write_tum(const std::filesystem::path& path, const Trajectory& traj);
Trajectory read_tum(std::istream& is, const std::string& source = "<stream>");
Trajectory read_tum(const std::filesystem::path& path);

}  // namespace randt
