#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "randt/dataset.hpp"

namespace randt {

struct Wall {
  Eigen::Vector2d a = Eigen::Vector2d::Zero();
  Eigen::Vector2d b = Eigen::Vector2d::Zero();
  double reflectivity = 100.0;  // mean peak intensity
  double sigma = 0.0;           // intensity noise
};

struct SensorModel {
  int beams = 220;
  double min_range = 0.3;
  double max_range = 16.0;
  double range_sigma = 0.0;
  double clutter_rate = 0.0;  // probability of one clutter return per beam
  double clutter_intensity = 40.0;
  double cluster_spacing = 0.05;  // range step between returns of a cluster
  int noise_returns = 0;          // low-intensity noise-floor returns per beam
  double scan_rate = 5.0;         // Hz
};

struct ImuModel {
  double rate = 100.0;  // Hz
  double bias = 0.0;    // rad/s
  double sigma = 0.0;   // rad/s white noise
};

/// Constant-speed Catmull-Rom path through the waypoints. With fewer than two
/// waypoints the robot stands still at the first one (or the origin).
struct RobotModel {
  double speed = 1.0;
  double duration = 0.0;  // s; 0 means one traversal of the path
  double heading = 0.0;   // rad, used when stationary
  bool closed = false;    // close the path back to the first waypoint
  std::vector<Eigen::Vector2d> waypoints;
};

struct SyntheticWorld {
  std::vector<Wall> walls;
  SensorModel sensor;
  ImuModel imu;
  RobotModel robot;
};

/// `key = value` lines (`#` comments) with keys sensor.*, imu.*, robot.*,
/// plus repeated `wall = x1 y1 x2 y2 reflectivity sigma` and
/// `waypoint = x y`. Unknown keys and malformed values throw.
SyntheticWorld parse_world(std::istream& is, const std::string& source = "<world>");
SyntheticWorld load_world(const std::filesystem::path& path);

struct SimulationStats {
  std::size_t beams = 0;
  std::size_t wall_hits = 0;
  std::size_t clutter_returns = 0;
  std::size_t returns = 0;
  double clutter_fraction() const { return beams ? static_cast<double>(clutter_returns) / beams : 0.0; }
};

/// Ground-truth robot pose (world frame) at time t.
Pose2d robot_pose(const SyntheticWorld& world, double t);

/// Nearest wall hit along a ray within [min_range, max_range]; returns the
/// range and the wall index, or a negative range when nothing is hit.
std::pair<double, int> ray_cast(const std::vector<Wall>& walls, const Eigen::Vector2d& origin, double bearing,
                                double min_range, double max_range);

/// Synthesizes scans, gyro samples and ground truth (relative to the start
/// pose). Deterministic for a given seed.
Dataset simulate(const SyntheticWorld& world, std::uint64_t seed, SimulationStats* stats = nullptr);

/// Single scan from a given world pose, sharing the sensor model.
RadarScan simulate_scan(const SyntheticWorld& world, const Pose2d& pose, double timestamp, std::uint64_t seed,
                        SimulationStats* stats = nullptr);

}  // namespace randt
