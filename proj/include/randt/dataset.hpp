#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "randt/radar.hpp"
#include "randt/trajectory.hpp"

namespace randt {

/// Directory layout:
///   scans.csv  header + rows `timestamp,azimuth_rad,range_m,intensity`
///   imu.csv    header + rows `timestamp,yaw_rate_rad_s` (optional)
///   gt.tum     ground truth in TUM format (optional)
/// Rows sharing a timestamp form one scan; consecutive rows sharing an
/// azimuth form one beam.
struct Dataset {
  std::vector<RadarScan> scans;
  std::optional<std::vector<GyroSample>> imu;
  std::optional<Trajectory> ground_truth;
};

/// Parse failure with file and line in the message.
class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Dataset load_dataset(const std::filesystem::path& dir);
void write_dataset(const std::filesystem::path& dir, const Dataset& data);

}  // namespace randt
