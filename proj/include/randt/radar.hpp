#pragma once

#include <Eigen/Core>
#include <span>
#include <stdexcept>
#include <vector>

namespace randt {

struct RadarReturn {
  double range = 0.0;      // m
  double intensity = 0.0;  // sensor units, >= 0
};

/// Returns of one azimuth, ordered by strictly increasing range.
struct Beam {
  double azimuth = 0.0;  // rad, [0, 2pi)
  std::vector<RadarReturn> returns;
};

/// One sweep; beams ordered by strictly increasing azimuth.
struct RadarScan {
  double timestamp = 0.0;
  std::vector<Beam> beams;

  std::size_t return_count() const;
};

/// Cartesian point with intensity as a third coordinate: [x, y, p].
using AugmentedPoint = Eigen::Vector3d;
using PointCloud = std::vector<AugmentedPoint>;

struct FilterConfig {
  double intensity_threshold = 50.0;
  double min_range = 0.3;
  double max_range = 16.0;
  double cluster_gap = 0.3;  // max spacing between consecutive cluster returns
};

/// Two-step radar filter, keeping the beam structure. Step 1 drops returns
/// below the intensity threshold or outside [min_range, max_range]. Step 2
/// keeps, per beam, the cluster grown from the most intense surviving return:
/// walking outward in range, a return joins while its gap to the last
/// admitted return is within cluster_gap and its intensity does not exceed
/// that neighbor's. Beams left empty are dropped.
RadarScan filter_returns(const RadarScan& scan, const FilterConfig& cfg);

/// Polar to Cartesian conversion, x = r cos(az), y = r sin(az).
PointCloud to_points(const RadarScan& scan);

/// filter_returns followed by to_points.
PointCloud filter_scan(const RadarScan& scan, const FilterConfig& cfg);

/// Indices [first, last] of the cluster kept from one beam's surviving returns.
/// Exposed for tests; `returns` must already satisfy the step-1 gates.
struct ClusterSpan {
  std::size_t first = 0;
  std::size_t last = 0;
};
ClusterSpan extract_cluster(std::span<const RadarReturn> returns, double cluster_gap);

struct GyroSample {
  double timestamp = 0.0;  // s
  double yaw_rate = 0.0;   // rad/s
};

/// Relative yaw over one scan interval.
struct ImuSegment {
  double delta_rotation = 0.0;  // rad
  double dt = 0.0;              // s
};

class MissingImuData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Trapezoidal integral of the yaw rate over [t0, t1]. The samples may extend
/// beyond the interval; rates at the interval ends are linearly interpolated.
/// Throws MissingImuData if any coverage gap (including at either end)
/// exceeds (t1 - t0) / 2.
ImuSegment integrate_gyro(std::span<const GyroSample> samples, double t0, double t1);

}  // namespace randt
