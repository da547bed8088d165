#pragma once

#include <Eigen/Core>
#include <span>

#include "randt/radar.hpp"

namespace randt {

/// Polar ring x sector histogram of point intensities.
struct ScanContextDescriptor {
  Eigen::MatrixXd data;  // rings x sectors

  int rings() const { return static_cast<int>(data.rows()); }
  int sectors() const { return static_cast<int>(data.cols()); }
};

struct ScanContextParams {
  int rings = 20;
  int sectors = 60;
  double max_range = 16.0;
};

/// Bins points (sensor frame) by range and bearing; each entry accumulates
/// intensity / 20. Points beyond max_range are ignored.
ScanContextDescriptor make_descriptor(std::span<const AugmentedPoint> points, const ScanContextParams& params);

/// Minimum over circular column shifts of the mean cosine distance between
/// columns. Only columns that are nonzero in both descriptors count; with no
/// such column the distance is 1. Throws on a dimension mismatch.
double descriptor_distance(const ScanContextDescriptor& a, const ScanContextDescriptor& b);

/// w_od * clamp(|d_query - d_candidate| / max(d_query, eps), 0, 1).
double odometry_similarity(double traveled_query, double traveled_candidate, double w_od, double eps = 1e-9);

}  // namespace randt
