#include "randt/scan_context.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace randt {

ScanContextDescriptor make_descriptor(std::span<const AugmentedPoint> points, const ScanContextParams& params) {
  if (!(params.max_range > 0.0) || params.rings < 1 || params.sectors < 1) {
    throw std::invalid_argument("make_descriptor: invalid parameters");
  }
  ScanContextDescriptor d;
  d.data = Eigen::MatrixXd::Zero(params.rings, params.sectors);
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (const auto& p : points) {
    const double r = std::hypot(p.x(), p.y());
    if (r > params.max_range) continue;
    double theta = std::atan2(p.y(), p.x());
    if (theta < 0.0) theta += two_pi;
    const int ring = std::min(static_cast<int>(std::floor(r * params.rings / params.max_range)), params.rings - 1);
    const int sector = std::min(static_cast<int>(std::floor(theta * params.sectors / two_pi)), params.sectors - 1);
    d.data(ring, sector) += p.z() / 20.0;
  }
  return d;
}

double descriptor_distance(const ScanContextDescriptor& a, const ScanContextDescriptor& b) {
  if (a.rings() != b.rings() || a.sectors() != b.sectors()) {
    throw std::invalid_argument("descriptor_distance: dimension mismatch");
  }
  const int n = a.sectors();
  // Unit columns; 1 - cos(u, v) = |u - v|^2 / 2 is exactly zero for equal columns.
  auto unit_columns = [](const Eigen::MatrixXd& m, std::vector<bool>& nonzero) {
    Eigen::MatrixXd u = m;
    nonzero.assign(static_cast<std::size_t>(m.cols()), false);
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double norm = m.col(j).norm();
      if (norm <= 0.0) continue;
      u.col(j) /= norm;
      nonzero[static_cast<std::size_t>(j)] = true;
    }
    return u;
  };
  std::vector<bool> za;
  std::vector<bool> zb;
  const Eigen::MatrixXd ua = unit_columns(a.data, za);
  const Eigen::MatrixXd ub = unit_columns(b.data, zb);
  double best = 1.0;
  for (int shift = 0; shift < n; ++shift) {
    double sum = 0.0;
    int valid = 0;
    for (int j = 0; j < n; ++j) {
      const int k = (j + shift) % n;
      if (!za[static_cast<std::size_t>(j)] || !zb[static_cast<std::size_t>(k)]) continue;
      sum += std::min(0.5 * (ua.col(j) - ub.col(k)).squaredNorm(), 2.0);
      ++valid;
    }
    if (valid > 0) best = std::min(best, sum / valid);
  }
  return std::max(best, 0.0);
}

double odometry_similarity(double traveled_query, double traveled_candidate, double w_od, double eps) {
  const double ratio = std::abs(traveled_query - traveled_candidate) / std::max(traveled_query, eps);
  return w_od * std::clamp(ratio, 0.0, 1.0);
}

}  // namespace randt
