#include "randt/metrics.hpp"

#include <cmath>
#include <numbers>

namespace randt {

PosePairs associate_poses(const Trajectory& est, const Trajectory& gt) {
  PosePairs pairs;
  for (const auto& q : gt) {
    if (auto p = pose_at(est, q.timestamp)) {
      pairs.gt.push_back(q.pose);
      pairs.est.push_back(*p);
    }
  }
  if (pairs.gt.empty()) throw std::invalid_argument("estimate and ground truth do not overlap in time");
  return pairs;
}

Pose2d align_rigid(const std::vector<Pose2d>& est, const std::vector<Pose2d>& gt) {
  const auto n = static_cast<double>(est.size());
  Eigen::Vector2d mp = Eigen::Vector2d::Zero();
  Eigen::Vector2d mq = Eigen::Vector2d::Zero();
  for (std::size_t i = 0; i < est.size(); ++i) {
    mp += est[i].translation();
    mq += gt[i].translation();
  }
  mp /= n;
  mq /= n;
  // Optimal planar rotation from the cross-covariance.
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const Eigen::Vector2d p = est[i].translation() - mp;
    const Eigen::Vector2d q = gt[i].translation() - mq;
    sxx += p.dot(q);
    sxy += p.x() * q.y() - p.y() * q.x();
  }
  const double theta = std::atan2(sxy, sxx);
  const Matrix2<double> r = rotation2(theta);
  return Pose2d(r, mq - r * mp);
}

double ate(const Trajectory& est, const Trajectory& gt, bool align) {
  PosePairs pairs = associate_poses(est, gt);
  if (align) {
    const Pose2d a = align_rigid(pairs.est, pairs.gt);
    for (auto& p : pairs.est) p = a * p;
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < pairs.gt.size(); ++i) {
    sum += (pairs.gt[i].inverse() * pairs.est[i]).translation().squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(pairs.gt.size()));
}

RpeResult mean_rpe(const Trajectory& est, const Trajectory& gt) {
  const PosePairs pairs = associate_poses(est, gt);
  RpeResult r;
  const std::size_t steps = pairs.gt.size() - 1;
  if (steps == 0) return r;
  for (std::size_t i = 0; i < steps; ++i) {
    const Pose2d e = between(between(pairs.gt[i], pairs.gt[i + 1]), between(pairs.est[i], pairs.est[i + 1]));
    r.translation += e.translation().norm();
    r.rotation_deg += std::abs(e.angle());
  }
  r.translation /= static_cast<double>(steps);
  r.rotation_deg *= 180.0 / std::numbers::pi / static_cast<double>(steps);
  return r;
}

DriftResult kitti_drift(const Trajectory& est, const Trajectory& gt) {
  const PosePairs pairs = associate_poses(est, gt);
  const std::size_t n = pairs.gt.size();
  std::vector<double> dist(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    dist[i] = dist[i - 1] + (pairs.gt[i].translation() - pairs.gt[i - 1].translation()).norm();
  }
  if (n == 0 || dist.back() < 100.0) throw TrajectoryTooShort();

  DriftResult r;
  double t_sum = 0.0;
  double r_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = i;
    for (int k = 1; k <= 8; ++k) {
      const double length = 100.0 * k;
      while (j < n && dist[j] - dist[i] < length) ++j;
      if (j == n) break;
      const Pose2d e = between(between(pairs.gt[i], pairs.gt[j]), between(pairs.est[i], pairs.est[j]));
      t_sum += e.translation().norm() / length;
      r_sum += std::abs(e.angle()) / length;
      ++r.segments;
    }
  }
  if (r.segments == 0) throw TrajectoryTooShort();
  const double m = static_cast<double>(r.segments);
  r.translation_percent = 100.0 * t_sum / m;
  r.rotation_deg_per_100m = 100.0 * (180.0 / std::numbers::pi) * r_sum / m;
  return r;
}

}  // namespace randt
