#pragma once

// Independent reference implementations shared by the unit and acceptance tests.

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "randt/gaussian_mixture.hpp"
#include "randt/ndt.hpp"
#include "randt/trajectory.hpp"
#include "support/test_support.hpp"

namespace randt::test {

// Closed-form translation of Exp([vx, vy, w]) written out independently.
inline Eigen::Vector2d closed_form_translation(double vx, double vy, double w) {
  const double a = std::sin(w) / w;
  const double b = (1.0 - std::cos(w)) / w;
  return {a * vx - b * vy, b * vx + a * vy};
}

struct BatchStats {
  Eigen::Vector3d mean;
  Eigen::Matrix3d cov;
};

// Two-pass sample statistics, divisor n - 1.
inline BatchStats batch(const std::vector<AugmentedPoint>& pts) {
  BatchStats b;
  b.mean.setZero();
  for (const auto& p : pts) b.mean += p;
  b.mean /= static_cast<double>(pts.size());
  b.cov.setZero();
  for (const auto& p : pts) b.cov += (p - b.mean) * (p - b.mean).transpose();
  b.cov /= static_cast<double>(pts.size() - 1);
  return b;
}

inline std::vector<AugmentedPoint> random_cloud(std::mt19937_64& rng, int n, double extent) {
  std::vector<AugmentedPoint> pts;
  for (int i = 0; i < n; ++i) {
    pts.emplace_back(uniform(rng, -extent, extent), uniform(rng, -extent, extent),
                     uniform(rng, 0.0, 200.0));
  }
  return pts;
}

inline std::map<CellIndex, std::vector<AugmentedPoint>> bin(const std::vector<AugmentedPoint>& pts, double res) {
  std::map<CellIndex, std::vector<AugmentedPoint>> cells;
  for (const auto& p : pts) {
    cells[CellIndex{static_cast<std::int32_t>(std::floor(p.x() / res)),
                    static_cast<std::int32_t>(std::floor(p.y() / res))}]
        .push_back(p);
  }
  return cells;
}

// Midpoint-rule integral of p(x) q(x) over a square.
inline double grid_overlap(const GaussianMixture<2>& p, const GaussianMixture<2>& q, double half, double h) {
  auto eval = [](const GaussianMixture<2>& m, const Eigen::Vector2d& x) {
    double v = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) v += m.weights[i] * gaussian_density<2>(x - m.means[i], m.covariances[i]);
    return v;
  };
  double total = 0.0;
  for (double x = -half + h / 2; x < half; x += h)
    for (double y = -half + h / 2; y < half; y += h) {
      const Eigen::Vector2d z(x, y);
      total += eval(p, z) * eval(q, z);
    }
  return total * h * h;
}

inline GaussianMixture<2> random_mixture(std::mt19937_64& rng, int max_components, double spread) {
  GaussianMixture<2> m;
  const int n = 1 + static_cast<int>(rng() % static_cast<unsigned>(max_components));
  for (int i = 0; i < n; ++i) {
    const double a = uniform(rng, 0.3, 1.0);
    const double b = uniform(rng, 0.3, 1.0);
    const double t = uniform(rng, 0.0, kPi);
    const Eigen::Matrix2d r = Eigen::Rotation2Dd(t).toRotationMatrix();
    m.add(uniform(rng, 0.2, 1.0), Eigen::Vector2d(uniform(rng, -spread, spread), uniform(rng, -spread, spread)),
          r * Eigen::Vector2d(a * a, b * b).asDiagonal() * r.transpose());
  }
  return m;
}

// Second implementation on homogeneous 3x3 matrices.
namespace oracle {

using M = Eigen::Matrix3d;

inline M mat(double x, double y, double t) {
  M m;
  m << std::cos(t), -std::sin(t), x, std::sin(t), std::cos(t), y, 0, 0, 1;
  return m;
}
inline M mat(const Pose2d& p) { return mat(p.x(), p.y(), p.angle()); }
inline double angle(const M& m) { return std::atan2(m(1, 0), m(0, 0)); }
inline double tnorm(const M& m) { return std::hypot(m(0, 2), m(1, 2)); }

inline Eigen::Matrix2d v_matrix(double t) {
  Eigen::Matrix2d v;
  if (std::abs(t) < 1e-9) return Eigen::Matrix2d::Identity();
  const double a = std::sin(t) / t;
  const double b = (1 - std::cos(t)) / t;
  v << a, -b, b, a;
  return v;
}

inline M interp(const M& a, const M& b, double s) {
  const M d = a.inverse() * b;
  const double t = angle(d);
  const Eigen::Vector2d rho = v_matrix(t).inverse() * Eigen::Vector2d(d(0, 2), d(1, 2));
  const Eigen::Vector2d u = v_matrix(s * t) * (s * rho);
  return a * mat(u.x(), u.y(), s * t);
}

inline std::vector<std::pair<M, M>> pairs(const Trajectory& est, const Trajectory& gt) {
  std::vector<std::pair<M, M>> out;
  for (const auto& q : gt) {
    for (std::size_t i = 0; i + 1 < est.size(); ++i) {
      const double t0 = est[i].timestamp;
      const double t1 = est[i + 1].timestamp;
      if (q.timestamp < t0 || q.timestamp > t1) continue;
      out.emplace_back(mat(q.pose), interp(mat(est[i].pose), mat(est[i + 1].pose), (q.timestamp - t0) / (t1 - t0)));
      break;
    }
  }
  return out;
}

inline double ate(const Trajectory& est, const Trajectory& gt) {
  const auto p = pairs(est, gt);
  double s = 0;
  for (const auto& [q, e] : p) s += std::pow(tnorm(q.inverse() * e), 2);
  return std::sqrt(s / p.size());
}

inline std::pair<double, double> rpe(const Trajectory& est, const Trajectory& gt) {
  const auto p = pairs(est, gt);
  double t = 0, r = 0;
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    const M e = (p[i].first.inverse() * p[i + 1].first).inverse() * (p[i].second.inverse() * p[i + 1].second);
    t += tnorm(e);
    r += std::abs(angle(e));
  }
  return {t / (p.size() - 1), r / (p.size() - 1) * 180 / kPi};
}

inline std::pair<double, double> kitti(const Trajectory& est, const Trajectory& gt) {
  const auto p = pairs(est, gt);
  std::vector<double> d{0.0};
  for (std::size_t i = 1; i < p.size(); ++i)
    d.push_back(d.back() + std::hypot(p[i].first(0, 2) - p[i - 1].first(0, 2), p[i].first(1, 2) - p[i - 1].first(1, 2)));
  double t = 0, r = 0;
  int n = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    for (int k = 1; k <= 8; ++k) {
      const double len = 100.0 * k;
      std::size_t j = i;
      while (j < p.size() && d[j] - d[i] < len) ++j;
      if (j == p.size()) continue;
      const M e = (p[i].first.inverse() * p[j].first).inverse() * (p[i].second.inverse() * p[j].second);
      t += tnorm(e) / len;
      r += std::abs(angle(e)) / len;
      ++n;
    }
  return {100 * t / n, 100 * 180 / kPi * r / n};
}

}  // namespace oracle

inline Trajectory straight(int n, double step, double dt = 0.1) {
  Trajectory t;
  for (int i = 0; i < n; ++i) t.push_back({i * dt, Pose2d::from_xyt(i * step, 0, 0)});
  return t;
}

// Smooth wandering path; `speed` in m per step.
inline Trajectory wander(std::mt19937_64& rng, int n, double speed, double dt = 0.1) {
  Trajectory t;
  Pose2d p = Pose2d::from_xyt(uniform(rng, -5, 5), uniform(rng, -5, 5), uniform(rng, -3, 3));
  const double a = uniform(rng, 0.02, 0.1);
  const double f = uniform(rng, 0.01, 0.05);
  for (int i = 0; i < n; ++i) {
    t.push_back({i * dt, p});
    p = p * exp_map<double>(Twist2d(speed, 0.1 * speed * std::sin(f * i), a * std::cos(f * i)));
  }
  return t;
}

inline Trajectory perturbed(std::mt19937_64& rng, const Trajectory& t, double sigma) {
  Trajectory out = t;
  for (auto& e : out)
    e.pose = e.pose * Pose2d::from_xyt(uniform(rng, -sigma, sigma), uniform(rng, -sigma, sigma),
                                       uniform(rng, -sigma, sigma));
  return out;
}

// Estimate on a jittered time base so interpolation is exercised.
inline Trajectory resampled(std::mt19937_64& rng, const Trajectory& t) {
  Trajectory out;
  out.push_back(t.front());
  for (std::size_t i = 1; i + 1 < t.size(); ++i) {
    const double ts = t[i].timestamp + uniform(rng, -0.03, 0.03);
    out.push_back({ts, t[i].pose});
  }
  out.push_back(t.back());
  return out;
}

}  // namespace randt::test
