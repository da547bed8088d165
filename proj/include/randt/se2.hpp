#pragma once

#include <Eigen/Core>
#include <cmath>
#include <numbers>

/// Planar rigid-body transforms (SE(2)) with exponential and logarithmic maps.
///
/// Everything here is templated on the scalar so the same code path serves
/// plain doubles and Eigen::AutoDiffScalar when residual Jacobians are needed.
/// Tangent vectors are ordered [vx, vy, omega].
namespace randt {

template <typename Scalar>
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix2 = Eigen::Matrix<Scalar, 2, 2>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;

/// Tangent-space element [vx, vy, omega].
template <typename Scalar>
using Twist2 = Vector3<Scalar>;

/// Below this rotation magnitude exp/log switch to their series expansions.
inline constexpr double kSmallAngle = 1e-7;

template <typename Scalar>
Matrix2<Scalar> rotation2(const Scalar& angle) {
  using std::cos;
  using std::sin;
  const Scalar c = cos(angle);
  const Scalar s = sin(angle);
  Matrix2<Scalar> r;
  r << c, -s, s, c;
  return r;
}

/// Angle of a 2x2 rotation matrix in (-pi, pi].
template <typename Scalar>
Scalar rotation_angle(const Matrix2<Scalar>& r) {
  using std::atan2;
  Scalar a = atan2(r(1, 0), r(0, 0));
  // atan2(-0.0, -1) yields -pi; keep the +pi branch.
  if (a <= Scalar(-std::numbers::pi)) a = Scalar(std::numbers::pi);
  return a;
}

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  if (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

template <typename Scalar>
class Pose2 {
 public:
  using RotationType = Matrix2<Scalar>;
  using TranslationType = Vector2<Scalar>;

  Pose2() : rotation_(RotationType::Identity()), translation_(TranslationType::Zero()) {}
  Pose2(const RotationType& rotation, const TranslationType& translation)
      : rotation_(rotation), translation_(translation) {}
  Pose2(const Scalar& angle, const TranslationType& translation)
      : rotation_(rotation2(angle)), translation_(translation) {}

  static Pose2 identity() { return Pose2(); }
  static Pose2 from_xyt(const Scalar& x, const Scalar& y, const Scalar& theta) {
    return Pose2(theta, TranslationType(x, y));
  }

  const RotationType& rotation() const { return rotation_; }
  const TranslationType& translation() const { return translation_; }
  Scalar angle() const { return rotation_angle(rotation_); }
  Scalar x() const { return translation_.x(); }
  Scalar y() const { return translation_.y(); }

  Pose2 inverse() const {
    const RotationType rt = rotation_.transpose();
    return Pose2(rt, -(rt * translation_));
  }

  Pose2 operator*(const Pose2& other) const {
    return Pose2(rotation_ * other.rotation_, rotation_ * other.translation_ + translation_);
  }

  TranslationType operator*(const TranslationType& p) const { return rotation_ * p + translation_; }

  Matrix3<Scalar> matrix() const {
    Matrix3<Scalar> m = Matrix3<Scalar>::Identity();
    m.template topLeftCorner<2, 2>() = rotation_;
    m.template topRightCorner<2, 1>() = translation_;
    return m;
  }

  /// Re-orthonormalizes the rotation from its angle.
  Pose2 normalized() const { return Pose2(angle(), translation_); }

  template <typename Other>
  Pose2<Other> cast() const {
    return Pose2<Other>(rotation_.template cast<Other>(), translation_.template cast<Other>());
  }

 private:
  RotationType rotation_;
  TranslationType translation_;
};

using Pose2d = Pose2<double>;
using Twist2d = Twist2<double>;

template <typename Scalar>
Pose2<Scalar> compose(const Pose2<Scalar>& a, const Pose2<Scalar>& b) {
  return a * b;
}

template <typename Scalar>
Pose2<Scalar> inverse(const Pose2<Scalar>& a) {
  return a.inverse();
}

/// Relative transform a^-1 * b.
template <typename Scalar>
Pose2<Scalar> between(const Pose2<Scalar>& a, const Pose2<Scalar>& b) {
  return a.inverse() * b;
}

/// Left Jacobian V(omega) of SE(2): translation = V * [vx, vy].
template <typename Scalar>
Matrix2<Scalar> se2_left_jacobian(const Scalar& omega) {
  using std::abs;
  using std::cos;
  using std::sin;
  Scalar a;  // sin(w) / w
  Scalar b;  // (1 - cos(w)) / w
  if (abs(omega) < Scalar(kSmallAngle)) {
    a = Scalar(1) - omega * omega / Scalar(6);
    b = omega / Scalar(2);
  } else {
    const Scalar half = omega / Scalar(2);
    const Scalar sh = sin(half);
    a = sin(omega) / omega;
    b = Scalar(2) * sh * sh / omega;
  }
  Matrix2<Scalar> v;
  v << a, -b, b, a;
  return v;
}

template <typename Scalar>
Pose2<Scalar> exp_map(const Twist2<Scalar>& xi) {
  const Scalar omega = xi(2);
  const Vector2<Scalar> t = se2_left_jacobian(omega) * xi.template head<2>();
  return Pose2<Scalar>(rotation2(omega), t);
}

template <typename Scalar>
Twist2<Scalar> log_map(const Pose2<Scalar>& p) {
  using std::abs;
  using std::cos;
  using std::sin;
  const Scalar theta = p.angle();
  const Scalar half = theta / Scalar(2);
  Scalar a;  // (theta / 2) * cot(theta / 2)
  if (abs(theta) < Scalar(kSmallAngle)) {
    a = Scalar(1) - theta * theta / Scalar(12);
  } else {
    a = half * cos(half) / sin(half);
  }
  Matrix2<Scalar> v_inv;
  v_inv << a, half, -half, a;
  Twist2<Scalar> xi;
  xi.template head<2>() = v_inv * p.translation();
  xi(2) = theta;
  return xi;
}

/// Geodesic interpolation a * Exp(s * Log(a^-1 b)), s in [0, 1].
template <typename Scalar>
Pose2<Scalar> interpolate(const Pose2<Scalar>& a, const Pose2<Scalar>& b, const Scalar& s) {
  const Twist2<Scalar> d = log_map(between(a, b));
  return a * exp_map<Scalar>(d * s);
}

}  // namespace randt
