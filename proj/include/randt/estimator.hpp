#pragma once

#include <Eigen/Core>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "randt/levenberg_marquardt.hpp"
#include "randt/ndt.hpp"
#include "randt/radar.hpp"
#include "randt/robust_loss.hpp"
#include "randt/se2.hpp"

namespace randt {

/// Per-scan state: pose in the active submap frame, robot-frame velocity and
/// gyro yaw bias.
struct WindowState {
  Pose2d pose;
  Twist2d velocity = Twist2d::Zero();
  double bias = 0.0;
  double timestamp = 0.0;
};

using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Vector6d = Eigen::Matrix<double, 6, 1>;

struct EstimatorConfig {
  int window_length = 3;
  double alpha = -2.0;
  double c = 1.5;
  double mu0 = 16.0;
  double k_mu = 4.0;
  double w_ndt = 100.0;
  Matrix6d omega_mm = (Vector6d() << 100.0, 100.0, 400.0, 10.0, 10.0, 40.0).finished().asDiagonal();
  Eigen::Matrix2d omega_imu = Eigen::Vector2d(2500.0, 1e6).asDiagonal();
  int k_neighbors = 4;
  int max_lm_iterations = 10;
  int association_rounds = 1;  // re-associations per annealing stage
  double d1 = 1.0;             // documentation only, see RobustLossConfig
  double d2 = 1.0;

  std::vector<double> schedule() const { return anneal_schedule(mu0, k_mu); }
};

class NonInvertibleCovariance : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NoUsableMap : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Residual blocks
// ---------------------------------------------------------------------------

/// [Log(pred^-1 cur); v_cur - v_prev] with pred = prev * Exp(v_prev dt).
template <typename Scalar>
Eigen::Matrix<Scalar, 6, 1> motion_residual(const Pose2<Scalar>& prev_pose, const Vector3<Scalar>& prev_velocity,
                                            const Pose2<Scalar>& cur_pose, const Vector3<Scalar>& cur_velocity,
                                            double dt) {
  const Pose2<Scalar> predicted = prev_pose * exp_map<Scalar>(prev_velocity * Scalar(dt));
  Eigen::Matrix<Scalar, 6, 1> e;
  e.template head<3>() = log_map(between(predicted, cur_pose));
  e.template tail<3>() = cur_velocity - prev_velocity;
  return e;
}

/// [Log((R_prev dR Exp(b_prev dt))^-1 R_cur); b_cur - b_prev], rotation part as an angle.
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 1> imu_residual(const Pose2<Scalar>& prev_pose, const Scalar& prev_bias,
                                         const Pose2<Scalar>& cur_pose, const Scalar& cur_bias,
                                         const ImuSegment& segment) {
  const Matrix2<Scalar> predicted =
      prev_pose.rotation() * rotation2<Scalar>(Scalar(segment.delta_rotation)) * rotation2<Scalar>(prev_bias * Scalar(segment.dt));
  Eigen::Matrix<Scalar, 2, 1> e;
  e(0) = rotation_angle<Scalar>(predicted.transpose() * cur_pose.rotation());
  e(1) = cur_bias - prev_bias;
  return e;
}

double motion_cost(const WindowState& prev, const WindowState& cur, const Matrix6d& omega_mm);
double imu_cost(const WindowState& prev, const WindowState& cur, const ImuSegment& segment,
                const Eigen::Matrix2d& omega_imu);

/// Squared Mahalanobis distance between a scan cell moved by `pose` and a map
/// cell: mu^T (S_map + R S_scan R^T)^-1 mu with mu = R m_scan + t - m_map,
/// rotation and translation padded to act on [x, y] only.
double ndt_residual(const NdtCell& scan_cell, const NdtCell& map_cell, const Pose2d& pose);

/// ndt_residual with derivatives under the right perturbation pose * Exp(d).
struct NdtLinearization {
  double r2 = 0.0;
  Eigen::Vector3d gradient = Eigen::Vector3d::Zero();  // d r2 / d d
  Eigen::Matrix3d gauss_newton = Eigen::Matrix3d::Zero();  // 2 J^T A^-1 J
  Eigen::Vector3d difference = Eigen::Vector3d::Zero();    // mu
  Eigen::Matrix3d difference_jacobian = Eigen::Matrix3d::Zero();  // d mu / d d
};
NdtLinearization linearize_ndt_residual(const NdtCell& scan_cell, const NdtCell& map_cell, const Pose2d& pose);

/// Jacobians of the motion and IMU blocks with respect to
/// [prev: dpose(3) dvelocity(3) dbias(1), cur: same], poses perturbed on the right.
Eigen::Matrix<double, 6, 14> motion_jacobian(const WindowState& prev, const WindowState& cur);
Eigen::Matrix<double, 2, 14> imu_jacobian(const WindowState& prev, const WindowState& cur, const ImuSegment& segment);

/// Applies a 7-vector tangent increment [dpose, dvelocity, dbias] to a state.
WindowState retract_state(const WindowState& s, const Eigen::Matrix<double, 7, 1>& delta);

// ---------------------------------------------------------------------------
// Problems
// ---------------------------------------------------------------------------

struct Correspondence {
  const NdtCell* scan = nullptr;
  const NdtCell* map = nullptr;
};

/// For every usable scan cell moved by `pose`, its k nearest usable map cells.
std::vector<Correspondence> associate(const NdtGrid& scan, const NdtGrid& map, const Pose2d& pose, std::size_t k);

/// Robust NDT term (w / n) sum rho(r2) of one pose over fixed correspondences.
struct NdtTerm {
  std::span<const Correspondence> correspondences;
  double weight = 1.0;
  RobustLossConfig loss;

  double cost(const Pose2d& pose) const;
  /// Accumulates gradient and Gauss-Newton Hessian into the 3x3 pose block.
  double linearize(const Pose2d& pose, Eigen::Ref<Eigen::Vector3d> g, Eigen::Ref<Eigen::Matrix3d> h) const;
};

/// One window slot: the state, its scan NDT (null when the scan was empty)
/// and the IMU segment tying it to the preceding state.
struct WindowEntry {
  WindowState state;
  std::shared_ptr<const NdtGrid> scan;
  std::optional<ImuSegment> imu;
};

struct CostBreakdown {
  std::vector<double> ndt;     // per window state
  std::vector<double> motion;  // per window state (link to its predecessor)
  std::vector<double> imu;
  double total() const;
};

/// Sliding-window least squares over the free states of the window. The
/// state preceding the window (if any) stays fixed and contributes the
/// motion-model and IMU links of the first free state.
class WindowProblem {
 public:
  using Parameters = std::vector<WindowState>;
  using Hessian = Eigen::MatrixXd;

  WindowProblem(std::optional<WindowState> anchor, std::vector<WindowEntry> entries, const NdtGrid& map,
                EstimatorConfig cfg);

  const Parameters& initial_states() const { return initial_; }
  void set_mu(double mu) { mu_ = mu; }
  double mu() const { return mu_; }

  /// Recomputes correspondences for all states at `states`.
  void associate(const Parameters& states);
  std::size_t correspondence_count() const;

  double linearize(const Parameters& x, Hessian& h, Eigen::VectorXd& g) const;
  double cost(const Parameters& x) const;
  Parameters retract(const Parameters& x, const Eigen::VectorXd& dx) const;
  CostBreakdown breakdown(const Parameters& x) const;

 private:
  NdtTerm ndt_term(std::size_t i) const;
  const WindowState* predecessor(const Parameters& x, std::size_t i) const;

  std::optional<WindowState> anchor_;
  std::vector<WindowEntry> entries_;
  const NdtGrid* map_;
  EstimatorConfig cfg_;
  double mu_ = 1.0;
  Parameters initial_;
  std::vector<std::vector<Correspondence>> correspondences_;
};

/// Builds the window problem. Throws NoUsableMap if the map has no usable cells.
WindowProblem build_problem(std::optional<WindowState> anchor, std::vector<WindowEntry> entries, const NdtGrid& map,
                            const EstimatorConfig& cfg);

struct SolveReport {
  std::vector<WindowState> states;
  double final_cost = 0.0;
  std::vector<int> iterations_per_stage;
  std::size_t correspondences = 0;
  bool degraded = false;
};

/// Runs LM once per scale in `schedule` (coarse to fine), re-associating at
/// the start of every stage. On divergence returns the initial states with
/// the degraded flag set.
SolveReport solve(WindowProblem& problem, std::span<const double> schedule, const EstimatorConfig& cfg);

/// Single-pose NDT registration of a scan NDT against a map NDT.
class RegistrationProblem {
 public:
  using Parameters = Pose2d;
  using Hessian = Eigen::MatrixXd;

  RegistrationProblem(const NdtGrid& scan, const NdtGrid& map, EstimatorConfig cfg);
  void set_mu(double mu) { mu_ = mu; }
  void associate(const Pose2d& pose);
  std::size_t correspondence_count() const { return correspondences_.size(); }

  double linearize(const Pose2d& x, Hessian& h, Eigen::VectorXd& g) const;
  double cost(const Pose2d& x) const;
  Pose2d retract(const Pose2d& x, const Eigen::VectorXd& dx) const;

 private:
  NdtTerm term() const;

  const NdtGrid* scan_;
  const NdtGrid* map_;
  EstimatorConfig cfg_;
  double mu_ = 1.0;
  std::vector<Correspondence> correspondences_;
};

struct RegistrationResult {
  Pose2d pose;
  double final_cost = 0.0;
  std::vector<int> iterations_per_stage;
  std::size_t correspondences = 0;
  bool degraded = false;
};

RegistrationResult register_ndt(const NdtGrid& scan, const NdtGrid& map, const Pose2d& initial,
                                const EstimatorConfig& cfg);

}  // namespace randt
