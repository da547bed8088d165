#include "randt/estimator.hpp"

#include <Eigen/LU>
#include <unsupported/Eigen/AutoDiff>

#include <cmath>

namespace randt {

namespace {

template <int N>
using Ad = Eigen::AutoDiffScalar<Eigen::Matrix<double, N, 1>>;

template <int N>
Ad<N> variable(double value, int index) {
  return Ad<N>(value, N, index);
}

template <int N>
Ad<N> constant(double value) {
  return Ad<N>(value, Eigen::Matrix<double, N, 1>::Zero());
}

/// State lifted to autodiff scalars; its 7 increments occupy [offset, offset + 7).
template <int N>
struct AdState {
  Pose2<Ad<N>> pose;
  Vector3<Ad<N>> velocity;
  Ad<N> bias;
};

template <int N>
AdState<N> lift(const WindowState& s, int offset) {
  AdState<N> out;
  Twist2<Ad<N>> d;
  for (int i = 0; i < 3; ++i) d(i) = variable<N>(0.0, offset + i);
  Pose2<Ad<N>> base(s.pose.rotation().cast<Ad<N>>(), s.pose.translation().cast<Ad<N>>());
  out.pose = base * exp_map(d);
  for (int i = 0; i < 3; ++i) out.velocity(i) = variable<N>(s.velocity(i), offset + 3 + i);
  out.bias = variable<N>(s.bias, offset + 6);
  return out;
}

template <int Rows, int N>
Eigen::Matrix<double, Rows, N> jacobian_of(const Eigen::Matrix<Ad<N>, Rows, 1>& e) {
  Eigen::Matrix<double, Rows, N> j;
  for (int r = 0; r < Rows; ++r) {
    // Derivative vectors of constants may be empty.
    if (e(r).derivatives().size() == N) {
      j.row(r) = e(r).derivatives().transpose();
    } else {
      j.row(r).setZero();
    }
  }
  return j;
}

Eigen::Matrix3d augmented_rotation(const Pose2d& pose) {
  Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
  r.topLeftCorner<2, 2>() = pose.rotation();
  return r;
}

Eigen::Vector3d augmented_translation(const Pose2d& pose) {
  return Eigen::Vector3d(pose.x(), pose.y(), 0.0);
}

Eigen::Matrix3d checked_inverse(const Eigen::Matrix3d& a) {
  Eigen::Matrix3d inv;
  bool invertible = false;
  double det = 0.0;
  a.computeInverseAndDetWithCheck(inv, det, invertible, 0.0);
  if (!invertible || !(det > 0.0) || !inv.allFinite()) {
    throw NonInvertibleCovariance("combined NDT covariance is not invertible");
  }
  return inv;
}

}  // namespace

// ---------------------------------------------------------------------------

double motion_cost(const WindowState& prev, const WindowState& cur, const Matrix6d& omega_mm) {
  const Vector6d e = motion_residual<double>(prev.pose, prev.velocity, cur.pose, cur.velocity,
                                             cur.timestamp - prev.timestamp);
  return e.dot(omega_mm * e);
}

double imu_cost(const WindowState& prev, const WindowState& cur, const ImuSegment& segment,
                const Eigen::Matrix2d& omega_imu) {
  const Eigen::Vector2d e = imu_residual<double>(prev.pose, prev.bias, cur.pose, cur.bias, segment);
  return e.dot(omega_imu * e);
}

Eigen::Matrix<double, 6, 14> motion_jacobian(const WindowState& prev, const WindowState& cur) {
  const AdState<14> a = lift<14>(prev, 0);
  const AdState<14> b = lift<14>(cur, 7);
  const auto e = motion_residual<Ad<14>>(a.pose, a.velocity, b.pose, b.velocity, cur.timestamp - prev.timestamp);
  return jacobian_of<6, 14>(e);
}

Eigen::Matrix<double, 2, 14> imu_jacobian(const WindowState& prev, const WindowState& cur, const ImuSegment& segment) {
  const AdState<14> a = lift<14>(prev, 0);
  const AdState<14> b = lift<14>(cur, 7);
  const auto e = imu_residual<Ad<14>>(a.pose, a.bias, b.pose, b.bias, segment);
  return jacobian_of<2, 14>(e);
}

WindowState retract_state(const WindowState& s, const Eigen::Matrix<double, 7, 1>& delta) {
  WindowState out = s;
  out.pose = (s.pose * exp_map<double>(delta.head<3>())).normalized();
  out.velocity += delta.segment<3>(3);
  out.bias += delta(6);
  return out;
}

double ndt_residual(const NdtCell& scan_cell, const NdtCell& map_cell, const Pose2d& pose) {
  const Eigen::Matrix3d r = augmented_rotation(pose);
  const Eigen::Vector3d mu = r * scan_cell.mean + augmented_translation(pose) - map_cell.mean;
  const Eigen::Matrix3d a = map_cell.regularized + r * scan_cell.regularized * r.transpose();
  return std::max(0.0, mu.dot(checked_inverse(a) * mu));
}

NdtLinearization linearize_ndt_residual(const NdtCell& scan_cell, const NdtCell& map_cell, const Pose2d& pose) {
  const Eigen::Matrix3d r = augmented_rotation(pose);
  const Eigen::Matrix3d rotated_scan_cov = r * scan_cell.regularized * r.transpose();
  const Eigen::Vector3d mu = r * scan_cell.mean + augmented_translation(pose) - map_cell.mean;
  const Eigen::Matrix3d b = checked_inverse(map_cell.regularized + rotated_scan_cov);

  // Generator of planar rotation, padded to act on [x, y].
  Eigen::Matrix3d gen = Eigen::Matrix3d::Zero();
  gen(0, 1) = -1.0;
  gen(1, 0) = 1.0;

  NdtLinearization lin;
  lin.difference = mu;
  lin.difference_jacobian.setZero();
  lin.difference_jacobian.block<2, 2>(0, 0) = pose.rotation();
  lin.difference_jacobian.col(2) = r * gen * scan_cell.mean;

  const Eigen::Vector3d w = b * mu;
  lin.r2 = std::max(0.0, mu.dot(w));
  // d(R S R^T)/d theta under the right perturbation.
  const Eigen::Matrix3d d_cov = r * (gen * scan_cell.regularized + scan_cell.regularized * gen.transpose()) * r.transpose();
  lin.gradient = 2.0 * lin.difference_jacobian.transpose() * w;
  lin.gradient(2) -= w.dot(d_cov * w);
  lin.gauss_newton = 2.0 * lin.difference_jacobian.transpose() * b * lin.difference_jacobian;
  return lin;
}

std::vector<Correspondence> associate(const NdtGrid& scan, const NdtGrid& map, const Pose2d& pose, std::size_t k) {
  std::vector<Correspondence> out;
  for (const auto& [idx, cell] : scan.cells()) {
    if (!cell.usable) continue;
    const Eigen::Vector2d q = pose * Eigen::Vector2d(cell.mean.head<2>());
    for (const NdtCell* m : map.nearest(q, k)) out.push_back({&cell, m});
  }
  return out;
}

double NdtTerm::cost(const Pose2d& pose) const {
  if (correspondences.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& c : correspondences) {
    sum += adaptive_loss(ndt_residual(*c.scan, *c.map, pose), loss.alpha, loss.c, loss.mu);
  }
  return weight / static_cast<double>(correspondences.size()) * sum;
}

double NdtTerm::linearize(const Pose2d& pose, Eigen::Ref<Eigen::Vector3d> g, Eigen::Ref<Eigen::Matrix3d> h) const {
  if (correspondences.empty()) return 0.0;
  const double scale = weight / static_cast<double>(correspondences.size());
  double sum = 0.0;
  for (const auto& c : correspondences) {
    const NdtLinearization lin = linearize_ndt_residual(*c.scan, *c.map, pose);
    const LossEvaluation rho = adaptive_loss_eval(lin.r2, loss.alpha, loss.c, loss.mu);
    sum += rho.value;
    g += scale * rho.d1 * lin.gradient;
    h += scale * rho.d1 * lin.gauss_newton;
  }
  return scale * sum;
}

// ---------------------------------------------------------------------------

double CostBreakdown::total() const {
  double t = 0.0;
  for (double v : ndt) t += v;
  for (double v : motion) t += v;
  for (double v : imu) t += v;
  return t;
}

WindowProblem::WindowProblem(std::optional<WindowState> anchor, std::vector<WindowEntry> entries, const NdtGrid& map,
                             EstimatorConfig cfg)
    : anchor_(std::move(anchor)), entries_(std::move(entries)), map_(&map), cfg_(std::move(cfg)) {
  initial_.reserve(entries_.size());
  for (const auto& e : entries_) initial_.push_back(e.state);
  correspondences_.resize(entries_.size());
}

void WindowProblem::associate(const Parameters& states) {
  const auto k = static_cast<std::size_t>(cfg_.k_neighbors);
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    correspondences_[i] =
        entries_[i].scan ? randt::associate(*entries_[i].scan, *map_, states[i].pose, k) : std::vector<Correspondence>{};
  }
}

std::size_t WindowProblem::correspondence_count() const {
  std::size_t n = 0;
  for (const auto& c : correspondences_) n += c.size();
  return n;
}

NdtTerm WindowProblem::ndt_term(std::size_t i) const {
  return NdtTerm{correspondences_[i], cfg_.w_ndt, RobustLossConfig{cfg_.alpha, cfg_.c, mu_, cfg_.d1, cfg_.d2}};
}

const WindowState* WindowProblem::predecessor(const Parameters& x, std::size_t i) const {
  if (i > 0) return &x[i - 1];
  return anchor_ ? &*anchor_ : nullptr;
}

CostBreakdown WindowProblem::breakdown(const Parameters& x) const {
  CostBreakdown b;
  for (std::size_t i = 0; i < x.size(); ++i) {
    b.ndt.push_back(ndt_term(i).cost(x[i].pose));
    const WindowState* prev = predecessor(x, i);
    b.motion.push_back(prev ? motion_cost(*prev, x[i], cfg_.omega_mm) : 0.0);
    b.imu.push_back(prev && entries_[i].imu ? imu_cost(*prev, x[i], *entries_[i].imu, cfg_.omega_imu) : 0.0);
  }
  return b;
}

double WindowProblem::cost(const Parameters& x) const { return breakdown(x).total(); }

double WindowProblem::linearize(const Parameters& x, Hessian& h, Eigen::VectorXd& g) const {
  const auto n = static_cast<Eigen::Index>(7 * x.size());
  h.setZero(n, n);
  g.setZero(n);
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Eigen::Index off = static_cast<Eigen::Index>(7 * i);
    total += ndt_term(i).linearize(x[i].pose, g.segment<3>(off), h.block<3, 3>(off, off));

    const WindowState* prev = predecessor(x, i);
    if (prev == nullptr) continue;
    // Columns 0..6 belong to the predecessor, which is fixed when it is the anchor.
    const bool prev_free = i > 0;
    const Eigen::Index prev_off = off - 7;
    auto accumulate = [&](const auto& jac, const auto& e, const auto& omega) {
      const auto jt_omega = (jac.transpose() * omega).eval();
      const Eigen::Matrix<double, 14, 1> grad = 2.0 * jt_omega * e;
      const Eigen::Matrix<double, 14, 14> hess = 2.0 * jt_omega * jac;
      g.segment<7>(off) += grad.tail<7>();
      h.block<7, 7>(off, off) += hess.bottomRightCorner<7, 7>();
      if (prev_free) {
        g.segment<7>(prev_off) += grad.head<7>();
        h.block<7, 7>(prev_off, prev_off) += hess.topLeftCorner<7, 7>();
        h.block<7, 7>(prev_off, off) += hess.topRightCorner<7, 7>();
        h.block<7, 7>(off, prev_off) += hess.bottomLeftCorner<7, 7>();
      }
      return e.dot(omega * e);
    };
    const double dt = x[i].timestamp - prev->timestamp;
    const Vector6d e_mm = motion_residual<double>(prev->pose, prev->velocity, x[i].pose, x[i].velocity, dt);
    total += accumulate(motion_jacobian(*prev, x[i]), e_mm, cfg_.omega_mm);
    if (entries_[i].imu) {
      const Eigen::Vector2d e_imu = imu_residual<double>(prev->pose, prev->bias, x[i].pose, x[i].bias, *entries_[i].imu);
      total += accumulate(imu_jacobian(*prev, x[i], *entries_[i].imu), e_imu, cfg_.omega_imu);
    }
  }
  return total;
}

WindowProblem::Parameters WindowProblem::retract(const Parameters& x, const Eigen::VectorXd& dx) const {
  Parameters out = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = retract_state(x[i], dx.segment<7>(static_cast<Eigen::Index>(7 * i)));
  }
  return out;
}

WindowProblem build_problem(std::optional<WindowState> anchor, std::vector<WindowEntry> entries, const NdtGrid& map,
                            const EstimatorConfig& cfg) {
  if (map.usable_count() == 0) throw NoUsableMap("submap has no usable cells");
  if (entries.size() > static_cast<std::size_t>(cfg.window_length)) {
    throw std::invalid_argument("build_problem: window longer than window_length");
  }
  return WindowProblem(std::move(anchor), std::move(entries), map, cfg);
}

SolveReport solve(WindowProblem& problem, std::span<const double> schedule, const EstimatorConfig& cfg) {
  SolveReport report;
  std::vector<WindowState> x = problem.initial_states();
  LmOptions options;
  options.max_iterations = cfg.max_lm_iterations;
  for (double mu : schedule) {
    problem.set_mu(mu);
    int iterations = 0;
    for (int round = 0; round < std::max(cfg.association_rounds, 1); ++round) {
      problem.associate(x);
      const LmSummary s = levenberg_marquardt(problem, x, options);
      iterations += s.iterations;
      if (s.diverged || s.final_cost > s.initial_cost || !std::isfinite(s.final_cost)) {
        report.states = problem.initial_states();
        report.degraded = true;
        report.iterations_per_stage.push_back(iterations);
        report.final_cost = std::numeric_limits<double>::quiet_NaN();
        return report;
      }
    }
    report.iterations_per_stage.push_back(iterations);
  }
  report.states = x;
  report.final_cost = problem.cost(x);
  report.correspondences = problem.correspondence_count();
  return report;
}

// ---------------------------------------------------------------------------

RegistrationProblem::RegistrationProblem(const NdtGrid& scan, const NdtGrid& map, EstimatorConfig cfg)
    : scan_(&scan), map_(&map), cfg_(std::move(cfg)) {}

void RegistrationProblem::associate(const Pose2d& pose) {
  correspondences_ = randt::associate(*scan_, *map_, pose, static_cast<std::size_t>(cfg_.k_neighbors));
}

NdtTerm RegistrationProblem::term() const {
  return NdtTerm{correspondences_, cfg_.w_ndt, RobustLossConfig{cfg_.alpha, cfg_.c, mu_, cfg_.d1, cfg_.d2}};
}

double RegistrationProblem::linearize(const Pose2d& x, Hessian& h, Eigen::VectorXd& g) const {
  h.setZero(3, 3);
  g.setZero(3);
  Eigen::Vector3d gv = Eigen::Vector3d::Zero();
  Eigen::Matrix3d hm = Eigen::Matrix3d::Zero();
  const double c = term().linearize(x, gv, hm);
  g = gv;
  h = hm;
  return c;
}

double RegistrationProblem::cost(const Pose2d& x) const { return term().cost(x); }

Pose2d RegistrationProblem::retract(const Pose2d& x, const Eigen::VectorXd& dx) const {
  return (x * exp_map<double>(Eigen::Vector3d(dx))).normalized();
}

RegistrationResult register_ndt(const NdtGrid& scan, const NdtGrid& map, const Pose2d& initial,
                                const EstimatorConfig& cfg) {
  if (map.usable_count() == 0) throw NoUsableMap("map has no usable cells");
  RegistrationProblem problem(scan, map, cfg);
  RegistrationResult result;
  Pose2d x = initial;
  LmOptions options;
  options.max_iterations = cfg.max_lm_iterations;
  for (double mu : cfg.schedule()) {
    problem.set_mu(mu);
    int iterations = 0;
    for (int round = 0; round < std::max(cfg.association_rounds, 1); ++round) {
      problem.associate(x);
      const LmSummary s = levenberg_marquardt(problem, x, options);
      iterations += s.iterations;
      if (s.diverged) {
        result.pose = initial;
        result.degraded = true;
        return result;
      }
    }
    result.iterations_per_stage.push_back(iterations);
  }
  result.pose = x;
  result.final_cost = problem.cost(x);
  result.correspondences = problem.correspondence_count();
  result.degraded = result.correspondences == 0;
  return result;
}

}  // namespace randt
