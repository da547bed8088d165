#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <cmath>
#include <vector>

namespace randt {

struct LmOptions {
  int max_iterations = 50;
  double gradient_tolerance = 1e-8;  // max-norm of the cost gradient
  double step_tolerance = 1e-10;     // norm of the tangent-space step
  double initial_lambda = 1e-4;
  double lambda_factor = 10.0;
  double max_lambda = 1e12;
};

struct LmSummary {
  int iterations = 0;
  int accepted_steps = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  bool converged = false;
  bool diverged = false;  // non-finite cost encountered
  std::vector<double> cost_history;  // cost after every accepted step, starting with the initial cost
};

namespace lm_detail {

// Marquardt damping: (H + lambda * diag(H)) dx = -g, with the diagonal
// clamped away from zero so flat directions still get damped.
inline bool damped_solve(const Eigen::MatrixXd& h, const Eigen::VectorXd& g, double lambda, Eigen::VectorXd& dx) {
  Eigen::MatrixXd a = h;
  a.diagonal() += lambda * h.diagonal().cwiseMax(1e-6);
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  if (ldlt.info() != Eigen::Success) return false;
  dx = ldlt.solve(-g);
  return dx.allFinite();
}

inline bool damped_solve(const Eigen::SparseMatrix<double>& h, const Eigen::VectorXd& g, double lambda,
                         Eigen::VectorXd& dx) {
  Eigen::SparseMatrix<double> a = h;
  for (int i = 0; i < a.rows(); ++i) {
    a.coeffRef(i, i) += lambda * std::max(h.coeff(i, i), 1e-6);
  }
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(a);
  if (ldlt.info() != Eigen::Success) return false;
  dx = ldlt.solve(-g);
  return ldlt.info() == Eigen::Success && dx.allFinite();
}

}  // namespace lm_detail

/// Levenberg-Marquardt over a problem exposing
///
///   using Parameters = ...; using Hessian = Eigen::MatrixXd | Eigen::SparseMatrix<double>;
///   double linearize(const Parameters&, Hessian& h, Eigen::VectorXd& g) const;
///   double cost(const Parameters&) const;
///   Parameters retract(const Parameters&, const Eigen::VectorXd& dx) const;
///
/// where h approximates the Hessian of the cost and g is its gradient. Steps
/// are accepted only when they lower the cost, so the cost sequence is
/// monotone non-increasing.
template <typename Problem>
LmSummary levenberg_marquardt(const Problem& problem, typename Problem::Parameters& x, const LmOptions& options) {
  LmSummary summary;
  typename Problem::Hessian h;
  Eigen::VectorXd g;
  double cost = problem.linearize(x, h, g);
  summary.initial_cost = cost;
  summary.cost_history.push_back(cost);
  if (!std::isfinite(cost)) {
    summary.diverged = true;
    summary.final_cost = cost;
    return summary;
  }
  double lambda = options.initial_lambda;
  bool relinearize = false;
  Eigen::VectorXd dx;

  while (summary.iterations < options.max_iterations) {
    if (relinearize) {
      cost = problem.linearize(x, h, g);
      relinearize = false;
    }
    if (g.size() == 0 || g.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
      summary.converged = true;
      break;
    }
    ++summary.iterations;
    if (!lm_detail::damped_solve(h, g, lambda, dx)) {
      lambda *= options.lambda_factor;
      if (lambda > options.max_lambda) break;
      continue;
    }
    if (dx.norm() < options.step_tolerance) {
      summary.converged = true;
      break;
    }
    typename Problem::Parameters candidate = problem.retract(x, dx);
    const double new_cost = problem.cost(candidate);
    if (std::isfinite(new_cost) && new_cost < cost) {
      x = std::move(candidate);
      cost = new_cost;
      summary.cost_history.push_back(cost);
      ++summary.accepted_steps;
      lambda = std::max(lambda / options.lambda_factor, 1e-12);
      relinearize = true;
    } else {
      lambda *= options.lambda_factor;
      if (lambda > options.max_lambda) {
        summary.converged = true;  // no descent direction left at this scale
        break;
      }
    }
  }
  summary.final_cost = cost;
  return summary;
}

}  // namespace randt
