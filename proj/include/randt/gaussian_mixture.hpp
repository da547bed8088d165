#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace randt {

template <int Dim>
struct GaussianMixture {
  using Vector = Eigen::Matrix<double, Dim, 1>;
  using Matrix = Eigen::Matrix<double, Dim, Dim>;

  std::vector<double> weights;
  std::vector<Vector> means;
  std::vector<Matrix> covariances;

  std::size_t size() const { return weights.size(); }

  void add(double weight, const Vector& mean, const Matrix& covariance) {
    weights.push_back(weight);
    means.push_back(mean);
    covariances.push_back(covariance);
  }
};

/// Normal density N(x; 0, cov).
template <int Dim>
double gaussian_density(const Eigen::Matrix<double, Dim, 1>& x, const Eigen::Matrix<double, Dim, Dim>& cov) {
  if constexpr (Dim == 2) {
    const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
    if (!(det > 0.0) || !(cov(0, 0) > 0.0)) throw std::domain_error("gaussian_density: covariance not positive definite");
    const double q = (cov(1, 1) * x(0) * x(0) - (cov(0, 1) + cov(1, 0)) * x(0) * x(1) + cov(0, 0) * x(1) * x(1)) / det;
    return std::exp(-0.5 * q) / (2.0 * std::numbers::pi * std::sqrt(det));
  }
  const Eigen::LLT<Eigen::Matrix<double, Dim, Dim>> llt(cov);
  if (llt.info() != Eigen::Success) throw std::domain_error("gaussian_density: covariance not positive definite");
  const Eigen::Matrix<double, Dim, 1> z = llt.matrixL().solve(x);
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return std::exp(-0.5 * z.squaredNorm() - 0.5 * log_det - 0.5 * Dim * std::log(2.0 * std::numbers::pi));
}

/// Closed-form integral of the product of two mixtures:
/// sum_ij w_i v_j N(mu_i - nu_j; 0, S_i + L_j).
template <int Dim>
double mixture_overlap(const GaussianMixture<Dim>& p, const GaussianMixture<Dim>& q) {
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j = 0; j < q.size(); ++j) {
      total += p.weights[i] * q.weights[j] *
               gaussian_density<Dim>(p.means[i] - q.means[j], p.covariances[i] + q.covariances[j]);
    }
  }
  return total;
}

/// Cauchy-Schwarz divergence -log(<p,q> / sqrt(<p,p><q,q>)); zero iff p == q.
template <int Dim>
double cauchy_schwarz_divergence(const GaussianMixture<Dim>& p, const GaussianMixture<Dim>& q) {
  if (p.size() == 0 || q.size() == 0) throw std::invalid_argument("cauchy_schwarz_divergence: empty mixture");
  const double pq = mixture_overlap(p, q);
  const double pp = mixture_overlap(p, p);
  const double qq = mixture_overlap(q, q);
  // log form keeps tiny overlaps finite until they underflow to zero.
  return -std::log(pq) + 0.5 * (std::log(pp) + std::log(qq));
}

/// Geometric (x, y) marginal of an intensity-augmented mixture.
inline GaussianMixture<2> marginal_xy(const GaussianMixture<3>& m) {
  GaussianMixture<2> out;
  for (std::size_t i = 0; i < m.size(); ++i) {
    out.add(m.weights[i], m.means[i].head<2>(), m.covariances[i].topLeftCorner<2, 2>());
  }
  return out;
}

}  // namespace randt
