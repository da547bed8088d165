#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace randt {

/// Welsch loss 1 - exp(-r2 / (2 c^2)).
inline double welsch_loss(double r2, double c) { return -std::expm1(-r2 / (2.0 * c * c)); }

/// Shape parameters of the adaptive loss.
///
/// d1 and d2 are the scale factors of the classic D2D score. They carry no
/// weight here: d1 folds into the estimator's NDT weight and d2 into 1/c^2.
struct RobustLossConfig {
  double alpha = -2.0;
  double c = 1.5;
  double mu = 1.0;
  double d1 = 1.0;
  double d2 = 1.0;
};

/// Loss value with first and second derivative with respect to r2.
struct LossEvaluation {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

inline constexpr double kAlphaLimitTolerance = 1e-8;

/// Adaptive robust loss over squared residuals with annealed scale mu * c^2:
///   |a-2|/a * ((x/|a-2| + 1)^(a/2) - 1),  x = r2 / (mu c^2).
/// alpha -> 2 reduces to x/2, alpha -> 0 to log(x/2 + 1), alpha -> -inf to Welsch.
inline LossEvaluation adaptive_loss_eval(double r2, double alpha, double c, double mu) {
  const double scale = mu * c * c;
  const double x = r2 / scale;
  LossEvaluation e;
  if (std::abs(alpha - 2.0) < kAlphaLimitTolerance) {
    e.value = 0.5 * x;
    e.d1 = 0.5 / scale;
    e.d2 = 0.0;
  } else if (std::abs(alpha) < kAlphaLimitTolerance) {
    e.value = std::log1p(0.5 * x);
    e.d1 = 1.0 / (scale * (x + 2.0));
    e.d2 = -1.0 / (scale * scale * (x + 2.0) * (x + 2.0));
  } else {
    const double b = std::abs(alpha - 2.0);
    const double base_log = std::log1p(x / b);
    e.value = (b / alpha) * std::expm1(0.5 * alpha * base_log);
    // d/dr2 = (1 / (2 scale)) (x/b + 1)^(alpha/2 - 1)
    e.d1 = 0.5 / scale * std::exp((0.5 * alpha - 1.0) * base_log);
    e.d2 = 0.5 / scale * (0.5 * alpha - 1.0) / (b * scale) * std::exp((0.5 * alpha - 2.0) * base_log);
  }
  return e;
}

inline double adaptive_loss(double r2, double alpha, double c, double mu) {
  return adaptive_loss_eval(r2, alpha, c, mu).value;
}

/// Geometric scale schedule mu0, mu0/k, ... ending exactly at 1.
inline std::vector<double> anneal_schedule(double mu0, double k_mu) {
  if (!(mu0 >= 1.0)) throw std::invalid_argument("anneal_schedule: mu0 must be >= 1");
  if (!(k_mu > 1.0)) throw std::invalid_argument("anneal_schedule: k_mu must be > 1");
  std::vector<double> out;
  double mu = mu0;
  while (mu > 1.0 + 1e-12) {
    out.push_back(mu);
    mu /= k_mu;
  }
  out.push_back(1.0);
  return out;
}

}  // namespace randt
