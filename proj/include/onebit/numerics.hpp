// Numerically stable scalar kernels for the probit likelihood, the
// minimum-norm least-squares initializer, and a finite-difference gradient
// used as a test oracle.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace onebit {

namespace detail {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
constexpr double kHalfLn2Pi = 0.91893853320467274178;

// Correction series of the Gaussian tail expansion for u << 0:
//   Phi(u) = phi(u)/(-u) * (1 + C(u)),  C(u) = sum_{i>=1} (-1)^i (2i-1)!! / u^(2i).
// The series is asymptotic; accumulation stops at the smallest term.
inline double tail_series_correction(double u) {
  const double inv_u2 = 1.0 / (u * u);
  double term = 1.0;
  double sum = 0.0;
  double prev_mag = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= 60; ++i) {
    term *= -(2 * i - 1) * inv_u2;
    const double mag = std::fabs(term);
    if (mag >= prev_mag) break;
    sum += term;
    if (mag < 1e-17) break;
    prev_mag = mag;
  }
  return sum;
}

}  // namespace detail

// ln Phi(u) for the standard normal CDF, finite for every finite input.
// Branches: log1p of the upper-tail complement for u >= 6, direct erfc in the
// midrange, and the asymptotic tail expansion below the switchover at -8.
inline double log_std_normal_cdf(double u) {
  if (!std::isfinite(u)) throw std::invalid_argument("log_std_normal_cdf: non-finite input");
  if (u >= 6.0) {
    return std::log1p(-0.5 * std::erfc(u * detail::kInvSqrt2));
  }
  if (u >= -8.0) {
    return std::log(0.5 * std::erfc(-u * detail::kInvSqrt2));
  }
  return -0.5 * u * u - std::log(-u) - detail::kHalfLn2Pi +
         std::log1p(detail::tail_series_correction(u));
}

// Inverse Mills ratio phi(u)/Phi(u); behaves like -u as u -> -inf and decays
// to 0 as u -> +inf. Shares the tail expansion with log_std_normal_cdf:
// phi/Phi = -u / S(u) for u below the switchover.
inline double inverse_mills(double u) {
  if (!std::isfinite(u)) throw std::invalid_argument("inverse_mills: non-finite input");
  if (u >= -8.0) {
    const double density = detail::kInvSqrt2Pi * std::exp(-0.5 * u * u);
    return density / (0.5 * std::erfc(-u * detail::kInvSqrt2));
  }
  return -u / (1.0 + detail::tail_series_correction(u));
}

// Minimum-norm least-squares solution s0 of A^T s ~ y, with A given as
// m x N (measurement vectors in columns). Rank-revealing, so rank-deficient
// systems fall back to the minimum-norm solution.
inline Eigen::VectorXd least_squares_init(const Eigen::MatrixXd& a_mat,
                                          const Eigen::VectorXd& y) {
  if (a_mat.cols() != y.size())
    throw std::invalid_argument("least_squares_init: dimension mismatch");
  return a_mat.transpose().completeOrthogonalDecomposition().solve(y);
}

// Central differences (f(x+h e_j) - f(x-h e_j)) / 2h per coordinate.
template <typename F>
Eigen::VectorXd finite_difference_gradient(F&& f, const Eigen::VectorXd& x, double h) {
  if (h <= 0.0) throw std::invalid_argument("finite_difference_gradient: h must be positive");
  Eigen::VectorXd grad(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    probe(j) = x(j) + h;
    const double fp = f(probe);
    probe(j) = x(j) - h;
    const double fm = f(probe);
    probe(j) = x(j);
    grad(j) = (fp - fm) / (2.0 * h);
  }
  return grad;
}

}  // namespace onebit
