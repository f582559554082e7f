// Support detection: per-coordinate binary hypothesis tests comparing the
// sign likelihood with coordinate j present vs zeroed, thresholded at
// Th = ln((1-p)/p). Runs in Theta(mN) stable log-CDF evaluations after one
// shared inner-product precomputation, never a 2^m composite search.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "onebit/numerics.hpp"

namespace onebit {

struct SupportEstimate {
  Eigen::VectorXi q_hat;   // q_hat(j) = (scores(j) >= threshold)
  Eigen::VectorXd scores;  // per-coordinate LLR, nats
  double threshold = 0.0;
  double p_hat = 0.0;
};

// MAP threshold for activity probability p.
inline double threshold_from_p(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("threshold_from_p: p must be in (0, 1)");
  return std::log((1.0 - p) / p);
}

// log Phi(y_i a_i^T s / sigma_z): log-likelihood of one sign measurement.
inline double sign_log_likelihood(double y_i, const Eigen::VectorXd& a_i,
                                  const Eigen::VectorXd& s, double sigma_z) {
  if (sigma_z <= 0.0) throw std::invalid_argument("sign_log_likelihood: sigma_z must be > 0");
  return log_std_normal_cdf(y_i * a_i.dot(s) / sigma_z);
}

namespace detail {

// LLR for coordinate j given the precomputed products t = A^T s_hat and the
// full-model log-likelihood. Removing coordinate j shifts each product by
// -a_ji * s_hat_j, so no full recomputation per j is needed.
inline double activity_score_from_products(int j, const Eigen::VectorXd& y,
                                           const Eigen::MatrixXd& a_mat,
                                           const Eigen::VectorXd& s_hat,
                                           const Eigen::VectorXd& products, double full_loglik,
                                           double sigma_z) {
  const double sj = s_hat(j);
  if (sj == 0.0) return 0.0;  // s_hat == s_hat with j zeroed; LLR is identically zero
  const Eigen::Index n = y.size();
  double reduced_loglik = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    reduced_loglik += log_std_normal_cdf(y(i) * (products(i) - a_mat(j, i) * sj) / sigma_z);
  }
  return full_loglik - reduced_loglik;
}

}  // namespace detail

// LLR between "coordinate j active" and "coordinate j zeroed" at the current
// estimate s_hat:  sum_i [log Phi(y_i a_i^T s / sz) - log Phi(y_i a_i^T s_-j / sz)].
inline double activity_score(int j, const Eigen::VectorXd& y, const Eigen::MatrixXd& a_mat,
                             const Eigen::VectorXd& s_hat, double sigma_z) {
  if (sigma_z <= 0.0) throw std::invalid_argument("activity_score: sigma_z must be > 0");
  if (j < 0 || j >= s_hat.size()) throw std::invalid_argument("activity_score: index out of range");
  const Eigen::VectorXd products = a_mat.transpose() * s_hat;
  double full_loglik = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i)
    full_loglik += log_std_normal_cdf(y(i) * products(i) / sigma_z);
  return detail::activity_score_from_products(j, y, a_mat, s_hat, products, full_loglik, sigma_z);
}

// Scores every coordinate and thresholds at Th = ln((1-p)/p). A score exactly
// equal to Th decides active.
inline SupportEstimate detect_support(const Eigen::VectorXd& y, const Eigen::MatrixXd& a_mat,
                                      const Eigen::VectorXd& s_hat, double sigma_z, double p) {
  if (sigma_z <= 0.0) throw std::invalid_argument("detect_support: sigma_z must be > 0");
  const int m = static_cast<int>(s_hat.size());
  SupportEstimate est;
  est.p_hat = p;
  est.threshold = threshold_from_p(p);
  est.scores.resize(m);
  est.q_hat.resize(m);

  const Eigen::VectorXd products = a_mat.transpose() * s_hat;
  double full_loglik = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i)
    full_loglik += log_std_normal_cdf(y(i) * products(i) / sigma_z);

  for (int j = 0; j < m; ++j) {
    est.scores(j) =
        detail::activity_score_from_products(j, y, a_mat, s_hat, products, full_loglik, sigma_z);
    est.q_hat(j) = est.scores(j) >= est.threshold ? 1 : 0;
  }
  return est;
}

// p_hat = |{j : |s_hat_j| > alpha * std(s_hat)}| / m, clamped to
// [1/m, 1 - 1/m] so the detection threshold stays finite. The variance is the
// biased empirical variance over all m entries. Amplitudes are zero-mean, so
// the magnitude is compared, not the signed value. The optional flag reports
// an all-zero estimate (the clamp floor is returned).
inline double estimate_activity_probability(const Eigen::VectorXd& s_hat, double alpha,
                                            bool* degenerate = nullptr) {
  if (alpha <= 0.0)
    throw std::invalid_argument("estimate_activity_probability: alpha must be > 0");
  const int m = static_cast<int>(s_hat.size());
  if (m < 2)
    throw std::invalid_argument(
        "estimate_activity_probability: need m >= 2 for a nonempty clamp range");
  if (degenerate) *degenerate = false;
  const double lo = 1.0 / m;
  const double hi = 1.0 - 1.0 / m;
  if (s_hat.isZero(0.0)) {
    if (degenerate) *degenerate = true;
    return lo;
  }
  const double mean = s_hat.mean();
  const double var = (s_hat.array() - mean).square().sum() / m;
  const double cut = alpha * std::sqrt(var);
  const int count = static_cast<int>((s_hat.array().abs() > cut).count());
  return std::clamp(static_cast<double>(count) / m, lo, hi);
}

// Threshold multiplier schedule: alpha^(k) = min(alpha_0 * growth^k, alpha_max).
// Defaults sweep 0.5 up to 3 by factors of 1.2.
inline double alpha_schedule(int k, double alpha_0 = 0.5, double growth = 1.2,
                             double alpha_max = 3.0) {
  if (k < 0 || alpha_0 <= 0.0 || growth <= 1.0)
    throw std::invalid_argument("alpha_schedule: invalid arguments");
  return std::min(alpha_0 * std::pow(growth, k), alpha_max);
}

}  // namespace onebit
