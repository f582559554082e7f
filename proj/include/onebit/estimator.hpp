// Amplitude recovery on a detected support. The constrained sign-measurement
// ML problem is solved through its convex unconstrained surrogate
//   minimize_v  -sum_i log Phi(y_i h_i^T v),
// whose minimizer v* yields amplitudes w* = sigma_n v* / sqrt(1 - sigma_e^2 ||v*||^2)
// whenever the feasibility condition ||v*||^2 < 1/sigma_e^2 holds.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "onebit/numerics.hpp"

namespace onebit {

struct ReducedProblem {
  Eigen::MatrixXd h_mat;          // n_active x N; column i is a_i restricted to the support
  Eigen::VectorXd y;              // signs, length N
  std::vector<int> active_index;  // ordered support coordinates
  double sigma_e = 0.0;
  double sigma_n = 0.0;

  int n_active() const { return static_cast<int>(active_index.size()); }
};

struct MlSolution {
  Eigen::VectorXd v_star;
  std::optional<Eigen::VectorXd> w_star;  // filled by the caller when feasible
  bool feasible = false;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;  // gradient criterion only
  double grad_norm = 0.0;
  std::string stop_reason;  // "gradient" | "max_iter" | "separable/unbounded"
};

// Keeps the rows of a_mat at the detected support, order-preserving.
inline ReducedProblem reduce_problem(const Eigen::MatrixXd& a_mat, const Eigen::VectorXd& y,
                                     const Eigen::VectorXi& q_hat, double sigma_e,
                                     double sigma_n) {
  if (q_hat.size() != a_mat.rows()) throw std::invalid_argument("reduce_problem: q_hat length");
  if (y.size() != a_mat.cols()) throw std::invalid_argument("reduce_problem: y length");
  ReducedProblem prob;
  prob.y = y;
  prob.sigma_e = sigma_e;
  prob.sigma_n = sigma_n;
  for (int j = 0; j < q_hat.size(); ++j)
    if (q_hat(j) != 0) prob.active_index.push_back(j);
  if (prob.active_index.empty())
    throw std::invalid_argument("reduce_problem: no active coordinates detected");
  prob.h_mat.resize(prob.n_active(), a_mat.cols());
  for (int k = 0; k < prob.n_active(); ++k) prob.h_mat.row(k) = a_mat.row(prob.active_index[k]);
  return prob;
}

// -sum_i log Phi(y_i h_i^T v); finite and positive for finite v.
inline double p2_objective(const Eigen::VectorXd& v, const ReducedProblem& prob) {
  const Eigen::VectorXd u = prob.y.cwiseProduct(prob.h_mat.transpose() * v);
  double obj = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) obj -= log_std_normal_cdf(u(i));
  return obj;
}

// Analytic gradient: -sum_i y_i h_i IM(y_i h_i^T v).
inline Eigen::VectorXd p2_gradient(const Eigen::VectorXd& v, const ReducedProblem& prob) {
  const Eigen::VectorXd u = prob.y.cwiseProduct(prob.h_mat.transpose() * v);
  Eigen::VectorXd weights(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) weights(i) = prob.y(i) * inverse_mills(u(i));
  return -(prob.h_mat * weights);
}

// Hessian sum_i h_i h_i^T [IM(u_i)^2 + u_i IM(u_i)]; positive semidefinite by
// log-concavity of Phi.
inline Eigen::MatrixXd p2_hessian(const Eigen::VectorXd& v, const ReducedProblem& prob) {
  const Eigen::VectorXd u = prob.y.cwiseProduct(prob.h_mat.transpose() * v);
  Eigen::VectorXd curvature(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double im = inverse_mills(u(i));
    curvature(i) = im * (im + u(i));
  }
  const Eigen::MatrixXd scaled = prob.h_mat * curvature.asDiagonal();
  return scaled * prob.h_mat.transpose();
}

// Existence condition for the constrained problem: ||v*||^2 < 1/sigma_e^2.
// Unperturbed sensing (sigma_e = 0) is always feasible.
inline bool check_feasibility(const Eigen::VectorXd& v_star, double sigma_e) {
  if (sigma_e == 0.0) return true;
  return v_star.squaredNorm() < 1.0 / (sigma_e * sigma_e);
}

// Inverts the reparameterization v = w / sqrt(||w||^2 sigma_e^2 + sigma_n^2):
//   w = sigma_n v / sqrt(1 - sigma_e^2 ||v||^2).
inline Eigen::VectorXd recover_amplitudes(const Eigen::VectorXd& v_star, double sigma_e,
                                          double sigma_n) {
  if (!check_feasibility(v_star, sigma_e))
    throw std::invalid_argument("recover_amplitudes: infeasible v_star");
  const double denom = std::sqrt(1.0 - sigma_e * sigma_e * v_star.squaredNorm());
  return (sigma_n / denom) * v_star;
}

// Full-length vector with w_star at the active positions, zero elsewhere.
inline Eigen::VectorXd embed_solution(const Eigen::VectorXd& w_star,
                                      const std::vector<int>& active_index, int m) {
  if (static_cast<int>(active_index.size()) != w_star.size())
    throw std::invalid_argument("embed_solution: index/amplitude length mismatch");
  Eigen::VectorXd full = Eigen::VectorXd::Zero(m);
  for (size_t k = 0; k < active_index.size(); ++k) {
    const int j = active_index[k];
    if (j < 0 || j >= m) throw std::invalid_argument("embed_solution: index out of range");
    full(j) = w_star(static_cast<Eigen::Index>(k));
  }
  return full;
}

// Damped Newton descent with Armijo backtracking on the convex objective.
// Terminates on the gradient norm, on max_iter, or on the divergence guard
// ||v||^2 >= 4/sigma_e^2 (||v|| >= 1e6 when sigma_e = 0), which fires when the
// sign data are linearly separable and the likelihood has no finite minimizer.
// `converged` reflects the gradient criterion only; w_star is left unfilled.
inline MlSolution solve_p2(const ReducedProblem& prob, const Eigen::VectorXd& v0,
                           double tol = 1e-8, int max_iter = 200) {
  if (tol <= 0.0) throw std::invalid_argument("solve_p2: tol must be > 0");
  if (max_iter < 1) throw std::invalid_argument("solve_p2: max_iter must be >= 1");
  if (v0.size() != prob.n_active()) throw std::invalid_argument("solve_p2: v0 dimension");

  const double guard_norm_sq = prob.sigma_e > 0.0
                                   ? 4.0 / (prob.sigma_e * prob.sigma_e)
                                   : 1e12;  // (1e6)^2

  MlSolution sol;
  Eigen::VectorXd v = v0;
  double f = p2_objective(v, prob);
  const int n = prob.n_active();

  for (int iter = 0; iter < max_iter; ++iter) {
    if (v.squaredNorm() >= guard_norm_sq) {
      sol.stop_reason = "separable/unbounded";
      break;
    }
    const Eigen::VectorXd grad = p2_gradient(v, prob);
    sol.grad_norm = grad.norm();
    if (sol.grad_norm <= tol) {
      sol.converged = true;
      sol.stop_reason = "gradient";
      break;
    }

    Eigen::MatrixXd hess = p2_hessian(v, prob);
    double damping = 1e-10 * hess.trace() / n;
    if (!(damping > 0.0)) damping = 1e-12;
    Eigen::VectorXd step;
    for (int attempt = 0; attempt < 8; ++attempt) {
      Eigen::LDLT<Eigen::MatrixXd> ldlt(hess + damping * Eigen::MatrixXd::Identity(n, n));
      if (ldlt.info() == Eigen::Success) {
        step = ldlt.solve(-grad);
        if (step.allFinite()) break;
      }
      damping *= 100.0;
    }
    if (!step.allFinite() || step.size() == 0) {
      sol.stop_reason = "max_iter";
      break;
    }

    // Armijo backtracking: f(v + t d) <= f(v) + c t g.d
    const double directional = grad.dot(step);
    double t = 1.0;
    double f_new = f;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      f_new = p2_objective(v + t * step, prob);
      if (f_new <= f + 1e-4 * t * directional) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      sol.stop_reason = "max_iter";
      break;
    }
    v += t * step;
    f = f_new;
    ++sol.iterations;
  }

  if (sol.stop_reason.empty()) {
    // loop exhausted max_iter, or the guard fired on the last allowed iterate
    sol.stop_reason = v.squaredNorm() >= guard_norm_sq ? "separable/unbounded" : "max_iter";
  }
  sol.v_star = v;
  sol.objective = f;
  if (!sol.converged) {
    sol.grad_norm = p2_gradient(v, prob).norm();
    if (sol.grad_norm <= tol && sol.stop_reason == "max_iter") sol.converged = true;
  }
  sol.feasible = check_feasibility(v, prob.sigma_e);
  return sol;
}

}  // namespace onebit
