// The two recovery procedures: the iterative detect-then-estimate algorithm
// (BHT-MLE) and the plain ML baseline that treats every coordinate as active.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "onebit/detector.hpp"
#include "onebit/estimator.hpp"
#include "onebit/model.hpp"
#include "onebit/numerics.hpp"

namespace onebit {

enum class InfeasiblePolicy { project, zero, abort };

// Per-iteration diagnostics handed to an optional observer (used by the CLI's
// single-trial report).
struct IterationTrace {
  int k = 0;
  double alpha = 0.0;
  double p_hat = 0.0;
  double threshold = 0.0;
  double sigma_z = 0.0;
  int support_size = 0;
  Eigen::VectorXd scores;
  int solver_iterations = 0;
  double objective = 0.0;
  bool solver_converged = false;
  bool feasible = false;
};

struct BhtMleConfig {
  int n_outer = 10;
  double alpha_0 = 0.5;
  double alpha_growth = 1.2;
  double alpha_max = 3.0;
  double solver_tol = 1e-8;
  int solver_max_iter = 200;
  InfeasiblePolicy infeasible_policy = InfeasiblePolicy::project;
  std::function<void(const IterationTrace&)> observer;  // optional, read-only

  void validate() const {
    if (n_outer < 1) throw std::invalid_argument("BhtMleConfig: n_outer must be >= 1");
    if (alpha_0 <= 0.0 || alpha_max <= 0.0 || alpha_growth <= 1.0)
      throw std::invalid_argument("BhtMleConfig: invalid alpha schedule");
  }
};

struct RecoveryResult {
  Eigen::VectorXd s_hat;
  SupportEstimate support;  // final iteration
  MlSolution solver;        // final iteration
  double wall_time_s = 0.0;
  int iterations_run = 0;
  bool infeasible_projected = false;
  bool empty_support_fallback = false;
  bool solver_not_converged = false;

  std::vector<std::string> flag_names() const {
    std::vector<std::string> names;
    if (infeasible_projected) names.push_back("infeasible_projected");
    if (empty_support_fallback) names.push_back("empty_support_fallback");
    if (solver_not_converged) names.push_back("solver_not_converged");
    return names;
  }
};

namespace detail {

// Applies the infeasibility policy to a solved P2 instance and returns the
// recovered amplitudes. An infeasible minimizer (||v*|| >= 1/sigma_e, common
// when the sign data are separable) still carries a meaningful direction; the
// amplitude map, however, blows up toward the feasibility boundary, so the
// scale is untrustworthy there. `project` therefore keeps the ML direction
// and projects onto the amplitude sphere of the reference norm (the norm of
// the estimate the solve started from); `zero` gives up on the trial's
// amplitudes; `abort` raises.
inline Eigen::VectorXd amplitudes_with_policy(const MlSolution& sol, const ReducedProblem& prob,
                                              InfeasiblePolicy policy, double ref_norm,
                                              bool& flagged) {
  if (sol.feasible) return recover_amplitudes(sol.v_star, prob.sigma_e, prob.sigma_n);
  flagged = true;
  switch (policy) {
    case InfeasiblePolicy::project: {
      const double norm = sol.v_star.norm();
      if (norm == 0.0 || ref_norm <= 0.0) return Eigen::VectorXd::Zero(sol.v_star.size());
      return sol.v_star * (ref_norm / norm);
    }
    case InfeasiblePolicy::zero:
      return Eigen::VectorXd::Zero(sol.v_star.size());
    case InfeasiblePolicy::abort:
      throw std::runtime_error("P2 solution infeasible and policy is abort");
  }
  throw std::logic_error("unreachable");
}

// Forward reparameterization v = w / sqrt(||w||^2 sigma_e^2 + sigma_n^2).
inline Eigen::VectorXd forward_map(const Eigen::VectorXd& w, double sigma_e, double sigma_n) {
  return w / equivalent_noise_std(w.squaredNorm(), sigma_e * sigma_e, sigma_n * sigma_n);
}

}  // namespace detail

// Iterative two-step recovery: least-squares initialization, then n_outer
// rounds of (activity-probability estimate -> support detection -> reduced ML
// amplitude solve -> re-embed). The support threshold multiplier alpha grows
// geometrically across rounds, so early rounds overestimate the activity and
// later rounds prune it.
inline RecoveryResult run_bht_mle(const Eigen::MatrixXd& a_mat, const Eigen::VectorXd& y,
                                  double sigma_e, double sigma_n,
                                  const BhtMleConfig& config = {}) {
  config.validate();
  if (sigma_n <= 0.0) throw std::invalid_argument("run_bht_mle: sigma_n must be > 0");
  if (a_mat.cols() != y.size()) throw std::invalid_argument("run_bht_mle: dimension mismatch");
  const auto t0 = std::chrono::steady_clock::now();
  const int m = static_cast<int>(a_mat.rows());
  const double sigma_e_sq = sigma_e * sigma_e;
  const double sigma_n_sq = sigma_n * sigma_n;

  RecoveryResult result;
  Eigen::VectorXd s_hat = least_squares_init(a_mat, y);

  // warm-start state carried between rounds
  std::vector<int> prev_index;
  Eigen::VectorXd prev_w;

  for (int k = 0; k < config.n_outer; ++k) {
    const double alpha = alpha_schedule(k, config.alpha_0, config.alpha_growth, config.alpha_max);
    const double p_hat = estimate_activity_probability(s_hat, alpha);
    const double s_norm_sq = s_hat.squaredNorm();
    const double sigma_z =
        s_norm_sq > 0.0 ? equivalent_noise_std(s_norm_sq, sigma_e_sq, sigma_n_sq)
                        : equivalent_noise_std(1.0, sigma_e_sq, sigma_n_sq);

    SupportEstimate support = detect_support(y, a_mat, s_hat, sigma_z, p_hat);
    if (support.q_hat.sum() == 0) {
      // keep the single largest-|s_hat| coordinate so the reduction stays defined
      int top = 0;
      s_hat.cwiseAbs().maxCoeff(&top);
      support.q_hat(top) = 1;
      result.empty_support_fallback = true;
    }

    ReducedProblem prob = reduce_problem(a_mat, y, support.q_hat, sigma_e, sigma_n);

    // warm start: previous amplitudes where the support persists, 0 for newcomers
    Eigen::VectorXd w0 = Eigen::VectorXd::Zero(prob.n_active());
    if (!prev_index.empty()) {
      for (int idx = 0; idx < prob.n_active(); ++idx) {
        const auto it =
            std::lower_bound(prev_index.begin(), prev_index.end(), prob.active_index[idx]);
        if (it != prev_index.end() && *it == prob.active_index[idx])
          w0(idx) = prev_w(static_cast<Eigen::Index>(it - prev_index.begin()));
      }
    }
    const Eigen::VectorXd v0 = w0.isZero(0.0)
                                   ? Eigen::VectorXd::Zero(prob.n_active())
                                   : detail::forward_map(w0, sigma_e, sigma_n);

    MlSolution sol = solve_p2(prob, v0, config.solver_tol, config.solver_max_iter);
    if (!sol.converged) result.solver_not_converged = true;

    const double ref_norm = s_hat.norm();
    bool infeasible_handled = false;
    Eigen::VectorXd w = detail::amplitudes_with_policy(sol, prob, config.infeasible_policy,
                                                       ref_norm, infeasible_handled);
    // Sign measurements carry almost no scale information: the recovered
    // scale inflates sharply as the minimizer approaches the feasibility
    // boundary, which at moderate N/support ratios it regularly does. Keep
    // the ML direction and relative amplitudes but never let a round grow
    // the estimate norm beyond the one it started from.
    const double w_norm = w.norm();
    if (w_norm > ref_norm && w_norm > 0.0) w *= ref_norm / w_norm;
    if (infeasible_handled) result.infeasible_projected = true;
    if (sol.feasible || infeasible_handled) sol.w_star = w;

    s_hat = embed_solution(w, prob.active_index, m);
    prev_index = prob.active_index;
    prev_w = w;
    ++result.iterations_run;

    if (config.observer) {
      IterationTrace trace;
      trace.k = k;
      trace.alpha = alpha;
      trace.p_hat = p_hat;
      trace.threshold = support.threshold;
      trace.sigma_z = sigma_z;
      trace.support_size = static_cast<int>(support.q_hat.sum());
      trace.scores = support.scores;
      trace.solver_iterations = sol.iterations;
      trace.objective = sol.objective;
      trace.solver_converged = sol.converged;
      trace.feasible = sol.feasible;
      config.observer(trace);
    }

    result.support = std::move(support);
    result.solver = std::move(sol);
  }

  result.s_hat = std::move(s_hat);
  result.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

// Plain ML baseline: every coordinate treated as active, one P2 solve in full
// dimension m, initialized from the forward-mapped least-squares estimate.
inline RecoveryResult run_mle_baseline(const Eigen::MatrixXd& a_mat, const Eigen::VectorXd& y,
                                       double sigma_e, double sigma_n, double solver_tol = 1e-8,
                                       int solver_max_iter = 200,
                                       InfeasiblePolicy policy = InfeasiblePolicy::project) {
  if (sigma_n <= 0.0) throw std::invalid_argument("run_mle_baseline: sigma_n must be > 0");
  if (a_mat.cols() != y.size()) throw std::invalid_argument("run_mle_baseline: dimension mismatch");
  const auto t0 = std::chrono::steady_clock::now();
  const int m = static_cast<int>(a_mat.rows());

  RecoveryResult result;
  const Eigen::VectorXd s0 = least_squares_init(a_mat, y);
  const ReducedProblem prob =
      reduce_problem(a_mat, y, Eigen::VectorXi::Ones(m), sigma_e, sigma_n);
  const Eigen::VectorXd v0 = s0.isZero(0.0) ? Eigen::VectorXd::Zero(m)
                                            : detail::forward_map(s0, sigma_e, sigma_n);

  MlSolution sol = solve_p2(prob, v0, solver_tol, solver_max_iter);
  if (!sol.converged) result.solver_not_converged = true;

  bool infeasible_handled = false;
  const Eigen::VectorXd w =
      detail::amplitudes_with_policy(sol, prob, policy, s0.norm(), infeasible_handled);
  if (infeasible_handled) result.infeasible_projected = true;
  if (sol.feasible || infeasible_handled) sol.w_star = w;

  result.s_hat = w;
  result.iterations_run = 1;

  // all-active "support" consistent with the estimate's invariants
  result.support.q_hat = Eigen::VectorXi::Ones(m);
  result.support.scores = Eigen::VectorXd::Zero(m);
  result.support.threshold = 0.0;
  result.support.p_hat = m > 1 ? 1.0 - 1.0 / m : 0.5;
  result.solver = std::move(sol);
  result.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace onebit
