// Generative model: Bernoulli-Gaussian sparse signal, perturbed linear
// measurement x = (A+E)^T s + n, and sign quantization y = sign(x).
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <iostream>
#include <stdexcept>

#include "onebit/rng.hpp"

namespace onebit {

struct ModelParams {
  int m = 200;           // signal length
  int n_meas = 400;      // number of sign measurements
  double p = 0.1;        // activity probability
  double sigma_e = 0.1;  // perturbation std
  double sigma_n = 0.1;  // additive-noise std
  double sigma_r = 1.0;  // active-amplitude std

  void validate() const {
    if (m < 1 || n_meas < 1) throw std::invalid_argument("ModelParams: m and n_meas must be >= 1");
    if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("ModelParams: p must be in (0, 1]");
    if (sigma_e < 0.0) throw std::invalid_argument("ModelParams: sigma_e must be >= 0");
    if (sigma_n <= 0.0) throw std::invalid_argument("ModelParams: sigma_n must be > 0");
    if (sigma_r <= 0.0) throw std::invalid_argument("ModelParams: sigma_r must be > 0");
  }
};

struct SparseSignal {
  Eigen::VectorXi q;  // 0/1 activity
  Eigen::VectorXd r;  // amplitudes
  Eigen::VectorXd s;  // composed signal, unit norm: s_j = q_j * r_j, then s /= ||s||
};

struct MeasurementSet {
  Eigen::MatrixXd a_mat;  // known sensing matrix, m x N
  Eigen::MatrixXd e_mat;  // perturbation, m x N; ground truth only, never shown to recovery
  Eigen::VectorXd noise;  // additive noise, length N
  Eigen::VectorXd x;      // pre-sign values (A+E)^T s + n
  Eigen::VectorXd y;      // signs, entries in {-1, +1}
};

// sign with the zero tie broken upward so the output is total.
inline double sign_quantize(double x) {
  if (!std::isfinite(x)) throw std::invalid_argument("sign_quantize: non-finite input");
  return x >= 0.0 ? 1.0 : -1.0;
}

// Equivalent-noise std of z = E^T s + n: sqrt(||s||^2 sigma_e^2 + sigma_n^2).
inline double equivalent_noise_std(double s_norm_sq, double sigma_e_sq, double sigma_n_sq) {
  if (s_norm_sq < 0.0 || sigma_e_sq < 0.0 || sigma_n_sq <= 0.0)
    throw std::invalid_argument("equivalent_noise_std: invalid arguments");
  return std::sqrt(s_norm_sq * sigma_e_sq + sigma_n_sq);
}

// Draws q_j ~ Bernoulli(p), active amplitudes ~ N(0, sigma_r^2), composes
// s = q .* r and normalizes to unit norm. An all-inactive draw (probability
// (1-p)^m) leaves the normalization undefined and is resampled.
inline SparseSignal sample_sparse_signal(const ModelParams& params, Rng& rng) {
  params.validate();
  SparseSignal sig;
  sig.q.resize(params.m);
  sig.r.resize(params.m);
  while (true) {
    int active = 0;
    for (int j = 0; j < params.m; ++j) {
      sig.q(j) = rng.bernoulli(params.p) ? 1 : 0;
      sig.r(j) = rng.gaussian(0.0, params.sigma_r);
      active += sig.q(j);
    }
    if (active > 0) break;
    std::clog << "sample_sparse_signal: all-inactive draw rejected, resampling\n";
  }
  sig.s = sig.r.cwiseProduct(sig.q.cast<double>());
  sig.s /= sig.s.norm();
  return sig;
}

// A_ij ~ N(0,1), E_ij ~ N(0, sigma_e^2), n_i ~ N(0, sigma_n^2),
// x = (A+E)^T s + n, y = sign(x).
inline MeasurementSet generate_measurements(const SparseSignal& signal, const ModelParams& params,
                                            Rng& rng) {
  params.validate();
  if (signal.s.size() != params.m)
    throw std::invalid_argument("generate_measurements: signal length mismatch");
  MeasurementSet meas;
  meas.a_mat.resize(params.m, params.n_meas);
  meas.e_mat.resize(params.m, params.n_meas);
  meas.noise.resize(params.n_meas);
  for (int i = 0; i < params.n_meas; ++i)
    for (int j = 0; j < params.m; ++j) meas.a_mat(j, i) = rng.gaussian();
  for (int i = 0; i < params.n_meas; ++i)
    for (int j = 0; j < params.m; ++j) meas.e_mat(j, i) = rng.gaussian(0.0, params.sigma_e);
  for (int i = 0; i < params.n_meas; ++i) meas.noise(i) = rng.gaussian(0.0, params.sigma_n);

  meas.x = (meas.a_mat + meas.e_mat).transpose() * signal.s + meas.noise;
  meas.y.resize(params.n_meas);
  for (int i = 0; i < params.n_meas; ++i) meas.y(i) = sign_quantize(meas.x(i));
  return meas;
}

}  // namespace onebit
