#pragma once

// Weighted least squares baseline with one variance weight per volume shared
// by all voxels: OLS residuals are pooled across voxels into a per-time-point
// variance, whose reciprocal (normalized to mean 1) weights a per-voxel WLS
// fit.

#include <cmath>
#include <string>

#include "glmh/model.hpp"

namespace glmh {

struct WlsResult {
  VectorXd beta_hat;
  VectorXd se;
  VectorXd t;
  double sigma2 = 0.0;
};

inline constexpr double wls_variance_floor = 1e-8;

inline WlsResult wls_fit(const VectorXd& y, const MatrixXd& design, const VectorXd& weights) {
  const Index T = design.rows(), p = design.cols();
  if (y.size() != T || weights.size() != T) throw InputError("y, design and weights must have matching rows");
  if (T <= p) throw InputError("WLS needs more time points than regressors");
  for (Index t = 0; t < T; ++t) {
    if (!(weights(t) > 0.0)) throw InputError("WLS weights must be positive");
  }
  const VectorXd sw = weights.cwiseSqrt();
  const MatrixXd xw = sw.asDiagonal() * design;
  const VectorXd yw = sw.cwiseProduct(y);
  Eigen::ColPivHouseholderQR<MatrixXd> qr(xw);
  if (qr.rank() < p) throw NumericalError("WLS design is rank deficient (rank " + std::to_string(qr.rank()) + ")");

  WlsResult r;
  r.beta_hat = qr.solve(yw);
  const VectorXd resid = yw - xw * r.beta_hat;
  r.sigma2 = resid.squaredNorm() / static_cast<double>(T - p);
  const MatrixXd xtwx = xw.transpose() * xw;
  const MatrixXd cov = r.sigma2 * xtwx.ldlt().solve(MatrixXd::Identity(p, p));
  r.se = cov.diagonal().cwiseSqrt();
  r.t = r.beta_hat.cwiseQuotient(r.se);
  return r;
}

inline WlsResult ols_fit(const VectorXd& y, const MatrixXd& design) {
  return wls_fit(y, design, VectorXd::Ones(design.rows()));
}

// data: T x V. Each iteration refits every voxel with the current weights
// and re-pools the squared residuals.
inline VectorXd estimate_volume_weights(const MatrixXd& data, const MatrixXd& design, int iterations = 1) {
  const Index T = data.rows();
  if (design.rows() != T) throw InputError("design rows do not match the number of time points");
  if (iterations < 1) throw InputError("weight estimation needs at least one iteration");
  VectorXd weights = VectorXd::Ones(T);
  for (int it = 0; it < iterations; ++it) {
    const VectorXd sw = weights.cwiseSqrt();
    const MatrixXd xw = sw.asDiagonal() * design;
    Eigen::ColPivHouseholderQR<MatrixXd> qr(xw);
    if (qr.rank() < design.cols()) throw NumericalError("weight-estimation design is rank deficient");
    const MatrixXd yw = sw.asDiagonal() * data;
    const MatrixXd resid = data - design * qr.solve(yw);
    VectorXd var = resid.rowwise().squaredNorm() / static_cast<double>(data.cols());
    var = var.cwiseMax(wls_variance_floor);
    weights = var.cwiseInverse();
    weights /= weights.mean();
  }
  return weights;
}

inline VectorXd estimate_volume_weights(const Dataset& data, const MatrixXd& design_no_motion, int iterations = 1) {
  return estimate_volume_weights(data.values, design_no_motion, iterations);
}

}  // namespace glmh
