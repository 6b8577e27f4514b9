#pragma once

// Pre-whitening transforms that turn the beta and rho updates into unit
// noise variance regressions. Rows are t = k..T-1 (0-based): the first k
// observations are conditioned on rather than modelled.

#include <cmath>
#include <string>

#include "glmh/model.hpp"

namespace glmh {

inline constexpr double max_log_variance = 700.0;

struct WhitenedProblem {
  VectorXd response;  // T - k
  MatrixXd design;    // (T - k) x m
  double log_jacobian = 0.0;
};

// z_t'gamma for rows first_row.., rejecting values outside double range.
inline VectorXd log_variance(const MatrixXd& Z, const VectorXd& gamma, Index first_row = 0) {
  const VectorXd eta = Z.bottomRows(Z.rows() - first_row) * gamma;
  for (Index i = 0; i < eta.size(); ++i) {
    if (!(std::abs(eta(i)) <= max_log_variance)) {
      throw OverflowError("log variance z'gamma = " + std::to_string(eta(i)) + " out of range at t = " +
                              std::to_string(i + first_row),
                          i + first_row);
    }
  }
  return eta;
}

// rho(L) v_t = v_t - sum_j rho_j v_{t-j} for t = k..T-1.
inline MatrixXd apply_lag_polynomial(const MatrixXd& v, const VectorXd& rho) {
  const Index k = rho.size();
  const Index n = v.rows() - k;
  MatrixXd out = v.bottomRows(n);
  for (Index j = 1; j <= k; ++j) {
    if (rho(j - 1) != 0.0) out.noalias() -= rho(j - 1) * v.middleRows(k - j, n);
  }
  return out;
}

inline VectorXd apply_lag_polynomial(const VectorXd& v, const VectorXd& rho) {
  const Index k = rho.size();
  const Index n = v.size() - k;
  VectorXd out = v.tail(n);
  for (Index j = 1; j <= k; ++j) {
    if (rho(j - 1) != 0.0) out.noalias() -= rho(j - 1) * v.segment(k - j, n);
  }
  return out;
}

// y~_t = exp(-z_t'gamma/2) rho(L) y_t and likewise for the rows of X.
inline WhitenedProblem whiten_for_beta(const VectorXd& y, const MatrixXd& X, const MatrixXd& Z,
                                       const VectorXd& gamma, const VectorXd& rho) {
  const Index T = y.size();
  const Index k = rho.size();
  if (X.rows() != T || Z.rows() != T) throw InputError("y, X and Z must have the same number of rows");
  if (Z.cols() != gamma.size()) throw InputError("gamma length does not match Z");
  if (k >= T) throw InputError("AR order must be smaller than the series length");
  if (!check_stationary(rho)) throw InputError("rho is not stationary");

  const VectorXd eta = log_variance(Z, gamma, k);
  const VectorXd scale = (-0.5 * eta.array()).exp();
  WhitenedProblem out;
  out.response = scale.asDiagonal() * apply_lag_polynomial(y, rho);
  out.design = scale.asDiagonal() * apply_lag_polynomial(X, rho);
  out.log_jacobian = 0.5 * eta.sum();
  return out;
}

// u~_t = exp(-z_t'gamma/2) u_t regressed on the scaled lags (u_{t-1}..u_{t-k}).
inline WhitenedProblem whiten_for_rho(const VectorXd& u, const MatrixXd& Z, const VectorXd& gamma, Index k) {
  const Index T = u.size();
  if (Z.rows() != T) throw InputError("u and Z must have the same number of rows");
  if (Z.cols() != gamma.size()) throw InputError("gamma length does not match Z");
  if (k < 0 || k >= T) throw InputError("AR order must satisfy 0 <= k < T");

  const VectorXd eta = log_variance(Z, gamma, k);
  const VectorXd scale = (-0.5 * eta.array()).exp();
  const Index n = T - k;
  WhitenedProblem out;
  out.response = scale.cwiseProduct(u.tail(n));
  out.design.resize(n, k);
  for (Index j = 1; j <= k; ++j) out.design.col(j - 1) = scale.cwiseProduct(u.segment(k - j, n));
  out.log_jacobian = 0.5 * eta.sum();
  return out;
}

}  // namespace glmh
