#pragma once

// Reference computations used only by the tests. Each one takes a different
// route from the library code it checks: dense multivariate normal densities
// instead of the Cholesky-updated marginal, brute-force enumeration instead
// of Gibbs scans, grids and finite differences instead of closed forms.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <vector>

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// log N(y; m, S) via a full LU log-determinant and inverse.
inline double mvn_logpdf(const VectorXd& y, const VectorXd& m, const MatrixXd& s) {
  const Eigen::FullPivLU<MatrixXd> lu(s);
  const double logdet = std::log(std::abs(lu.determinant()));
  const VectorXd r = y - m;
  return -0.5 * (static_cast<double>(y.size()) * std::log(2.0 * M_PI) + logdet + r.dot(lu.solve(r)));
}

// log p(y | I) for y = X_I b + e, b ~ N(mu_I, diag(v_I)), e ~ N(0, I),
// integrated analytically as y ~ N(X_I mu_I, I + X_I V_I X_I').
inline double regression_log_evidence(const VectorXd& y, const MatrixXd& x, const VectorXd& mu, const VectorXd& v,
                                      const std::vector<bool>& ind) {
  const auto n = y.size();
  VectorXd mean = VectorXd::Zero(n);
  MatrixXd cov = MatrixXd::Identity(n, n);
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (!ind[static_cast<std::size_t>(j)]) continue;
    mean += mu(j) * x.col(j);
    cov += v(j) * x.col(j) * x.col(j).transpose();
  }
  return mvn_logpdf(y, mean, cov);
}

// Every 0/1 vector of length m with forced entries held at 1.
inline std::vector<std::vector<bool>> all_indicator_sets(std::size_t m, const std::vector<bool>& forced) {
  std::vector<std::vector<bool>> out;
  for (std::size_t mask = 0; mask < (std::size_t{1} << m); ++mask) {
    std::vector<bool> ind(m);
    bool valid = true;
    for (std::size_t j = 0; j < m; ++j) {
      ind[j] = (mask >> j) & 1U;
      if (forced[j] && !ind[j]) valid = false;
    }
    if (valid) out.push_back(ind);
  }
  return out;
}

// Normalizes log weights.
inline std::vector<double> softmax(const std::vector<double>& logw) {
  const double mx = *std::max_element(logw.begin(), logw.end());
  std::vector<double> w(logw.size());
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += (w[i] = std::exp(logw[i] - mx));
  for (auto& v : w) v /= s;
  return w;
}

inline double total_variation(const std::vector<double>& a, const std::vector<double>& b) {
  double tv = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) tv += std::abs(a[i] - b[i]);
  return 0.5 * tv;
}

// Central differences.
inline VectorXd fd_gradient(const std::function<double(const VectorXd&)>& f, const VectorXd& x, double h) {
  VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    VectorXd a = x, b = x;
    a(i) += h;
    b(i) -= h;
    g(i) = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

inline MatrixXd fd_hessian(const std::function<double(const VectorXd&)>& f, const VectorXd& x, double h) {
  const auto n = x.size();
  MatrixXd hm(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      VectorXd pp = x, pm = x, mp = x, mm = x;
      pp(i) += h; pp(j) += h;
      pm(i) += h; pm(j) -= h;
      mp(i) -= h; mp(j) += h;
      mm(i) -= h; mm(j) -= h;
      hm(i, j) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h * h);
    }
  }
  return hm;
}

// log density of a multivariate t with location m, scale matrix S, df nu.
inline double mvt_logpdf(const VectorXd& x, const VectorXd& m, const MatrixXd& s, double nu) {
  const double d = static_cast<double>(x.size());
  const Eigen::FullPivLU<MatrixXd> lu(s);
  const VectorXd r = x - m;
  const double q = r.dot(lu.solve(r));
  return std::lgamma(0.5 * (nu + d)) - std::lgamma(0.5 * nu) - 0.5 * d * std::log(nu * M_PI) -
         0.5 * std::log(std::abs(lu.determinant())) - 0.5 * (nu + d) * std::log1p(q / nu);
}

// AUC as the probability that a random positive outscores a random
// negative, ties counting one half. Quadratic, on purpose.
inline double mann_whitney_auc(const std::vector<double>& scores, const std::vector<bool>& truth) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!truth[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (truth[j]) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

// Ljung-Box Q over lags 1..h.
inline double ljung_box(const VectorXd& x, int h) {
  const auto n = static_cast<double>(x.size());
  const double m = x.mean();
  const VectorXd c = x.array() - m;
  const double c0 = c.squaredNorm();
  double q = 0.0;
  for (int k = 1; k <= h; ++k) {
    double ck = 0.0;
    for (Eigen::Index t = k; t < x.size(); ++t) ck += c(t) * c(t - k);
    const double r = ck / c0;
    q += r * r / (n - k);
  }
  return n * (n + 2.0) * q;
}

// Composite Simpson on [a, b] with n (even) intervals.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

// Analytic integrated autocorrelation time of an AR(1) process.
inline double ar1_iact(double phi) { return (1.0 + phi) / (1.0 - phi); }

}  // namespace oracle
