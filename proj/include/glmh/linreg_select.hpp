#pragma once

// Spike-and-slab Gaussian linear regression with unit noise variance:
//
//   y = X_I b_I + e,  e ~ N(0, I),  b_I | I ~ N(mu_I, Omega_I),  I_j ~ Bern(pi_j)
//
// The coefficients integrate out in closed form, so the indicators are
// Gibbs-sampled from their marginal posterior and b_I is drawn afterwards.
// Both the beta and the rho blocks of the sampler reduce to this problem
// once the data are pre-whitened.

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "glmh/model.hpp"

namespace glmh {

struct GaussianRegressionProblem {
  VectorXd response;         // n
  MatrixXd design;           // n x m
  VectorXd prior_mean;       // m
  VectorXd prior_cov_diag;   // m, diagonal of Omega
  VectorXd inclusion_prior;  // m, ignored for forced-in columns
  Indicators forced_in;      // m

  Index size() const { return design.cols(); }

  void validate() const {
    const Index m = design.cols();
    if (response.size() != design.rows()) throw InputError("response length does not match design rows");
    if (prior_mean.size() != m || prior_cov_diag.size() != m || inclusion_prior.size() != m ||
        forced_in.size() != m) {
      throw InputError("prior vectors must have one entry per design column");
    }
    for (Index j = 0; j < m; ++j) {
      if (!(prior_cov_diag(j) > 0.0)) throw InputError("prior variances must be positive");
      if (!forced_in(j) && !(inclusion_prior(j) >= 0.0 && inclusion_prior(j) <= 1.0)) {
        throw InputError("inclusion probabilities must lie in [0, 1]");
      }
    }
  }
};

enum class ScanOrder { ascending, randomized };

inline std::string describe(const Indicators& ind) {
  std::ostringstream os;
  os << '{';
  bool first = true;
  for (Index j = 0; j < ind.size(); ++j) {
    if (!ind(j)) continue;
    os << (first ? "" : ",") << j;
    first = false;
  }
  os << '}';
  return os.str();
}

// Cross-products of a problem, reused across the many indicator sets visited
// by one Gibbs scan. Badly conditioned sets (extreme row weights from the
// variance model) fall back to a QR of the stacked system, which never forms
// the cross-product.
class IndicatorPosterior {
 public:
  explicit IndicatorPosterior(const GaussianRegressionProblem& problem)
      : design_(problem.design),
        response_(problem.response),
        xtx_(problem.design.transpose() * problem.design),
        xty_(problem.design.transpose() * problem.response),
        yty_(problem.response.squaredNorm()),
        n_(problem.response.size()),
        mean_(problem.prior_mean),
        precision_(problem.prior_cov_diag.cwiseInverse()),
        log_var_(problem.prior_cov_diag.array().log().matrix()),
        inclusion_(problem.inclusion_prior),
        forced_(problem.forced_in) {}

  Index size() const { return xtx_.cols(); }
  const Indicators& forced_in() const { return forced_; }

  // log p(y | I) + log p(I), exact including the Gaussian normalizer.
  double log_marginal(const Indicators& ind) const {
    const double log_prior = log_indicator_prior(ind);
    if (log_prior == -std::numeric_limits<double>::infinity()) return log_prior;
    const auto idx = selected_indices(ind);
    const double base = -0.5 * static_cast<double>(n_) * std::log(2.0 * M_PI);
    if (idx.empty()) return base - 0.5 * yty_ + log_prior;
    const Factor f = factor(idx, ind);
    return base - 0.5 * f.log_det_omega - 0.5 * f.log_det_a - 0.5 * f.resid2 + log_prior;
  }

  // One draw of the full m-vector given the indicators.
  VectorXd draw(const Indicators& ind, Random& rng) const {
    const auto idx = selected_indices(ind);
    if (idx.empty()) return VectorXd::Zero(size());
    const Factor f = factor(idx, ind);
    VectorXd z(static_cast<Index>(idx.size()));
    for (Index i = 0; i < z.size(); ++i) z(i) = rng.gaussian();
    const VectorXd sel = f.r.triangularView<Eigen::Upper>().solve(f.w + z);
    return scatter(sel, idx, size());
  }

  VectorXd posterior_mean(const Indicators& ind) const {
    const auto idx = selected_indices(ind);
    if (idx.empty()) return VectorXd::Zero(size());
    const Factor f = factor(idx, ind);
    return scatter(f.r.triangularView<Eigen::Upper>().solve(f.w), idx, size());
  }

 private:
  // A = R'R with A the posterior precision; w = R^-T b, so the posterior mean
  // is R^-1 w; resid2 = y'y + mu'Omega^-1 mu - w'w.
  struct Factor {
    MatrixXd r;
    VectorXd w;
    double resid2 = 0.0;
    double log_det_a = 0.0;
    double log_det_omega = 0.0;
  };

  static constexpr double max_pivot_ratio = 1e5;

  double log_indicator_prior(const Indicators& ind) const {
    double lp = 0.0;
    for (Index j = 0; j < ind.size(); ++j) {
      if (forced_(j)) continue;
      const double pj = inclusion_(j);
      lp += ind(j) ? std::log(pj) : std::log1p(-pj);
    }
    return lp;
  }

  Factor factor(const std::vector<Index>& idx, const Indicators& ind) const {
    const auto m = static_cast<Index>(idx.size());
    Factor f;
    MatrixXd a(m, m);
    VectorXd b(m);
    double prior_quad = 0.0;
    for (Index i = 0; i < m; ++i) {
      const Index ci = idx[static_cast<std::size_t>(i)];
      for (Index j = 0; j <= i; ++j) {
        const double v = xtx_(ci, idx[static_cast<std::size_t>(j)]);
        a(i, j) = v;
        a(j, i) = v;
      }
      a(i, i) += precision_(ci);
      b(i) = xty_(ci) + precision_(ci) * mean_(ci);
      prior_quad += precision_(ci) * mean_(ci) * mean_(ci);
      f.log_det_omega += log_var_(ci);
    }

    Eigen::LLT<MatrixXd> llt(a);
    if (llt.info() == Eigen::Success) {
      const auto d = llt.matrixLLT().diagonal();
      if (d.maxCoeff() <= max_pivot_ratio * d.minCoeff()) {
        f.r = llt.matrixU();
        f.w = llt.matrixL().solve(b);
        f.resid2 = yty_ + prior_quad - f.w.squaredNorm();
        f.log_det_a = 2.0 * d.array().log().sum();
        return f;
      }
    }

    // [X_I; Omega_I^-1/2] b = [y; Omega_I^-1/2 mu_I] by Householder QR.
    MatrixXd stacked = MatrixXd::Zero(n_ + m, m);
    VectorXd rhs(n_ + m);
    rhs.head(n_) = response_;
    for (Index i = 0; i < m; ++i) {
      const Index ci = idx[static_cast<std::size_t>(i)];
      stacked.col(i).head(n_) = design_.col(ci);
      const double s = std::sqrt(precision_(ci));
      stacked(n_ + i, i) = s;
      rhs(n_ + i) = s * mean_(ci);
    }
    const Eigen::HouseholderQR<MatrixXd> qr(stacked);
    const VectorXd qtr = qr.householderQ().transpose() * rhs;
    f.r = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
    f.w = qtr.head(m);
    f.resid2 = qtr.tail(n_).squaredNorm();
    const VectorXd diag = f.r.diagonal().cwiseAbs();
    if (!(diag.minCoeff() > 0.0) || !diag.allFinite()) {
      throw NumericalError("posterior precision not positive definite for indicator set " + describe(ind));
    }
    f.log_det_a = 2.0 * diag.array().log().sum();
    return f;
  }

  MatrixXd design_;
  VectorXd response_;
  MatrixXd xtx_;
  VectorXd xty_;
  double yty_;
  Index n_;
  VectorXd mean_;
  VectorXd precision_;
  VectorXd log_var_;
  VectorXd inclusion_;
  Indicators forced_;
};

inline void check_indicators(const GaussianRegressionProblem& problem, const Indicators& ind) {
  if (ind.size() != problem.size()) throw InputError("indicator vector length does not match the design");
  for (Index j = 0; j < ind.size(); ++j) {
    if (problem.forced_in(j) && !ind(j)) {
      throw InputError("forced-in column " + std::to_string(j) + " is not selected");
    }
  }
}

inline double log_marginal_indicators(const GaussianRegressionProblem& problem, const Indicators& ind) {
  check_indicators(problem, ind);
  return IndicatorPosterior(problem).log_marginal(ind);
}

inline VectorXd draw_coefficients(const GaussianRegressionProblem& problem, const Indicators& ind, Random& rng) {
  check_indicators(problem, ind);
  return IndicatorPosterior(problem).draw(ind, rng);
}

// Probability of I_j = 1 from the two log weights.
inline double inclusion_probability(double log_on, double log_off) {
  constexpr double ninf = -std::numeric_limits<double>::infinity();
  if (log_on == ninf) return 0.0;
  if (log_off == ninf) return 1.0;
  return 1.0 / (1.0 + std::exp(log_off - log_on));
}

// One sweep over the non-forced indicators, each drawn from its full
// conditional p(I_j | y, I_-j).
inline Indicators gibbs_scan(const IndicatorPosterior& post, Indicators ind, Random& rng,
                             ScanOrder order = ScanOrder::ascending) {
  std::vector<Index> visit;
  for (Index j = 0; j < ind.size(); ++j) {
    if (!post.forced_in()(j)) visit.push_back(j);
  }
  if (order == ScanOrder::randomized) {
    for (std::size_t i = visit.size(); i > 1; --i) std::swap(visit[i - 1], visit[rng.uniform_index(i)]);
  }
  if (visit.empty()) return ind;
  double current = post.log_marginal(ind);
  for (Index j : visit) {
    const bool was = ind(j);
    ind(j) = !was;
    const double flipped = post.log_marginal(ind);
    const double p_on = was ? inclusion_probability(current, flipped) : inclusion_probability(flipped, current);
    const bool now = rng.uniform() < p_on;
    ind(j) = now;
    if (now != was) current = flipped;
  }
  return ind;
}

inline Indicators gibbs_scan(const GaussianRegressionProblem& problem, const Indicators& state_ind, Random& rng,
                             ScanOrder order = ScanOrder::ascending) {
  check_indicators(problem, state_ind);
  return gibbs_scan(IndicatorPosterior(problem), state_ind, rng, order);
}

}  // namespace glmh
