#pragma once

// Joint Metropolis-Hastings update of the log-variance coefficients and
// their selection indicators. Given beta and rho, the whitened residuals
// e_t = rho(L) u_t are independent N(0, exp(z_t'gamma)), so
//
//   log p(gamma | .) = sum_t [ -z_t'gamma/2 - e_t^2 exp(-z_t'gamma)/2 ] + log prior.
//
// Proposals flip a random subset of indicators, then take a few Newton
// steps from the current gamma toward the conditional mode and draw from a
// multivariate-t centred at the terminal point with the inverse negative
// Hessian as scale.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "glmh/model.hpp"
#include "glmh/prewhiten.hpp"

namespace glmh {

struct GammaTuning {
  int newton_steps = 2;
  double proposal_df = 10.0;
  bool use_expected_hessian = true;
  int flip_subset_size = 1;
  int max_step_halvings = 5;
};

class GammaPosteriorContext {
 public:
  GammaPosteriorContext(MatrixXd z_rows, VectorXd prior_mean, VectorXd prior_cov_diag, VectorXd inclusion_prior,
                        Indicators forced_in, GammaTuning tuning = {})
      : tuning(tuning),
        z_(std::move(z_rows)),
        ztz_(z_.transpose() * z_),
        mean_(std::move(prior_mean)),
        var_(std::move(prior_cov_diag)),
        inclusion_(std::move(inclusion_prior)),
        forced_(std::move(forced_in)) {
    const Index q = z_.cols();
    if (mean_.size() != q || var_.size() != q || inclusion_.size() != q || forced_.size() != q) {
      throw InputError("gamma prior vectors must have one entry per variance covariate");
    }
    for (Index j = 0; j < q; ++j) {
      if (!(var_(j) > 0.0)) throw InputError("gamma prior variances must be positive");
    }
  }

  void set_residuals(const VectorXd& e) {
    if (e.size() != z_.rows()) throw InputError("residual length does not match the variance design");
    for (Index t = 0; t < e.size(); ++t) {
      if (!std::isfinite(e(t))) throw InputError("non-finite residual at row " + std::to_string(t));
    }
    residuals_ = e;
    sq_residuals_ = e.array().square();
  }

  void set_inclusion_prior(const VectorXd& pi) {
    if (pi.size() != inclusion_.size()) throw InputError("inclusion prior length does not match q");
    inclusion_ = pi;
  }

  Index q() const { return z_.cols(); }
  Index n_rows() const { return z_.rows(); }
  const MatrixXd& z_rows() const { return z_; }
  const MatrixXd& ztz() const { return ztz_; }
  const VectorXd& residuals() const { return residuals_; }
  const VectorXd& squared_residuals() const { return sq_residuals_; }
  const VectorXd& prior_mean() const { return mean_; }
  const VectorXd& prior_cov_diag() const { return var_; }
  const VectorXd& inclusion_prior() const { return inclusion_; }
  const Indicators& forced_in() const { return forced_; }

  GammaTuning tuning;

 private:
  MatrixXd z_;
  MatrixXd ztz_;
  VectorXd mean_;
  VectorXd var_;
  VectorXd inclusion_;
  Indicators forced_;
  VectorXd residuals_;
  VectorXd sq_residuals_;
};

namespace detail {

inline VectorXd linear_predictor(const GammaPosteriorContext& ctx, const std::vector<Index>& idx,
                                 const VectorXd& gamma_sel) {
  VectorXd eta = VectorXd::Zero(ctx.n_rows());
  for (std::size_t i = 0; i < idx.size(); ++i) eta.noalias() += gamma_sel(static_cast<Index>(i)) * ctx.z_rows().col(idx[i]);
  return eta;
}

inline std::optional<Index> out_of_range(const VectorXd& eta) {
  for (Index t = 0; t < eta.size(); ++t) {
    if (!(std::abs(eta(t)) <= max_log_variance)) return t;
  }
  return std::nullopt;
}

inline double log_indicator_prior(const GammaPosteriorContext& ctx, const Indicators& ind) {
  double lp = 0.0;
  for (Index j = 0; j < ind.size(); ++j) {
    if (ctx.forced_in()(j)) continue;
    lp += ind(j) ? std::log(ctx.inclusion_prior()(j)) : std::log1p(-ctx.inclusion_prior()(j));
  }
  return lp;
}

// Log posterior, or -inf when exp(z'gamma) would overflow.
inline double log_posterior_or_ninf(const GammaPosteriorContext& ctx, const std::vector<Index>& idx,
                                    const Indicators& ind, const VectorXd& gamma_sel) {
  const VectorXd eta = linear_predictor(ctx, idx, gamma_sel);
  if (out_of_range(eta)) return -std::numeric_limits<double>::infinity();
  double lp = -0.5 * (eta.array() + ctx.squared_residuals().array() * (-eta.array()).exp()).sum();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const Index j = idx[i];
    const double d = gamma_sel(static_cast<Index>(i)) - ctx.prior_mean()(j);
    lp += -0.5 * std::log(2.0 * M_PI * ctx.prior_cov_diag()(j)) - 0.5 * d * d / ctx.prior_cov_diag()(j);
  }
  return lp + log_indicator_prior(ctx, ind);
}

inline void check_gamma_args(const GammaPosteriorContext& ctx, const VectorXd& gamma_sel, const Indicators& ind) {
  if (ind.size() != ctx.q()) throw InputError("indicator length does not match q");
  if (gamma_sel.size() != ind.count()) throw InputError("gamma_sel length does not match the selected set");
  if (ctx.residuals().size() != ctx.n_rows()) throw InputError("residuals not set");
  for (Index j = 0; j < ind.size(); ++j) {
    if (ctx.forced_in()(j) && !ind(j)) throw InputError("forced-in variance covariate " + std::to_string(j) + " not selected");
  }
}

}  // namespace detail

// Full conditional log density of (gamma_I, I), gamma_sel holding the
// selected entries in ascending column order.
inline double log_posterior_gamma(const GammaPosteriorContext& ctx, const VectorXd& gamma_sel, const Indicators& ind) {
  detail::check_gamma_args(ctx, gamma_sel, ind);
  const auto idx = selected_indices(ind);
  const VectorXd eta = detail::linear_predictor(ctx, idx, gamma_sel);
  if (auto t = detail::out_of_range(eta)) {
    throw OverflowError("log variance out of range at row " + std::to_string(*t), *t);
  }
  return detail::log_posterior_or_ninf(ctx, idx, ind, gamma_sel);
}

struct GammaDerivatives {
  VectorXd gradient;
  MatrixXd hessian;
  MatrixXd expected_hessian;
};

inline GammaDerivatives grad_hess_gamma(const GammaPosteriorContext& ctx, const VectorXd& gamma_sel,
                                        const Indicators& ind, bool observed = true) {
  detail::check_gamma_args(ctx, gamma_sel, ind);
  const auto idx = selected_indices(ind);
  const auto m = static_cast<Index>(idx.size());
  const VectorXd eta = detail::linear_predictor(ctx, idx, gamma_sel);
  if (auto t = detail::out_of_range(eta)) {
    throw OverflowError("log variance out of range at row " + std::to_string(*t), *t);
  }
  const VectorXd w = ctx.squared_residuals().array() * (-eta.array()).exp();

  GammaDerivatives d;
  d.gradient.resize(m);
  d.expected_hessian.resize(m, m);
  if (observed) d.hessian.resize(m, m);
  for (Index a = 0; a < m; ++a) {
    const Index ja = idx[static_cast<std::size_t>(a)];
    const auto za = ctx.z_rows().col(ja);
    const double prec = 1.0 / ctx.prior_cov_diag()(ja);
    d.gradient(a) = 0.5 * za.dot((w.array() - 1.0).matrix()) - prec * (gamma_sel(a) - ctx.prior_mean()(ja));
    for (Index b = 0; b <= a; ++b) {
      const Index jb = idx[static_cast<std::size_t>(b)];
      const double e = -0.5 * ctx.ztz()(ja, jb);
      d.expected_hessian(a, b) = e;
      d.expected_hessian(b, a) = e;
      if (observed) {
        const double h = -0.5 * (za.array() * w.array() * ctx.z_rows().col(jb).array()).sum();
        d.hessian(a, b) = h;
        d.hessian(b, a) = h;
      }
    }
    d.expected_hessian(a, a) -= prec;
    if (observed) d.hessian(a, a) -= prec;
  }
  return d;
}

// Multivariate-t on the selected coordinates, parameterized by its precision
// (the negative Hessian at the terminal Newton point).
struct TailoredProposal {
  std::vector<Index> idx;
  VectorXd mean;
  MatrixXd precision;
  Eigen::LLT<MatrixXd> chol;
  double df = 10.0;
  bool ok = false;

  double log_density(const VectorXd& x_sel) const {
    const auto d = static_cast<double>(mean.size());
    if (mean.size() == 0) return 0.0;
    const VectorXd diff = x_sel - mean;
    const double quad = (chol.matrixU() * diff).squaredNorm();
    const double log_det = 2.0 * chol.matrixLLT().diagonal().array().log().sum();
    return std::lgamma(0.5 * (df + d)) - std::lgamma(0.5 * df) - 0.5 * d * std::log(df * M_PI) + 0.5 * log_det -
           0.5 * (df + d) * std::log1p(quad / df);
  }

  VectorXd sample(Random& rng) const {
    VectorXd z(mean.size());
    for (Index i = 0; i < z.size(); ++i) z(i) = rng.gaussian();
    const double scale = std::sqrt(df / rng.chi_square(df));
    return mean + scale * chol.matrixU().solve(z);
  }
};

namespace detail {

inline bool negative_hessian_factor(const GammaPosteriorContext& ctx, const VectorXd& x, const Indicators& ind,
                                    MatrixXd& precision, Eigen::LLT<MatrixXd>& chol) {
  const bool observed = !ctx.tuning.use_expected_hessian;
  GammaDerivatives d = grad_hess_gamma(ctx, x, ind, observed);
  precision = observed ? MatrixXd(-d.hessian) : MatrixXd(-d.expected_hessian);
  chol.compute(precision);
  if (chol.info() == Eigen::Success) return true;
  if (!observed) return false;
  precision = -d.expected_hessian;
  chol.compute(precision);
  return chol.info() == Eigen::Success;
}

}  // namespace detail

// Damped Newton tailoring from start_sel (entries on the selected set of
// ind). Deterministic, so the reverse density of a move is reproducible.
inline TailoredProposal tailor_proposal(const GammaPosteriorContext& ctx, const VectorXd& start_sel,
                                        const Indicators& ind) {
  TailoredProposal prop;
  prop.idx = selected_indices(ind);
  prop.df = ctx.tuning.proposal_df;
  VectorXd x = start_sel;
  if (x.size() == 0) {
    prop.mean = x;
    prop.ok = true;
    return prop;
  }
  double f = detail::log_posterior_or_ninf(ctx, prop.idx, ind, x);
  if (!std::isfinite(f)) return prop;

  for (int step = 0; step < ctx.tuning.newton_steps; ++step) {
    const bool observed = !ctx.tuning.use_expected_hessian;
    const GammaDerivatives d = grad_hess_gamma(ctx, x, ind, observed);
    MatrixXd neg_h = observed ? MatrixXd(-d.hessian) : MatrixXd(-d.expected_hessian);
    Eigen::LLT<MatrixXd> llt(neg_h);
    if (llt.info() != Eigen::Success && observed) llt.compute(-d.expected_hessian);
    if (llt.info() != Eigen::Success) return prop;
    VectorXd delta = llt.solve(d.gradient);
    bool moved = false;
    for (int h = 0; h <= ctx.tuning.max_step_halvings; ++h) {
      const VectorXd trial = x + delta;
      const double ft = detail::log_posterior_or_ninf(ctx, prop.idx, ind, trial);
      if (ft >= f) {
        x = trial;
        f = ft;
        moved = true;
        break;
      }
      delta *= 0.5;
    }
    if (!moved) break;
  }

  prop.mean = x;
  if (!detail::negative_hessian_factor(ctx, x, ind, prop.precision, prop.chol)) return prop;
  prop.ok = true;
  return prop;
}

struct GammaProposal {
  VectorXd gamma;  // q, zeros off the proposed indicators
  Indicators ind;
  double log_proposal_forward = 0.0;
  double log_proposal_reverse = 0.0;
  bool ok = false;
};

// Flips a uniformly chosen subset of the non-forced indicators.
inline Indicators flip_indicators(const Indicators& ind, const Indicators& forced, int subset_size, Random& rng) {
  std::vector<Index> free;
  for (Index j = 0; j < ind.size(); ++j) {
    if (!forced(j)) free.push_back(j);
  }
  Indicators out = ind;
  const auto n = std::min<std::size_t>(free.size(), static_cast<std::size_t>(std::max(subset_size, 0)));
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t pick = i + rng.uniform_index(free.size() - i);
    std::swap(free[i], free[pick]);
    out(free[i]) = !out(free[i]);
  }
  return out;
}

inline GammaProposal propose_gamma(const GammaPosteriorContext& ctx, const VectorXd& current_gamma,
                                   const Indicators& current_ind, Random& rng,
                                   std::optional<int> flip_subset_size = std::nullopt) {
  GammaProposal out;
  out.ind = flip_indicators(current_ind, ctx.forced_in(), flip_subset_size.value_or(ctx.tuning.flip_subset_size), rng);
  const auto new_idx = selected_indices(out.ind);
  const auto cur_idx = selected_indices(current_ind);

  const TailoredProposal forward = tailor_proposal(ctx, gather(current_gamma, new_idx), out.ind);
  if (!forward.ok) return out;
  const VectorXd proposed_sel = forward.sample(rng);
  out.gamma = scatter(proposed_sel, new_idx, ctx.q());
  out.log_proposal_forward = forward.log_density(proposed_sel);

  const TailoredProposal reverse = tailor_proposal(ctx, gather(out.gamma, cur_idx), current_ind);
  if (!reverse.ok) return out;
  out.log_proposal_reverse = reverse.log_density(gather(current_gamma, cur_idx));
  out.ok = std::isfinite(out.log_proposal_forward) && std::isfinite(out.log_proposal_reverse);
  return out;
}

struct GammaStepResult {
  VectorXd gamma;
  Indicators ind;
  bool accepted = false;
  bool proposal_failed = false;
};

inline GammaStepResult mh_step_gamma(const GammaPosteriorContext& ctx, const VectorXd& gamma, const Indicators& ind,
                                     Random& rng, bool update_indicators) {
  GammaStepResult res{gamma, ind, false, false};
  const auto cur_idx = selected_indices(ind);
  const double current = detail::log_posterior_or_ninf(ctx, cur_idx, ind, gather(gamma, cur_idx));
  const GammaProposal prop =
      propose_gamma(ctx, gamma, ind, rng, update_indicators ? ctx.tuning.flip_subset_size : 0);
  if (!prop.ok) {
    res.proposal_failed = true;
    return res;
  }
  const auto new_idx = selected_indices(prop.ind);
  const double proposed = detail::log_posterior_or_ninf(ctx, new_idx, prop.ind, gather(prop.gamma, new_idx));
  if (!std::isfinite(proposed)) return res;
  const double log_alpha = proposed - current + prop.log_proposal_reverse - prop.log_proposal_forward;
  if (std::log(rng.uniform()) < log_alpha) {
    res.gamma = prop.gamma;
    res.ind = prop.ind;
    res.accepted = true;
  }
  return res;
}

}  // namespace glmh
