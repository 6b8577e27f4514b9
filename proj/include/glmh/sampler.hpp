#pragma once

// Per-voxel Metropolis-within-Gibbs sampler. One sweep updates, in order,
//   (beta, I_beta), pi_beta, (rho, I_rho), (gamma, I_gamma), pi_gamma
// with the two pi blocks active only when inclusion probabilities are
// updated.

#include <cmath>
#include <cstdint>
#include <optional>

#include "glmh/linreg_select.hpp"
#include "glmh/model.hpp"
#include "glmh/newton_gamma.hpp"
#include "glmh/prewhiten.hpp"

namespace glmh {

struct SamplerConfig {
  int n_burnin = 1000;
  int n_draws = 1000;
  int ar_order = 4;
  double gamma_indicator_rate = 0.6;
  std::uint64_t seed = 0;
  bool store_full_posterior = false;
  int max_stationarity_redraws = 100;
  ScanOrder scan_order = ScanOrder::ascending;
  GammaTuning gamma;

  void validate(Index n_time) const {
    if (n_burnin < 0) throw InputError("n_burnin must be non-negative");
    if (n_draws < 1) throw InputError("n_draws must be at least 1");
    if (ar_order < 1 || 2 * static_cast<Index>(ar_order) >= n_time) {
      throw InputError("AR order must satisfy 1 <= k < T/2");
    }
    if (!(gamma_indicator_rate >= 0.0 && gamma_indicator_rate <= 1.0)) {
      throw InputError("gamma_indicator_rate must lie in [0, 1]");
    }
    if (gamma.newton_steps < 1) throw InputError("newton_steps must be at least 1");
    if (!(gamma.proposal_df > 0.0)) throw InputError("proposal_df must be positive");
    if (max_stationarity_redraws < 1) throw InputError("max_stationarity_redraws must be at least 1");
  }
};

// Deterministic stride: iteration i updates the gamma indicators iff
// floor((i + 1) * rate) > floor(i * rate), so any n consecutive iterations
// contain n * rate updates up to one.
inline bool gamma_indicator_iteration(long iteration, double rate) {
  const auto before = static_cast<long>(std::floor(static_cast<double>(iteration) * rate + 1e-9));
  const auto after = static_cast<long>(std::floor(static_cast<double>(iteration + 1) * rate + 1e-9));
  return after > before;
}

// pi | I ~ Beta(a + sum I_j, b + n_sel - sum I_j) over non-forced entries.
inline double draw_inclusion_probability(const Indicators& ind, const Indicators& forced, double a, double b,
                                         Random& rng) {
  double n_sel = 0.0, n_on = 0.0;
  for (Index j = 0; j < ind.size(); ++j) {
    if (forced(j)) continue;
    n_sel += 1.0;
    if (ind(j)) n_on += 1.0;
  }
  return rng.beta(a + n_on, b + n_sel - n_on);
}

struct VoxelPosterior {
  VectorXd beta_mean, beta_std, beta_incl, beta_ppm;
  VectorXd gamma_mean, gamma_std, gamma_incl;
  VectorXd rho_mean, rho_std, rho_incl;
  double pi_beta_mean = 0.0;
  double pi_gamma_mean = 0.0;
  double acceptance_rate_gamma = 0.0;
  long gamma_indicator_updates = 0;
  long rejected_nonstationary_count = 0;  // rho blocks that exhausted their redraws
  long nonstationary_redraws = 0;         // individual non-stationary rho draws discarded
  bool all_rho_stationary = true;

  // Kept draws (n_draws rows), present when full posterior storage is on.
  std::optional<MatrixXd> beta_draws, gamma_draws, rho_draws;
};

struct StepInfo {
  bool gamma_accepted = false;
  bool gamma_indicators_updated = false;
  bool rho_exhausted = false;
  int rho_redraws = 0;
};

class VoxelSampler {
 public:
  VoxelSampler(VectorXd y, const DesignPair& design, PriorConfig priors, SamplerConfig config)
      : y_(std::move(y)),
        design_(design),
        priors_(std::move(priors)),
        config_(checked(config, design.n_time())),
        k_(config.ar_order),
        gamma_ctx_(design.Z.bottomRows(design.n_time() - config.ar_order), priors_.mu_gamma,
                   priors_.omega_gamma_diag(), VectorXd::Constant(design.q(), priors_.pi_gamma0),
                   design.forced_in_var, config.gamma) {
    if (y_.size() != design.n_time()) {
      throw InputError("time series has " + std::to_string(y_.size()) + " points, design has " +
                       std::to_string(design.n_time()));
    }
    if (design.Z.rows() != design.n_time()) throw InputError("X and Z row counts differ");
    for (Index t = 0; t < y_.size(); ++t) {
      if (!std::isfinite(y_(t))) throw InputError("non-finite observation at t = " + std::to_string(t));
    }
    if (priors_.ar_order() != k_) throw InputError("prior AR order does not match sampler AR order");
    priors_.validate(design);
    omega_beta_ = priors_.omega_beta_diag();
    omega_rho_ = priors_.omega_rho_diag();
    mu_rho_ = priors_.mu_rho();
  }

  const SamplerConfig& config() const { return config_; }
  const PriorConfig& priors() const { return priors_; }

  ChainState init(std::uint64_t seed) const {
    ChainState s;
    const Index p = design_.p(), q = design_.q();
    s.ind_beta = design_.forced_in_mean;
    s.beta = VectorXd::Zero(p);
    for (Index j = 0; j < p; ++j) {
      if (s.ind_beta(j)) s.beta(j) = priors_.mu_beta(j);
    }
    s.ind_gamma = design_.forced_in_var;
    s.gamma = VectorXd::Zero(q);
    s.rho = VectorXd::Zero(k_);
    s.ind_rho = priors_.forced_in_rho;
    s.rho(0) = priors_.r;
    s.ind_rho(0) = true;
    s.pi_beta = priors_.pi_beta0;
    s.pi_gamma = priors_.pi_gamma0;
    s.rng = Random(seed);
    return s;
  }

  StepInfo step(ChainState& s, long iteration) {
    StepInfo info;
    const Index p = design_.p();

    // (beta, I_beta)
    {
      const WhitenedProblem w = whiten_for_beta(y_, design_.X, design_.Z, s.gamma, s.rho);
      GaussianRegressionProblem prob{w.response, w.design, priors_.mu_beta, omega_beta_,
                                     VectorXd::Constant(p, s.pi_beta), design_.forced_in_mean};
      const IndicatorPosterior post(prob);
      s.ind_beta = gibbs_scan(post, s.ind_beta, s.rng, config_.scan_order);
      s.beta = post.draw(s.ind_beta, s.rng);
    }
    if (priors_.update_pi) {
      s.pi_beta = draw_inclusion_probability(s.ind_beta, design_.forced_in_mean, priors_.beta_a, priors_.beta_b, s.rng);
    }

    // (rho, I_rho), truncated to the stationarity region
    const VectorXd u = y_ - design_.X * s.beta;
    {
      const WhitenedProblem w = whiten_for_rho(u, design_.Z, s.gamma, k_);
      GaussianRegressionProblem prob{w.response, w.design, mu_rho_, omega_rho_, priors_.pi_rho, priors_.forced_in_rho};
      const IndicatorPosterior post(prob);
      const Indicators ind = gibbs_scan(post, s.ind_rho, s.rng, config_.scan_order);
      bool done = false;
      for (int attempt = 0; attempt < config_.max_stationarity_redraws; ++attempt) {
        VectorXd rho = post.draw(ind, s.rng);
        if (check_stationary(rho)) {
          s.rho = std::move(rho);
          s.ind_rho = ind;
          done = true;
          break;
        }
        ++info.rho_redraws;
      }
      info.rho_exhausted = !done;
    }

    // (gamma, I_gamma)
    gamma_ctx_.set_residuals(apply_lag_polynomial(u, s.rho));
    if (priors_.update_pi) gamma_ctx_.set_inclusion_prior(VectorXd::Constant(design_.q(), s.pi_gamma));
    info.gamma_indicators_updated = gamma_indicator_iteration(iteration, config_.gamma_indicator_rate);
    const GammaStepResult g = mh_step_gamma(gamma_ctx_, s.gamma, s.ind_gamma, s.rng, info.gamma_indicators_updated);
    s.gamma = g.gamma;
    s.ind_gamma = g.ind;
    info.gamma_accepted = g.accepted;

    if (priors_.update_pi) {
      s.pi_gamma = draw_inclusion_probability(s.ind_gamma, design_.forced_in_var, priors_.beta_a, priors_.beta_b, s.rng);
    }
    return info;
  }

  VoxelPosterior run(std::uint64_t seed) {
    ChainState s = init(seed);
    const Index p = design_.p(), q = design_.q();
    const int n = config_.n_draws;

    VoxelPosterior out;
    VectorXd beta_sum = VectorXd::Zero(p), beta_sq = VectorXd::Zero(p), beta_on = VectorXd::Zero(p),
             beta_pos = VectorXd::Zero(p);
    VectorXd gamma_sum = VectorXd::Zero(q), gamma_sq = VectorXd::Zero(q), gamma_on = VectorXd::Zero(q);
    VectorXd rho_sum = VectorXd::Zero(k_), rho_sq = VectorXd::Zero(k_), rho_on = VectorXd::Zero(k_);
    double pi_beta_sum = 0.0, pi_gamma_sum = 0.0;
    long accepted = 0;
    if (config_.store_full_posterior) {
      out.beta_draws = MatrixXd(n, p);
      out.gamma_draws = MatrixXd(n, q);
      out.rho_draws = MatrixXd(n, k_);
    }

    const long total = static_cast<long>(config_.n_burnin) + n;
    for (long it = 0; it < total; ++it) {
      const StepInfo info = step(s, it);
      if (info.rho_exhausted) ++out.rejected_nonstationary_count;
      out.nonstationary_redraws += info.rho_redraws;
      if (it < config_.n_burnin) continue;

      const auto r = static_cast<Index>(it - config_.n_burnin);
      if (!check_stationary(s.rho)) out.all_rho_stationary = false;
      if (info.gamma_accepted) ++accepted;
      if (info.gamma_indicators_updated) ++out.gamma_indicator_updates;
      beta_sum += s.beta;
      beta_sq += s.beta.cwiseAbs2();
      beta_on += s.ind_beta.cast<double>().matrix();
      beta_pos += (s.beta.array() > 0.0).cast<double>().matrix();
      gamma_sum += s.gamma;
      gamma_sq += s.gamma.cwiseAbs2();
      gamma_on += s.ind_gamma.cast<double>().matrix();
      rho_sum += s.rho;
      rho_sq += s.rho.cwiseAbs2();
      rho_on += s.ind_rho.cast<double>().matrix();
      pi_beta_sum += s.pi_beta;
      pi_gamma_sum += s.pi_gamma;
      if (config_.store_full_posterior) {
        out.beta_draws->row(r) = s.beta.transpose();
        out.gamma_draws->row(r) = s.gamma.transpose();
        out.rho_draws->row(r) = s.rho.transpose();
      }
    }

    const double nd = static_cast<double>(n);
    auto std_of = [nd](const VectorXd& sum, const VectorXd& sq) {
      return ((sq / nd).array() - (sum / nd).array().square()).max(0.0).sqrt().matrix().eval();
    };
    out.beta_mean = beta_sum / nd;
    out.beta_std = std_of(beta_sum, beta_sq);
    out.beta_incl = beta_on / nd;
    out.beta_ppm = beta_pos / nd;
    out.gamma_mean = gamma_sum / nd;
    out.gamma_std = std_of(gamma_sum, gamma_sq);
    out.gamma_incl = gamma_on / nd;
    out.rho_mean = rho_sum / nd;
    out.rho_std = std_of(rho_sum, rho_sq);
    out.rho_incl = rho_on / nd;
    out.pi_beta_mean = pi_beta_sum / nd;
    out.pi_gamma_mean = pi_gamma_sum / nd;
    out.acceptance_rate_gamma = static_cast<double>(accepted) / nd;
    return out;
  }

 private:
  static const SamplerConfig& checked(const SamplerConfig& c, Index n_time) {
    c.validate(n_time);
    return c;
  }

  VectorXd y_;
  DesignPair design_;
  PriorConfig priors_;
  SamplerConfig config_;
  Index k_;
  GammaPosteriorContext gamma_ctx_;
  VectorXd omega_beta_;
  VectorXd omega_rho_;
  VectorXd mu_rho_;
};

inline VoxelPosterior run_voxel(const VectorXd& y, const DesignPair& design, const PriorConfig& priors,
                                const SamplerConfig& config, std::uint64_t seed) {
  return VoxelSampler(y, design, priors, config).run(seed);
}

}  // namespace glmh
