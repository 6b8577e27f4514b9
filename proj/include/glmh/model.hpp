#pragma once

// Domain types shared by every part of the sampler: datasets, the pair of
// mean/variance design matrices, prior hyperparameters, the per-voxel chain
// state, and the AR stationarity predicate.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "glmh/error.hpp"
#include "glmh/rng.hpp"

namespace glmh {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Indicators = Eigen::Array<bool, Eigen::Dynamic, 1>;

inline std::vector<Index> selected_indices(const Indicators& ind) {
  std::vector<Index> idx;
  idx.reserve(static_cast<std::size_t>(ind.count()));
  for (Index j = 0; j < ind.size(); ++j) {
    if (ind(j)) idx.push_back(j);
  }
  return idx;
}

inline VectorXd gather(const VectorXd& v, const std::vector<Index>& idx) {
  VectorXd out(static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Index>(i)) = v(idx[i]);
  return out;
}

inline VectorXd scatter(const VectorXd& sel, const std::vector<Index>& idx, Index size) {
  VectorXd out = VectorXd::Zero(size);
  for (std::size_t i = 0; i < idx.size(); ++i) out(idx[i]) = sel(static_cast<Index>(i));
  return out;
}

// ---------------------------------------------------------------------------
// Dataset

struct Dataset {
  MatrixXd values;  // T x V, row t holds every voxel at time t
  std::vector<std::uint64_t> voxel_ids;
  std::array<int, 3> layout{0, 0, 0};  // width, height, depth; 0 when unknown
  std::map<std::string, std::vector<std::uint8_t>> masks;

  Index n_time() const { return values.rows(); }
  Index n_voxel() const { return values.cols(); }

  VectorXd voxel(Index v) const { return values.col(v); }

  void validate() const {
    if (n_time() < 8) {
      throw InputError("dataset needs at least 8 time points, got " + std::to_string(n_time()));
    }
    if (n_voxel() < 1) throw InputError("dataset has no voxels");
    if (static_cast<Index>(voxel_ids.size()) != n_voxel()) {
      throw InputError("voxel_ids has " + std::to_string(voxel_ids.size()) + " entries for " +
                       std::to_string(n_voxel()) + " voxels");
    }
    for (Index v = 0; v < n_voxel(); ++v) {
      for (Index t = 0; t < n_time(); ++t) {
        if (!std::isfinite(values(t, v))) {
          throw InputError("non-finite value at time " + std::to_string(t) + ", voxel " +
                           std::to_string(v));
        }
      }
    }
    for (const auto& [name, mask] : masks) {
      if (static_cast<Index>(mask.size()) != n_voxel()) {
        throw InputError("mask '" + name + "' has length " + std::to_string(mask.size()) +
                         ", expected " + std::to_string(n_voxel()));
      }
    }
  }
};

// ---------------------------------------------------------------------------
// Design

enum class ColumnKind { intercept, trend, activity, motion, motion_derivative };

inline const char* to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::intercept: return "intercept";
    case ColumnKind::trend: return "trend";
    case ColumnKind::activity: return "activity";
    case ColumnKind::motion: return "motion";
    case ColumnKind::motion_derivative: return "motion_derivative";
  }
  return "unknown";
}

struct DesignPair {
  MatrixXd X;  // T x p, mean covariates
  MatrixXd Z;  // T x q, log-variance covariates
  std::vector<std::string> x_names;
  std::vector<std::string> z_names;
  std::vector<ColumnKind> x_kinds;
  std::vector<ColumnKind> z_kinds;
  Indicators forced_in_mean;
  Indicators forced_in_var;

  Index n_time() const { return X.rows(); }
  Index p() const { return X.cols(); }
  Index q() const { return Z.cols(); }

  std::vector<Index> x_columns_of(ColumnKind kind) const {
    std::vector<Index> out;
    for (std::size_t j = 0; j < x_kinds.size(); ++j) {
      if (x_kinds[j] == kind) out.push_back(static_cast<Index>(j));
    }
    return out;
  }
};

struct DesignInputs {
  MatrixXd activity;                       // T x a
  std::optional<MatrixXd> motion;          // T x 6 (any width accepted)
  std::optional<MatrixXd> motion_derivative;  // explicit derivative, else computed
  int n_trends = 3;
  bool use_motion_derivative = true;
};

namespace detail {

inline void require_finite(const MatrixXd& m, const std::string& what) {
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index t = 0; t < m.rows(); ++t) {
      if (!std::isfinite(m(t, j))) {
        throw InputError(what + ": non-finite value at row " + std::to_string(t) + ", column " +
                         std::to_string(j));
      }
    }
  }
}

}  // namespace detail

// Zero mean, unit population variance. Rejects columns without variation.
inline VectorXd standardize_column(const VectorXd& col, const std::string& name) {
  const double n = static_cast<double>(col.size());
  const double mean = col.sum() / n;
  const VectorXd centered = col.array() - mean;
  const double var = centered.squaredNorm() / n;
  const double scale = std::max(1.0, col.cwiseAbs().maxCoeff());
  if (!(var > 1e-24 * scale * scale)) {
    throw InputError("column '" + name + "' is constant and cannot be standardized");
  }
  return centered / std::sqrt(var);
}

// Backward first difference with a zero first row.
inline MatrixXd first_difference(const MatrixXd& m) {
  MatrixXd d = MatrixXd::Zero(m.rows(), m.cols());
  if (m.rows() > 1) d.bottomRows(m.rows() - 1) = m.bottomRows(m.rows() - 1) - m.topRows(m.rows() - 1);
  return d;
}

// Builds X and Z. Column order is
//   [intercept, activity..., trends..., motion..., motion derivative...]
// with the intercept at column 0 of both matrices and forced in. Z is X with
// the motion derivative replaced by its absolute value. Every non-intercept
// column is standardized after that substitution.
inline DesignPair build_design(const DesignInputs& in) {
  const Index T = in.activity.rows();
  if (T < 2) throw InputError("design needs at least 2 time points");
  if (in.n_trends < 0) throw InputError("n_trends must be non-negative");
  detail::require_finite(in.activity, "activity covariates");
  if (in.motion) {
    if (in.motion->rows() != T) {
      throw InputError("motion has " + std::to_string(in.motion->rows()) + " rows, expected " +
                       std::to_string(T));
    }
    detail::require_finite(*in.motion, "motion covariates");
  }
  if (in.motion_derivative) {
    if (in.motion_derivative->rows() != T) {
      throw InputError("motion derivative has " + std::to_string(in.motion_derivative->rows()) +
                       " rows, expected " + std::to_string(T));
    }
    detail::require_finite(*in.motion_derivative, "motion derivative covariates");
  }

  std::vector<VectorXd> xcols, zcols;
  std::vector<std::string> names;
  std::vector<ColumnKind> kinds;
  auto add = [&](const VectorXd& xc, const VectorXd& zc, std::string name, ColumnKind kind) {
    xcols.push_back(xc);
    zcols.push_back(zc);
    names.push_back(std::move(name));
    kinds.push_back(kind);
  };

  add(VectorXd::Ones(T), VectorXd::Ones(T), "intercept", ColumnKind::intercept);
  for (Index j = 0; j < in.activity.cols(); ++j) {
    const std::string name = "activity" + std::to_string(j);
    const VectorXd c = standardize_column(in.activity.col(j), name);
    add(c, c, name, ColumnKind::activity);
  }
  if (in.n_trends > 0) {
    // Raw powers of a centred time index; standardization handles scale.
    const VectorXd time = VectorXd::LinSpaced(T, 0.0, static_cast<double>(T - 1)).array() -
                          0.5 * static_cast<double>(T - 1);
    for (int d = 1; d <= in.n_trends; ++d) {
      const std::string name = "trend" + std::to_string(d);
      const VectorXd c = standardize_column(time.array().pow(d).matrix(), name);
      add(c, c, name, ColumnKind::trend);
    }
  }
  if (in.motion) {
    for (Index j = 0; j < in.motion->cols(); ++j) {
      const std::string name = "motion" + std::to_string(j);
      const VectorXd c = standardize_column(in.motion->col(j), name);
      add(c, c, name, ColumnKind::motion);
    }
  }
  if (in.use_motion_derivative && (in.motion || in.motion_derivative)) {
    const MatrixXd deriv = in.motion_derivative ? *in.motion_derivative : first_difference(*in.motion);
    for (Index j = 0; j < deriv.cols(); ++j) {
      const std::string name = "motion_deriv" + std::to_string(j);
      const VectorXd xc = standardize_column(deriv.col(j), name);
      const VectorXd zc = standardize_column(deriv.col(j).cwiseAbs(), name + "_abs");
      add(xc, zc, name, ColumnKind::motion_derivative);
    }
  }

  DesignPair out;
  const Index p = static_cast<Index>(xcols.size());
  out.X.resize(T, p);
  out.Z.resize(T, p);
  for (Index j = 0; j < p; ++j) {
    out.X.col(j) = xcols[static_cast<std::size_t>(j)];
    out.Z.col(j) = zcols[static_cast<std::size_t>(j)];
  }
  out.x_names = names;
  out.z_names = names;
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (kinds[j] == ColumnKind::motion_derivative) out.z_names[j] = names[j] + "_abs";
  }
  out.x_kinds = kinds;
  out.z_kinds = kinds;
  out.forced_in_mean = Indicators::Constant(p, false);
  out.forced_in_var = Indicators::Constant(p, false);
  out.forced_in_mean(0) = true;
  out.forced_in_var(0) = true;
  return out;
}

inline DesignPair build_design(const MatrixXd& raw_activity, const std::optional<MatrixXd>& raw_motion,
                               int n_trends, bool use_motion_derivative) {
  DesignInputs in;
  in.activity = raw_activity;
  in.motion = raw_motion;
  in.n_trends = n_trends;
  in.use_motion_derivative = use_motion_derivative;
  return build_design(in);
}

// Restricts Z to the listed columns of the variance design; the intercept is
// always kept as column 0.
inline void select_variance_columns(DesignPair& design, const std::vector<Index>& columns) {
  std::vector<Index> keep{0};
  for (Index c : columns) {
    if (c < 0 || c >= design.Z.cols()) {
      throw InputError("variance covariate index " + std::to_string(c) + " out of range [0, " +
                       std::to_string(design.Z.cols()) + ")");
    }
    if (c != 0 && std::find(keep.begin(), keep.end(), c) == keep.end()) keep.push_back(c);
  }
  MatrixXd Z(design.Z.rows(), static_cast<Index>(keep.size()));
  std::vector<std::string> names;
  std::vector<ColumnKind> kinds;
  Indicators forced(static_cast<Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) {
    const auto c = static_cast<std::size_t>(keep[i]);
    Z.col(static_cast<Index>(i)) = design.Z.col(keep[i]);
    names.push_back(design.z_names[c]);
    kinds.push_back(design.z_kinds[c]);
    forced(static_cast<Index>(i)) = design.forced_in_var(keep[i]);
  }
  design.Z = std::move(Z);
  design.z_names = std::move(names);
  design.z_kinds = std::move(kinds);
  design.forced_in_var = forced;
}

// Homoscedastic special case: Z reduced to the intercept.
inline DesignPair homoscedastic(DesignPair design) {
  select_variance_columns(design, {});
  return design;
}

// ---------------------------------------------------------------------------
// Priors

struct PriorConfig {
  VectorXd mu_beta;   // p
  double tau_beta = 10.0;
  VectorXd mu_gamma;  // q
  double tau_gamma = 10.0;
  double tau_rho = 1.0;
  double r = 0.5;
  double zeta = 1.0;
  double pi_beta0 = 0.5;
  double pi_gamma0 = 0.5;
  VectorXd pi_rho;  // k
  Indicators forced_in_rho;  // k, lags excluded from selection
  double beta_a = 3.0;
  double beta_b = 3.0;
  bool update_pi = false;

  static constexpr double default_intercept_mean = 800.0;

  static PriorConfig defaults(const DesignPair& design, int ar_order) {
    PriorConfig pc;
    pc.mu_beta = VectorXd::Zero(design.p());
    for (std::size_t j = 0; j < design.x_kinds.size(); ++j) {
      if (design.x_kinds[j] == ColumnKind::intercept) pc.mu_beta(static_cast<Index>(j)) = default_intercept_mean;
    }
    pc.mu_gamma = VectorXd::Zero(design.q());
    pc.pi_rho.resize(ar_order);
    for (int j = 0; j < ar_order; ++j) pc.pi_rho(j) = 0.5 / std::sqrt(static_cast<double>(j + 1));
    pc.forced_in_rho = Indicators::Constant(ar_order, false);
    return pc;
  }

  Index ar_order() const { return pi_rho.size(); }

  VectorXd omega_beta_diag() const { return VectorXd::Constant(mu_beta.size(), tau_beta * tau_beta); }
  VectorXd omega_gamma_diag() const { return VectorXd::Constant(mu_gamma.size(), tau_gamma * tau_gamma); }
  VectorXd omega_rho_diag() const {
    VectorXd d(ar_order());
    for (Index j = 0; j < d.size(); ++j) {
      d(j) = tau_rho * tau_rho / std::pow(static_cast<double>(j + 1), zeta);
    }
    return d;
  }
  VectorXd mu_rho() const {
    VectorXd m = VectorXd::Zero(ar_order());
    if (m.size() > 0) m(0) = r;
    return m;
  }

  void validate(const DesignPair& design) const {
    auto prob = [](double v) { return v > 0.0 && v < 1.0; };
    if (mu_beta.size() != design.p()) throw InputError("mu_beta length does not match p");
    if (mu_gamma.size() != design.q()) throw InputError("mu_gamma length does not match q");
    if (!(tau_beta > 0 && tau_gamma > 0 && tau_rho > 0)) throw InputError("prior scales must be positive");
    if (!(zeta > 0)) throw InputError("zeta must be positive");
    if (!(r > -1.0 && r < 1.0)) throw InputError("r must lie in (-1, 1)");
    if (!prob(pi_beta0) || !prob(pi_gamma0)) throw InputError("inclusion probabilities must lie in (0, 1)");
    for (Index j = 0; j < pi_rho.size(); ++j) {
      if (!prob(pi_rho(j))) throw InputError("pi_rho entries must lie in (0, 1)");
    }
    if (forced_in_rho.size() != pi_rho.size()) throw InputError("forced_in_rho length does not match AR order");
    if (!(beta_a > 0 && beta_b > 0)) throw InputError("Beta hyperparameters must be positive");
  }
};

// ---------------------------------------------------------------------------
// Chain state

struct ChainState {
  VectorXd beta;
  Indicators ind_beta;
  VectorXd gamma;
  Indicators ind_gamma;
  VectorXd rho;
  Indicators ind_rho;
  double pi_beta = 0.5;
  double pi_gamma = 0.5;
  Random rng;

  // Zero coefficients wherever the indicator is off.
  bool coherent() const {
    auto ok = [](const VectorXd& v, const Indicators& ind) {
      for (Index j = 0; j < v.size(); ++j) {
        if (!ind(j) && v(j) != 0.0) return false;
      }
      return true;
    };
    return ok(beta, ind_beta) && ok(gamma, ind_gamma) && ok(rho, ind_rho);
  }
};

// ---------------------------------------------------------------------------
// Stationarity

// True iff every eigenvalue of the companion matrix of
// 1 - rho_1 L - ... - rho_k L^k lies strictly inside the unit circle.
inline bool check_stationary(const VectorXd& rho) {
  const Index k = rho.size();
  if (k == 0) return true;
  if (k == 1) return std::abs(rho(0)) < 1.0;
  MatrixXd companion = MatrixXd::Zero(k, k);
  companion.row(0) = rho.transpose();
  companion.bottomLeftCorner(k - 1, k - 1).setIdentity();
  Eigen::EigenSolver<MatrixXd> es(companion, false);
  if (es.info() != Eigen::Success) return false;
  // Eigenvalues of an exact unit root come back as 1 - O(eps); treat those
  // as on the circle.
  return es.eigenvalues().cwiseAbs().maxCoeff() < 1.0 - 1e-10;
}

}  // namespace glmh
