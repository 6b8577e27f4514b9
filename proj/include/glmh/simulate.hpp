#pragma once

// Synthetic single-slice datasets: a grid split into active/inactive and
// heteroscedastic/homoscedastic regions, activity from HRF-convolved block
// designs, a motion trace with spikes, and AR noise whose innovation
// variance follows exp(z_t'gamma).

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "glmh/model.hpp"
#include "glmh/prewhiten.hpp"

namespace glmh {

enum class HeteroType { none, activity, motion, motion_derivative, all };

inline const char* to_string(HeteroType t) {
  switch (t) {
    case HeteroType::none: return "none";
    case HeteroType::activity: return "activity";
    case HeteroType::motion: return "motion";
    case HeteroType::motion_derivative: return "motion_derivative";
    case HeteroType::all: return "all";
  }
  return "unknown";
}

inline HeteroType parse_hetero_type(const std::string& s) {
  if (s == "none") return HeteroType::none;
  if (s == "activity") return HeteroType::activity;
  if (s == "motion") return HeteroType::motion;
  if (s == "motion_derivative") return HeteroType::motion_derivative;
  if (s == "all") return HeteroType::all;
  throw InputError("unknown heteroscedasticity type '" + s + "'");
}

// gamma values for level 1, 2, 3
inline constexpr std::array<double, 3> hetero_levels{1.0, 2.0, 3.0};
inline constexpr std::array<double, 3> motion_derivative_levels{1.0, 1.25, 1.5};
inline constexpr double combined_motion_derivative_level = 1.25;
inline constexpr double intercept_log_variance = 1.0;

struct SimulationSpec {
  int width = 32;
  int height = 32;
  int n_time = 200;
  int n_activity = 2;
  double tr = 2.0;
  HeteroType hetero_type = HeteroType::motion_derivative;
  int hetero_level = 3;           // 1, 2 or 3
  double hetero_fraction = 0.5;   // leading rows of the grid carrying hetero noise
  double active_fraction = 0.5;   // leading columns carrying activity
  bool ar_noise = true;           // rho = (0.4, 0.2, 0.1, 0.05), else zeros
  double intercept = 800.0;
  double intercept_sd = 5.0;
  double trend_sd = 1.0;
  double nuisance_sd = 0.5;       // motion and motion-derivative mean effects
  int n_spikes = 3;
  double spike_size = 0.5;
  double motion_step_sd = 0.02;
  std::optional<MatrixXd> motion;  // T x 6; synthetic trace when absent
  std::uint64_t seed = 1;

  VectorXd rho_true() const {
    VectorXd r(4);
    if (ar_noise) {
      r << 0.4, 0.2, 0.1, 0.05;
    } else {
      r.setZero();
    }
    return r;
  }

  void validate() const {
    if (width < 1 || height < 1) throw InputError("grid dimensions must be positive");
    if (n_time < 16) throw InputError("simulation needs at least 16 time points");
    if (hetero_level < 1 || hetero_level > 3) throw InputError("hetero_level must be 1, 2 or 3");
    if (!(hetero_fraction >= 0.0 && hetero_fraction <= 1.0)) throw InputError("hetero_fraction must lie in [0, 1]");
    if (!(active_fraction >= 0.0 && active_fraction <= 1.0)) throw InputError("active_fraction must lie in [0, 1]");
    if (n_activity < 1) throw InputError("simulation needs at least one activity covariate");
    if (motion && (motion->rows() != n_time || motion->cols() < 1)) {
      throw InputError("supplied motion trace must have n_time rows");
    }
  }
};

// Double-gamma haemodynamic response sampled every tr seconds over 32 s.
inline VectorXd canonical_hrf(double tr) {
  const auto n = static_cast<Index>(std::ceil(32.0 / tr));
  VectorXd h(n);
  auto gpdf = [](double x, double shape) {
    return x <= 0.0 ? 0.0 : std::exp((shape - 1.0) * std::log(x) - x - std::lgamma(shape));
  };
  for (Index i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * tr;
    h(i) = gpdf(t, 6.0) - gpdf(t, 16.0) / 6.0;
  }
  return h / h.sum();
}

// Boxcar with the given on/off period (seconds) and onset offset, convolved
// with the canonical HRF.
inline VectorXd block_regressor(int n_time, double tr, double period, double offset) {
  VectorXd box(n_time);
  for (int t = 0; t < n_time; ++t) {
    const double sec = static_cast<double>(t) * tr + offset;
    box(t) = std::fmod(sec, 2.0 * period) < period ? 1.0 : 0.0;
  }
  const VectorXd h = canonical_hrf(tr);
  VectorXd out = VectorXd::Zero(n_time);
  for (int t = 0; t < n_time; ++t) {
    for (Index i = 0; i < h.size() && i <= t; ++i) out(t) += h(i) * box(t - i);
  }
  return out;
}

// Six slowly drifting rigid-body parameters with abrupt transient
// displacements ("spikes") that jerk every parameter at once.
inline MatrixXd synthetic_motion(int n_time, int n_spikes, double spike_size, double step_sd, Random& rng) {
  MatrixXd m(n_time, 6);
  VectorXd pos = VectorXd::Zero(6);
  for (int t = 0; t < n_time; ++t) {
    for (Index c = 0; c < 6; ++c) pos(c) += step_sd * rng.gaussian();
    m.row(t) = pos.transpose();
  }
  const int margin = std::min(10, n_time / 4);
  for (int s = 0; s < n_spikes; ++s) {
    const int onset = margin + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(n_time - 2 * margin)));
    const int length = 1 + static_cast<int>(rng.uniform_index(2));
    VectorXd d(6);
    for (Index c = 0; c < 6; ++c) {
      d(c) = spike_size * (1.0 + 0.5 * std::abs(rng.gaussian())) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    }
    for (int t = onset; t < n_time; ++t) {
      const double f = t < onset + length ? 1.0 : 0.2;
      m.row(t) += f * d.transpose();
    }
  }
  return m;
}

// u_t = sum_j rho_j u_{t-j} + exp(z_t'gamma/2) eps_t with zero pre-sample
// values; y = X beta + u.
inline VectorXd simulate_voxel(const MatrixXd& X, const MatrixXd& Z, const VectorXd& beta, const VectorXd& gamma,
                               const VectorXd& rho, Random& rng) {
  if (!check_stationary(rho)) throw InputError("simulation requires a stationary rho");
  if (X.rows() != Z.rows() || X.cols() != beta.size() || Z.cols() != gamma.size()) {
    throw InputError("simulate_voxel: inconsistent shapes");
  }
  const Index T = X.rows(), k = rho.size();
  const VectorXd sd = (0.5 * log_variance(Z, gamma).array()).exp();
  VectorXd u = VectorXd::Zero(T);
  for (Index t = 0; t < T; ++t) {
    double v = sd(t) * rng.gaussian();
    for (Index j = 1; j <= k && j <= t; ++j) v += rho(j - 1) * u(t - j);
    u(t) = v;
  }
  return X * beta + u;
}

enum class Region { active_homo, active_hetero, inactive_homo, inactive_hetero };

inline const char* to_string(Region r) {
  switch (r) {
    case Region::active_homo: return "active_homo";
    case Region::active_hetero: return "active_hetero";
    case Region::inactive_homo: return "inactive_homo";
    case Region::inactive_hetero: return "inactive_hetero";
  }
  return "unknown";
}

struct VoxelTruth {
  std::uint64_t voxel_id = 0;
  Region region = Region::inactive_homo;
  VectorXd beta;
  VectorXd gamma;
};

struct SimulatedData {
  Dataset dataset;
  DesignPair design;
  MatrixXd activity;  // raw regressors, T x a
  MatrixXd motion;    // raw trace, T x 6
  VectorXd rho;
  std::vector<VoxelTruth> truth;

  std::vector<bool> active_truth() const {
    std::vector<bool> out;
    out.reserve(truth.size());
    for (const auto& t : truth) out.push_back(t.region == Region::active_homo || t.region == Region::active_hetero);
    return out;
  }
};

// Variance coefficients for a heteroscedastic voxel.
inline VectorXd hetero_gamma(const SimulationSpec& spec, const DesignPair& design) {
  VectorXd g = VectorXd::Zero(design.q());
  g(0) = intercept_log_variance;
  const auto level = static_cast<std::size_t>(spec.hetero_level - 1);
  auto first = [&](ColumnKind kind) {
    for (std::size_t j = 0; j < design.z_kinds.size(); ++j) {
      if (design.z_kinds[j] == kind) return static_cast<Index>(j);
    }
    throw InputError(std::string("design has no ") + to_string(kind) + " column");
  };
  switch (spec.hetero_type) {
    case HeteroType::none: break;
    case HeteroType::activity: g(first(ColumnKind::activity)) = hetero_levels[level]; break;
    case HeteroType::motion: g(first(ColumnKind::motion)) = hetero_levels[level]; break;
    case HeteroType::motion_derivative:
      g(first(ColumnKind::motion_derivative)) = motion_derivative_levels[level];
      break;
    case HeteroType::all:
      g(first(ColumnKind::activity)) = hetero_levels[level];
      g(first(ColumnKind::motion)) = hetero_levels[level];
      g(first(ColumnKind::motion_derivative)) = combined_motion_derivative_level;
      break;
  }
  return g;
}

inline SimulatedData simulate_dataset(const SimulationSpec& spec) {
  spec.validate();
  SimulatedData out;
  const int T = spec.n_time;

  out.activity.resize(T, spec.n_activity);
  for (int a = 0; a < spec.n_activity; ++a) {
    const double period = 20.0 + 10.0 * a;
    out.activity.col(a) = block_regressor(T, spec.tr, period, 7.0 * a);
  }
  if (spec.motion) {
    out.motion = *spec.motion;
  } else {
    Random motion_rng(mix_seed(spec.seed, 0x6d6f74696f6eULL));
    out.motion = synthetic_motion(T, spec.n_spikes, spec.spike_size, spec.motion_step_sd, motion_rng);
  }
  out.design = build_design(out.activity, out.motion, 3, true);
  out.rho = spec.rho_true();

  const DesignPair& d = out.design;
  const int V = spec.width * spec.height;
  const int active_cols = static_cast<int>(std::lround(spec.active_fraction * spec.width));
  const int hetero_rows = static_cast<int>(std::lround(spec.hetero_fraction * spec.height));
  const VectorXd gamma_hetero = hetero_gamma(spec, d);
  VectorXd gamma_homo = VectorXd::Zero(d.q());
  gamma_homo(0) = intercept_log_variance;

  Dataset& ds = out.dataset;
  ds.values.resize(T, V);
  ds.layout = {spec.width, spec.height, 1};
  ds.voxel_ids.resize(static_cast<std::size_t>(V));
  std::vector<std::uint8_t> active_mask(static_cast<std::size_t>(V)), hetero_mask(static_cast<std::size_t>(V));
  out.truth.resize(static_cast<std::size_t>(V));

  for (int yv = 0; yv < spec.height; ++yv) {
    for (int xv = 0; xv < spec.width; ++xv) {
      const int v = yv * spec.width + xv;
      const auto vi = static_cast<std::size_t>(v);
      const bool active = xv < active_cols;
      const bool hetero = yv < hetero_rows && spec.hetero_type != HeteroType::none;
      Random rng(mix_seed(spec.seed, static_cast<std::uint64_t>(v)));

      VectorXd beta(d.p());
      for (Index j = 0; j < d.p(); ++j) {
        switch (d.x_kinds[static_cast<std::size_t>(j)]) {
          case ColumnKind::intercept: beta(j) = spec.intercept + spec.intercept_sd * rng.gaussian(); break;
          case ColumnKind::trend: beta(j) = spec.trend_sd * rng.gaussian(); break;
          case ColumnKind::activity:
            beta(j) = active ? std::abs(3.0 * rng.gaussian()) + 3.0 : std::sqrt(0.06) * rng.gaussian();
            break;
          case ColumnKind::motion:
          case ColumnKind::motion_derivative: beta(j) = spec.nuisance_sd * rng.gaussian(); break;
        }
      }
      const VectorXd& gamma = hetero ? gamma_hetero : gamma_homo;
      ds.values.col(v) = simulate_voxel(d.X, d.Z, beta, gamma, out.rho, rng);
      ds.voxel_ids[vi] = static_cast<std::uint64_t>(v);
      active_mask[vi] = active ? 1 : 0;
      hetero_mask[vi] = hetero ? 1 : 0;
      out.truth[vi] = {static_cast<std::uint64_t>(v),
                       active ? (hetero ? Region::active_hetero : Region::active_homo)
                              : (hetero ? Region::inactive_hetero : Region::inactive_homo),
                       beta, gamma};
    }
  }
  ds.masks["active"] = std::move(active_mask);
  ds.masks["hetero"] = std::move(hetero_mask);
  return out;
}

}  // namespace glmh
