#pragma once

// Voxel-parallel driver. Workers pull voxel indices from a shared counter;
// each voxel owns its chain and generator, seeded from (global seed,
// voxel_id), so results do not depend on the number of threads or on
// scheduling. Results land in a slot per voxel and are written afterwards by
// the calling thread.

#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "glmh/io.hpp"
#include "glmh/model.hpp"
#include "glmh/rng.hpp"
#include "glmh/sampler.hpp"
#include "glmh/wls.hpp"

namespace glmh {

struct VoxelOutcome {
  std::uint64_t voxel_id = 0;
  Index column = 0;  // column of the dataset
  std::optional<VoxelPosterior> posterior;
  std::string error;  // set when the voxel failed

  bool ok() const { return posterior.has_value(); }
};

inline unsigned resolve_threads(int requested) {
  if (requested > 0) return static_cast<unsigned>(requested);
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1U : hw;
}

// Runs fn(i) for i in [0, n) on `threads` workers. Exceptions escaping fn are
// a programming error; callers catch per item.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  threads = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
  };
  if (threads == 1) {
    worker();
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
}

// Analyses the listed dataset columns. Per-voxel failures are recorded in the
// outcome and do not stop the batch.
inline std::vector<VoxelOutcome> analyze_voxels(const Dataset& data, const DesignPair& design,
                                                const PriorConfig& priors, const SamplerConfig& config,
                                                const std::vector<Index>& columns, int threads) {
  std::vector<VoxelOutcome> out(columns.size());
  parallel_for(columns.size(), resolve_threads(threads), [&](std::size_t i) {
    VoxelOutcome& o = out[i];
    o.column = columns[i];
    o.voxel_id = data.voxel_ids[static_cast<std::size_t>(o.column)];
    try {
      o.posterior = run_voxel(data.values.col(o.column), design, priors, config, mix_seed(config.seed, o.voxel_id));
    } catch (const std::exception& e) {
      o.error = e.what();
    }
  });
  return out;
}

inline std::vector<Index> masked_columns(const Dataset& data, const std::vector<std::uint8_t>* mask) {
  std::vector<Index> cols;
  for (Index v = 0; v < data.n_voxel(); ++v) {
    if (!mask || (*mask)[static_cast<std::size_t>(v)]) cols.push_back(v);
  }
  return cols;
}

struct WlsBatch {
  VectorXd weights;
  std::vector<Index> columns;  // design columns reported
  MatrixXd t;                  // voxels x columns
};

// Per-volume weights pooled over the analysed voxels, then a WLS fit per
// voxel on the design without motion covariates.
inline WlsBatch run_wls(const Dataset& data, const DesignPair& design, const std::vector<Index>& voxels,
                        int weight_iterations = 1) {
  std::vector<Index> keep;
  for (std::size_t j = 0; j < design.x_kinds.size(); ++j) {
    const ColumnKind k = design.x_kinds[j];
    if (k != ColumnKind::motion && k != ColumnKind::motion_derivative) keep.push_back(static_cast<Index>(j));
  }
  MatrixXd x(design.n_time(), static_cast<Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) x.col(static_cast<Index>(j)) = design.X.col(keep[j]);
  MatrixXd y(data.n_time(), static_cast<Index>(voxels.size()));
  for (std::size_t i = 0; i < voxels.size(); ++i) y.col(static_cast<Index>(i)) = data.values.col(voxels[i]);

  WlsBatch out;
  out.weights = estimate_volume_weights(y, x, weight_iterations);
  for (std::size_t j = 0; j < keep.size(); ++j) {
    if (design.x_kinds[static_cast<std::size_t>(keep[j])] == ColumnKind::activity) out.columns.push_back(static_cast<Index>(j));
  }
  out.t.resize(static_cast<Index>(voxels.size()), static_cast<Index>(out.columns.size()));
  for (std::size_t i = 0; i < voxels.size(); ++i) {
    const WlsResult r = wls_fit(y.col(static_cast<Index>(i)), x, out.weights);
    for (std::size_t c = 0; c < out.columns.size(); ++c) {
      out.t(static_cast<Index>(i), static_cast<Index>(c)) = r.t(out.columns[c]);
    }
  }
  // report indices into the full design
  for (auto& c : out.columns) c = keep[static_cast<std::size_t>(c)];
  return out;
}

namespace detail {

inline void write_table(const fs::path& path, const std::vector<std::string>& names,
                        const std::vector<VoxelOutcome>& outcomes, auto&& row_of) {
  auto out = open_out(path);
  out << "# voxel_id";
  for (const auto& n : names) out << ' ' << n;
  out << '\n';
  for (const auto& o : outcomes) {
    if (!o.ok()) continue;
    const VectorXd row = row_of(*o.posterior);
    out << o.voxel_id;
    for (Index j = 0; j < row.size(); ++j) out << ' ' << format_double(row(j));
    out << '\n';
  }
  if (!out) throw InputError("failed writing '" + path.string() + "'");
}

}  // namespace detail

// Writes the per-quantity tables (one row per successfully analysed voxel,
// in voxel order), status.txt (every voxel: ok, masked or failed) and, when
// draws were stored, the full posterior as row-major float64 blocks of
// n_draws x n_params per voxel.
inline void write_outcomes(const fs::path& dir, const Dataset& data, const DesignPair& design,
                           const std::vector<VoxelOutcome>& outcomes) {
  std::vector<std::string> rho_names;
  Index k = 0;
  for (const auto& o : outcomes) {
    if (o.ok()) {
      k = o.posterior->rho_mean.size();
      break;
    }
  }
  for (Index j = 1; j <= k; ++j) rho_names.push_back("lag" + std::to_string(j));
  std::vector<Index> act = design.x_columns_of(ColumnKind::activity);
  std::vector<std::string> act_names;
  for (Index j : act) act_names.push_back(design.x_names[static_cast<std::size_t>(j)]);

  detail::write_table(dir / "beta_mean.txt", design.x_names, outcomes, [](const VoxelPosterior& p) { return p.beta_mean; });
  detail::write_table(dir / "beta_incl.txt", design.x_names, outcomes, [](const VoxelPosterior& p) { return p.beta_incl; });
  detail::write_table(dir / "gamma_mean.txt", design.z_names, outcomes, [](const VoxelPosterior& p) { return p.gamma_mean; });
  detail::write_table(dir / "gamma_incl.txt", design.z_names, outcomes, [](const VoxelPosterior& p) { return p.gamma_incl; });
  detail::write_table(dir / "rho_mean.txt", rho_names, outcomes, [](const VoxelPosterior& p) { return p.rho_mean; });
  detail::write_table(dir / "rho_incl.txt", rho_names, outcomes, [](const VoxelPosterior& p) { return p.rho_incl; });
  detail::write_table(dir / "ppm.txt", act_names, outcomes, [&](const VoxelPosterior& p) {
    VectorXd r(static_cast<Index>(act.size()));
    for (std::size_t i = 0; i < act.size(); ++i) r(static_cast<Index>(i)) = p.beta_ppm(act[i]);
    return r;
  });
  detail::write_table(dir / "tscore.txt", act_names, outcomes, [&](const VoxelPosterior& p) {
    VectorXd r(static_cast<Index>(act.size()));
    for (std::size_t i = 0; i < act.size(); ++i) {
      const Index j = act[i];
      r(static_cast<Index>(i)) = p.beta_std(j) > 0.0 ? p.beta_mean(j) / p.beta_std(j) : 0.0;
    }
    return r;
  });
  detail::write_table(dir / "diagnostics.txt",
                      {"gamma_acceptance", "gamma_indicator_updates", "rho_exhausted", "rho_redraws", "pi_beta_mean",
                       "pi_gamma_mean"},
                      outcomes, [](const VoxelPosterior& p) {
                        VectorXd r(6);
                        r << p.acceptance_rate_gamma, static_cast<double>(p.gamma_indicator_updates),
                            static_cast<double>(p.rejected_nonstationary_count),
                            static_cast<double>(p.nonstationary_redraws), p.pi_beta_mean, p.pi_gamma_mean;
                        return r;
                      });

  {
    std::vector<const VoxelOutcome*> by_column(static_cast<std::size_t>(data.n_voxel()), nullptr);
    for (const auto& o : outcomes) by_column[static_cast<std::size_t>(o.column)] = &o;
    auto out = detail::open_out(dir / "status.txt");
    out << "# voxel_id status message\n";
    for (Index v = 0; v < data.n_voxel(); ++v) {
      const VoxelOutcome* o = by_column[static_cast<std::size_t>(v)];
      out << data.voxel_ids[static_cast<std::size_t>(v)] << ' ';
      if (!o) {
        out << "masked\n";
      } else if (o->ok()) {
        out << "ok\n";
      } else {
        std::string msg = o->error;
        for (char& c : msg) {
          if (c == '\n') c = ' ';
        }
        out << "failed " << msg << '\n';
      }
    }
  }

  auto dump = [&](const char* name, auto&& get) {
    auto out = detail::open_out(dir / name, std::ios::binary);
    for (const auto& o : outcomes) {
      if (!o.ok()) continue;
      const std::optional<MatrixXd>& m = get(*o.posterior);
      if (!m) return;
      for (Index r = 0; r < m->rows(); ++r) {
        for (Index c = 0; c < m->cols(); ++c) {
          std::uint64_t bits = 0;
          const double v = (*m)(r, c);
          std::memcpy(&bits, &v, 8);
          bits = detail::to_little_endian(bits);
          out.write(reinterpret_cast<const char*>(&bits), 8);
        }
      }
    }
  };
  const bool have_draws = std::any_of(outcomes.begin(), outcomes.end(),
                                      [](const VoxelOutcome& o) { return o.ok() && o.posterior->beta_draws; });
  if (have_draws) {
    dump("posterior_beta.bin", [](const VoxelPosterior& p) -> const std::optional<MatrixXd>& { return p.beta_draws; });
    dump("posterior_gamma.bin", [](const VoxelPosterior& p) -> const std::optional<MatrixXd>& { return p.gamma_draws; });
    dump("posterior_rho.bin", [](const VoxelPosterior& p) -> const std::optional<MatrixXd>& { return p.rho_draws; });
  }
}

inline void write_wls(const fs::path& dir, const Dataset& data, const DesignPair& design, const std::vector<Index>& voxels,
                      const WlsBatch& wls) {
  write_matrix_text(dir / "wls_weights.txt", wls.weights, "per-volume weight (mean 1)");
  auto out = detail::open_out(dir / "wls_t.txt");
  out << "# voxel_id";
  for (Index c : wls.columns) out << ' ' << design.x_names[static_cast<std::size_t>(c)];
  out << '\n';
  for (std::size_t i = 0; i < voxels.size(); ++i) {
    out << data.voxel_ids[static_cast<std::size_t>(voxels[i])];
    for (Index c = 0; c < wls.t.cols(); ++c) out << ' ' << detail::format_double(wls.t(static_cast<Index>(i), c));
    out << '\n';
  }
}

}  // namespace glmh
