#pragma once

// MCMC efficiency diagnostics: inefficiency factors (integrated
// autocorrelation time) and per-covariate-kind summaries of them.

#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "glmh/analysis.hpp"
#include "glmh/model.hpp"
#include "glmh/sampler.hpp"

namespace glmh {

enum class IactTruncation {
  initial_positive,  // stop before the first negative autocorrelation
  fixed_window,      // sum lags 1..window
};

struct IactOptions {
  IactTruncation rule = IactTruncation::initial_positive;
  std::size_t window = 100;
  std::size_t min_draws = 50;
};

// 1 + 2 sum_i r_i with empirical autocorrelations r_i (divide-by-n
// autocovariances).
inline double iact(std::span<const double> draws, const IactOptions& opt = {}) {
  const std::size_t n = draws.size();
  if (n < opt.min_draws) throw InputError("iact needs at least " + std::to_string(opt.min_draws) + " draws");
  const double mean = population_mean(draws);
  double c0 = 0.0;
  for (double v : draws) c0 += (v - mean) * (v - mean);
  if (!(c0 > 0.0)) throw NumericalError("iact undefined for a constant chain");

  const std::size_t max_lag = opt.rule == IactTruncation::fixed_window ? std::min(opt.window, n - 1) : n - 1;
  double sum = 0.0;
  for (std::size_t lag = 1; lag <= max_lag; ++lag) {
    double c = 0.0;
    for (std::size_t t = lag; t < n; ++t) c += (draws[t] - mean) * (draws[t - lag] - mean);
    const double r = c / c0;
    if (opt.rule == IactTruncation::initial_positive && r < 0.0) break;
    sum += r;
  }
  return 1.0 + 2.0 * sum;
}

struct GroupEfficiency {
  std::string group;
  double fraction_mean = 0.0;  // over datasets
  double fraction_std = 0.0;
  long n_evaluated = 0;        // voxel-parameters passing the inclusion gate
};

struct IneffReport {
  double threshold = 10.0;
  double min_inclusion = 0.3;
  std::vector<GroupEfficiency> groups;
  std::map<std::string, std::vector<double>> iact_values;  // every evaluated iact per group
  double acceptance_mean = 0.0;
  double acceptance_std = 0.0;
};

// Groups are "beta:<kind>", "gamma:<kind>" and "rho". A parameter enters
// only when its inclusion probability exceeds min_inclusion and its chain is
// not constant. `datasets` holds the voxel posteriors of each analysed
// dataset (subject); fractions are averaged over datasets.
inline IneffReport ineff_report(const std::vector<std::vector<VoxelPosterior>>& datasets, const DesignPair& design,
                                double threshold = 10.0, double min_inclusion = 0.3, const IactOptions& opt = {}) {
  IneffReport rep;
  rep.threshold = threshold;
  rep.min_inclusion = min_inclusion;

  std::vector<std::string> order;
  auto group_of = [&](const std::string& g) {
    if (std::find(order.begin(), order.end(), g) == order.end()) order.push_back(g);
    return g;
  };
  for (auto kind : design.x_kinds) group_of(std::string("beta:") + to_string(kind));
  for (auto kind : design.z_kinds) group_of(std::string("gamma:") + to_string(kind));
  group_of("rho");

  std::map<std::string, std::vector<double>> fractions;
  std::map<std::string, long> counts;
  std::vector<double> acceptance;

  for (const auto& voxels : datasets) {
    std::map<std::string, std::pair<long, long>> tally;  // (exceeding, evaluated)
    for (const auto& vp : voxels) {
      if (!vp.beta_draws || !vp.gamma_draws || !vp.rho_draws) {
        throw InputError("ineff_report needs stored posterior draws");
      }
      acceptance.push_back(vp.acceptance_rate_gamma);
      auto visit = [&](const MatrixXd& draws, const VectorXd& incl, auto&& name_of) {
        for (Index j = 0; j < draws.cols(); ++j) {
          if (!(incl(j) > min_inclusion)) continue;
          const VectorXd col = draws.col(j);
          const std::span<const double> s(col.data(), static_cast<std::size_t>(col.size()));
          if (population_std(s) == 0.0) continue;
          const double f = iact(s, opt);
          const std::string g = name_of(j);
          rep.iact_values[g].push_back(f);
          auto& [exceed, total] = tally[g];
          ++total;
          if (f > threshold) ++exceed;
        }
      };
      visit(*vp.beta_draws, vp.beta_incl,
            [&](Index j) { return std::string("beta:") + to_string(design.x_kinds[static_cast<std::size_t>(j)]); });
      visit(*vp.gamma_draws, vp.gamma_incl,
            [&](Index j) { return std::string("gamma:") + to_string(design.z_kinds[static_cast<std::size_t>(j)]); });
      visit(*vp.rho_draws, vp.rho_incl, [](Index) { return std::string("rho"); });
    }
    for (const auto& [g, t] : tally) {
      if (t.second == 0) continue;
      fractions[g].push_back(static_cast<double>(t.first) / static_cast<double>(t.second));
      counts[g] += t.second;
    }
  }

  for (const auto& g : order) {
    auto it = fractions.find(g);
    if (it == fractions.end()) continue;
    const std::span<const double> f(it->second);
    rep.groups.push_back({g, population_mean(f), population_std(f), counts[g]});
  }
  if (!acceptance.empty()) {
    rep.acceptance_mean = population_mean(acceptance);
    rep.acceptance_std = population_std(acceptance);
  }
  return rep;
}

// Plain-text table: one row per covariate group.
inline std::string format_ineff_report(const IneffReport& rep) {
  std::ostringstream os;
  os << "# Proportion of included parameters (IPr > " << rep.min_inclusion << ") with inefficiency factor > "
     << rep.threshold << '\n';
  os << "group\tmean\tstd\tn\n";
  for (const auto& g : rep.groups) {
    os << g.group << '\t' << g.fraction_mean << '\t' << g.fraction_std << '\t' << g.n_evaluated << '\n';
  }
  os << "# gamma acceptance rate: " << rep.acceptance_mean << " +- " << rep.acceptance_std << '\n';
  return os.str();
}

}  // namespace glmh
