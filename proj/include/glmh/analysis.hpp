#pragma once

// Posterior summaries and evaluation curves.
//
// Conventions: standard deviations divide by n; a PPM is the one-sided
// Pr(beta_j > 0) over retained draws, where draws with the indicator off
// (beta_j = 0) count against activation.

#include <algorithm>
#include <functional>
#include <limits>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "glmh/model.hpp"

namespace glmh {

inline double ppm(std::span<const double> draws) {
  if (draws.empty()) throw InputError("ppm needs at least one draw");
  const auto positive = std::count_if(draws.begin(), draws.end(), [](double b) { return b > 0.0; });
  return static_cast<double>(positive) / static_cast<double>(draws.size());
}

inline double population_mean(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

inline double population_std(std::span<const double> x) {
  const double m = population_mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size()));
}

// Posterior mean over posterior standard deviation.
inline double bayes_tscore(std::span<const double> draws) {
  if (draws.size() < 2) throw InputError("t-score needs at least two draws");
  const double sd = population_std(draws);
  if (!(sd > 0.0)) throw NumericalError("t-score undefined: draws have zero spread");
  return population_mean(draws) / sd;
}

struct GroupPosterior {
  VectorXd draws;
  std::vector<std::size_t> excluded_subjects;  // zero spread, dropped from the weighted mean
};

// Draw r of the group effect is the average over subjects of draw r, each
// subject optionally scaled by the inverse of its posterior std.
inline GroupPosterior group_posterior(const std::vector<VectorXd>& subject_draws, bool weighted) {
  if (subject_draws.empty()) throw InputError("group posterior needs at least one subject");
  const Index n = subject_draws.front().size();
  for (const auto& d : subject_draws) {
    if (d.size() != n) throw InputError("all subjects need the same number of draws");
  }
  GroupPosterior out;
  out.draws = VectorXd::Zero(n);
  double used = 0.0;
  for (std::size_t s = 0; s < subject_draws.size(); ++s) {
    const VectorXd& d = subject_draws[s];
    double w = 1.0;
    if (weighted) {
      const double sd = population_std(std::span<const double>(d.data(), static_cast<std::size_t>(d.size())));
      if (!(sd > 0.0)) {
        out.excluded_subjects.push_back(s);
        continue;
      }
      w = 1.0 / sd;
    }
    out.draws += w * d;
    used += 1.0;
  }
  if (used == 0.0) throw NumericalError("every subject has zero posterior spread");
  out.draws /= used;
  return out;
}

struct EvalCurve {
  std::vector<double> thresholds;  // descending; a voxel is called active when score >= threshold
  std::vector<double> tpr;
  std::vector<double> fpr;
  double auc = 0.0;
};

namespace detail {

inline void check_truth(std::size_t n_scores, const std::vector<bool>& truth, std::size_t& n_pos, std::size_t& n_neg) {
  if (truth.size() != n_scores) throw InputError("truth mask and scores differ in length");
  n_pos = static_cast<std::size_t>(std::count(truth.begin(), truth.end(), true));
  n_neg = truth.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw InputError("ROC needs both positive and negative voxels");
}

inline double trapezoid(const std::vector<double>& fpr, const std::vector<double>& tpr) {
  double auc = 0.0;
  for (std::size_t i = 1; i < fpr.size(); ++i) auc += (fpr[i] - fpr[i - 1]) * (tpr[i] + tpr[i - 1]) * 0.5;
  return auc;
}

inline EvalCurve sweep(std::span<const double> scores, const std::vector<bool>& truth, std::vector<double> thresholds,
                       double slack) {
  std::size_t n_pos = 0, n_neg = 0;
  check_truth(scores.size(), truth, n_pos, n_neg);
  EvalCurve c;
  c.thresholds.push_back(std::numeric_limits<double>::infinity());
  c.tpr.push_back(0.0);
  c.fpr.push_back(0.0);
  for (double thr : thresholds) {
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= thr - slack) (truth[i] ? tp : fp)++;
    }
    c.thresholds.push_back(thr);
    c.tpr.push_back(static_cast<double>(tp) / static_cast<double>(n_pos));
    c.fpr.push_back(static_cast<double>(fp) / static_cast<double>(n_neg));
  }
  c.thresholds.push_back(-std::numeric_limits<double>::infinity());
  c.tpr.push_back(1.0);
  c.fpr.push_back(1.0);
  c.auc = trapezoid(c.fpr, c.tpr);
  return c;
}

}  // namespace detail

// PPM thresholds 1.00, 0.99, ..., 0.01, closed by the (0,0) and (1,1) corners.
inline EvalCurve roc_curve_ppm(std::span<const double> ppms, const std::vector<bool>& truth) {
  std::vector<double> thr;
  for (int i = 100; i >= 1; --i) thr.push_back(static_cast<double>(i) / 100.0);
  return detail::sweep(ppms, truth, std::move(thr), 1e-12);
}

// Exact sweep over every distinct score; the AUC equals the Mann-Whitney
// statistic with ties counted as one half.
inline EvalCurve roc_curve_scores(std::span<const double> scores, const std::vector<bool>& truth) {
  std::vector<double> thr(scores.begin(), scores.end());
  std::sort(thr.begin(), thr.end(), std::greater<>());
  thr.erase(std::unique(thr.begin(), thr.end()), thr.end());
  return detail::sweep(scores, truth, std::move(thr), 0.0);
}

}  // namespace glmh
