#pragma once

// Command-line front end: flag parsing, run preparation (dataset, design,
// selection sets, priors), the run manifest and the batch entry point.
//
//   glmh data.txt -designfiles activity.txt -gammacovariates gamma.txt
//        -ontrialbeta trialbeta.txt -ontrialgamma trialgamma.txt
//        -ontrialrho trialrho.txt -mask mask.txt -regressmotion motion.txt
//        -regressmotionderiv motionderiv.txt -draws 1000 -burnin 1000
//        -savefullposterior -updateinclusionprob
//
// Design column indices (for -gammacovariates and -ontrialbeta) count from 0
// over [intercept, activity..., trends..., motion..., motion derivative...].
// -ontrialgamma indexes the variance design after -gammacovariates has been
// applied; -ontrialrho indexes lags (0 is lag 1). Without an on-trial file
// every coefficient except the intercept is subject to selection.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "glmh/batch.hpp"
#include "glmh/io.hpp"
#include "glmh/model.hpp"
#include "glmh/sampler.hpp"
#include "glmh/simulate.hpp"

#ifndef GLMH_VERSION
#define GLMH_VERSION "0.1.0"
#endif

namespace glmh {

inline constexpr const char* version = GLMH_VERSION;

class CliError : public InputError {
 public:
  explicit CliError(std::vector<std::string> problems)
      : InputError(join(problems)), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& p) {
    std::string s = std::to_string(p.size()) + " problem(s) with the command line:";
    for (const auto& x : p) s += "\n  " + x;
    return s;
  }
  std::vector<std::string> problems_;
};

struct RunConfig {
  std::vector<std::string> args;  // effective argument list, replayable
  std::string dataset;
  std::string design_file;
  std::string gamma_covariates;  // path, "all", or empty for the homoscedastic model
  std::string ontrial_beta, ontrial_gamma, ontrial_rho;
  std::string mask;  // dataset mask name or 0/1 file
  std::string motion, motion_derivative;
  int n_trends = 3;
  SamplerConfig sampler;
  bool update_pi = false;
  int threads = 1;
  std::string output = "glmh_out";
  std::string simulate;
  bool analyze = true;
  bool wls = false;
  bool dry_run = false;
  std::string manifest_in;
};

inline std::string usage() {
  return "usage: glmh <dataset header> -designfiles <activity.txt> [options]\n"
         "       glmh -simulate <spec.txt> [options]\n"
         "       glmh -manifest <manifest.json> [overrides]\n"
         "\n"
         "model\n"
         "  -designfiles <file>        activity covariates, one row per volume\n"
         "  -regressmotion <file>      motion covariates, one row per volume\n"
         "  -regressmotionderiv <file> motion derivative (default: backward difference of motion)\n"
         "  -nomotionderiv             do not add motion derivative covariates\n"
         "  -trends <n>                polynomial drift terms (default 3)\n"
         "  -gammacovariates <file|all> design columns used for the variance (default: intercept only)\n"
         "  -ontrialbeta <file>        mean covariates subject to selection\n"
         "  -ontrialgamma <file>       variance covariates subject to selection\n"
         "  -ontrialrho <file>         AR lags subject to selection (0 = lag 1)\n"
         "  -arorder <k>               AR order (default 4)\n"
         "  -updateinclusionprob       draw pi_beta and pi_gamma every iteration\n"
         "sampler\n"
         "  -draws <n> -burnin <n>     retained and discarded iterations (default 1000 each)\n"
         "  -seed <n>                  global seed (default 0)\n"
         "  -savefullposterior         also write every retained draw\n"
         "run\n"
         "  -mask <name|file>          analyse only voxels with mask value 1\n"
         "  -threads <n>               worker threads, 0 = all cores (default 1)\n"
         "  -output <dir>              output directory (default glmh_out)\n"
         "  -simulate <spec>           write a synthetic dataset and ground truth, then analyse it\n"
         "  -noanalysis                stop after simulating\n"
         "  -wls                       also fit the per-volume weighted least squares baseline\n"
         "  -dryrun                    validate and print the manifest without running\n"
         "  -manifest <file>           replay the arguments stored in a manifest\n";
}

namespace detail {

inline nlohmann::json load_json(const fs::path& path) {
  auto in = open_in(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

template <class T>
bool parse_number(const std::string& s, T& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

inline Index count_rows(const std::string& path) { return read_matrix_text(path).rows(); }

}  // namespace detail

// Flags may repeat; the last occurrence wins, which is how manifest replay
// applies overrides. All problems are collected and reported together.
inline RunConfig parse_cli(const std::vector<std::string>& argv_in) {
  std::vector<std::string> problems;
  std::vector<std::string> args = argv_in;

  // Manifest replay: splice the stored arguments in front of the rest.
  for (std::size_t i = 0; i + 1 < args.size(); ++i) {
    if (args[i] != "-manifest") continue;
    const std::string path = args[i + 1];
    std::vector<std::string> rest;
    for (std::size_t j = 0; j < args.size(); ++j) {
      if (j != i && j != i + 1) rest.push_back(args[j]);
    }
    try {
      const auto m = detail::load_json(path);
      std::vector<std::string> stored = m.at("args").get<std::vector<std::string>>();
      stored.insert(stored.end(), rest.begin(), rest.end());
      args = std::move(stored);
    } catch (const std::exception& e) {
      problems.push_back("cannot replay manifest '" + path + "': " + e.what());
      args = rest;
    }
    break;
  }

  RunConfig cfg;
  cfg.args = args;
  auto value = [&](std::size_t& i) -> std::optional<std::string> {
    if (i + 1 >= args.size()) {
      problems.push_back(args[i] + " needs a value");
      return std::nullopt;
    }
    return args[++i];
  };
  auto integer = [&](std::size_t& i, auto& dst, long lo) {
    const std::string flag = args[i];
    if (auto v = value(i)) {
      long long n = 0;
      if (!detail::parse_number(*v, n) || n < lo) {
        problems.push_back(flag + " expects an integer >= " + std::to_string(lo) + ", got '" + *v + "'");
      } else {
        dst = static_cast<std::remove_reference_t<decltype(dst)>>(n);
      }
    }
  };
  auto text = [&](std::size_t& i, std::string& dst) {
    if (auto v = value(i)) dst = *v;
  };

  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a == "-designfiles") text(i, cfg.design_file);
    else if (a == "-gammacovariates") text(i, cfg.gamma_covariates);
    else if (a == "-ontrialbeta") text(i, cfg.ontrial_beta);
    else if (a == "-ontrialgamma") text(i, cfg.ontrial_gamma);
    else if (a == "-ontrialrho") text(i, cfg.ontrial_rho);
    else if (a == "-mask") text(i, cfg.mask);
    else if (a == "-regressmotion") text(i, cfg.motion);
    else if (a == "-regressmotionderiv") text(i, cfg.motion_derivative);
    else if (a == "-nomotionderiv") cfg.motion_derivative = "none";
    else if (a == "-trends") integer(i, cfg.n_trends, 0);
    else if (a == "-draws") integer(i, cfg.sampler.n_draws, 1);
    else if (a == "-burnin") integer(i, cfg.sampler.n_burnin, 0);
    else if (a == "-arorder") integer(i, cfg.sampler.ar_order, 1);
    else if (a == "-seed") integer(i, cfg.sampler.seed, 0);
    else if (a == "-threads") integer(i, cfg.threads, 0);
    else if (a == "-savefullposterior") cfg.sampler.store_full_posterior = true;
    else if (a == "-updateinclusionprob" || a == "-updateinclusion") cfg.update_pi = true;
    else if (a == "-output") text(i, cfg.output);
    else if (a == "-simulate") text(i, cfg.simulate);
    else if (a == "-noanalysis") cfg.analyze = false;
    else if (a == "-wls") cfg.wls = true;
    else if (a == "-dryrun") cfg.dry_run = true;
    else if (a == "-manifest") text(i, cfg.manifest_in);
    else if (!a.empty() && a[0] == '-') problems.push_back("unknown flag " + a);
    else cfg.dataset = a;
  }

  // Files must exist and agree on the number of volumes.
  auto must_exist = [&](const std::string& path, const char* what) {
    if (!path.empty() && !fs::exists(path)) problems.push_back(std::string(what) + " '" + path + "' does not exist");
  };
  must_exist(cfg.dataset, "dataset");
  must_exist(cfg.design_file, "design file");
  if (cfg.gamma_covariates != "all") must_exist(cfg.gamma_covariates, "gamma covariate file");
  must_exist(cfg.ontrial_beta, "on-trial beta file");
  must_exist(cfg.ontrial_gamma, "on-trial gamma file");
  must_exist(cfg.ontrial_rho, "on-trial rho file");
  must_exist(cfg.motion, "motion file");
  if (cfg.motion_derivative != "none") must_exist(cfg.motion_derivative, "motion derivative file");
  must_exist(cfg.simulate, "simulation spec");

  if (cfg.simulate.empty()) {
    if (cfg.dataset.empty()) problems.push_back("no dataset given (or use -simulate)");
    if (cfg.design_file.empty()) problems.push_back("-designfiles is required");
  } else if (!cfg.dataset.empty()) {
    problems.push_back("give either a dataset or -simulate, not both");
  }

  if (problems.empty() && !cfg.dataset.empty()) {
    std::optional<long> n_time;
    try {
      const auto kv = read_key_values(cfg.dataset);
      long t = 0;
      if (auto it = kv.find("n_time"); it != kv.end() && detail::parse_number(it->second, t)) n_time = t;
    } catch (const std::exception& e) {
      problems.push_back(e.what());
    }
    auto check_rows = [&](const std::string& path, const char* what) {
      if (path.empty() || path == "none" || !n_time) return;
      try {
        const Index rows = detail::count_rows(path);
        if (rows != *n_time) {
          problems.push_back(std::string(what) + " '" + path + "' has " + std::to_string(rows) +
                             " rows but the dataset has " + std::to_string(*n_time) + " volumes");
        }
      } catch (const std::exception& e) {
        problems.push_back(e.what());
      }
    };
    check_rows(cfg.design_file, "design file");
    check_rows(cfg.motion, "motion file");
    check_rows(cfg.motion_derivative, "motion derivative file");
  }

  if (!problems.empty()) throw CliError(std::move(problems));
  return cfg;
}

inline RunConfig parse_cli(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return parse_cli(args);
}

// key=value simulation spec; every key is optional.
inline SimulationSpec load_simulation_spec(const fs::path& path) {
  const auto kv = read_key_values(path);
  SimulationSpec s;
  auto num = [&](const std::string& key, auto& dst) {
    auto it = kv.find(key);
    if (it == kv.end()) return;
    using T = std::remove_reference_t<decltype(dst)>;
    bool ok = false;
    if constexpr (std::is_same_v<T, double>) {
      ok = detail::parse_double(it->second, dst);
    } else {
      ok = detail::parse_number(it->second, dst);
    }
    if (!ok) throw InputError(path.string() + ": bad value '" + it->second + "' for " + key);
  };
  for (const auto& [k, v] : kv) {
    static const std::vector<std::string> known{
        "width",     "height",        "n_time",          "n_activity",  "tr",         "hetero_type",
        "hetero_level", "hetero_fraction", "active_fraction", "ar_noise", "intercept", "intercept_sd",
        "trend_sd",  "nuisance_sd",   "n_spikes",        "spike_size",  "motion_step_sd", "motion",     "seed"};
    if (std::find(known.begin(), known.end(), k) == known.end()) {
      throw InputError(path.string() + ": unknown key '" + k + "'");
    }
  }
  num("width", s.width);
  num("height", s.height);
  num("n_time", s.n_time);
  num("n_activity", s.n_activity);
  num("tr", s.tr);
  num("hetero_level", s.hetero_level);
  num("hetero_fraction", s.hetero_fraction);
  num("active_fraction", s.active_fraction);
  num("intercept", s.intercept);
  num("intercept_sd", s.intercept_sd);
  num("trend_sd", s.trend_sd);
  num("nuisance_sd", s.nuisance_sd);
  num("n_spikes", s.n_spikes);
  num("spike_size", s.spike_size);
  num("motion_step_sd", s.motion_step_sd);
  num("seed", s.seed);
  if (auto it = kv.find("hetero_type"); it != kv.end()) s.hetero_type = parse_hetero_type(it->second);
  if (auto it = kv.find("ar_noise"); it != kv.end()) {
    if (it->second != "0" && it->second != "1") throw InputError(path.string() + ": ar_noise must be 0 or 1");
    s.ar_noise = it->second == "1";
  }
  if (auto it = kv.find("motion"); it != kv.end()) {
    s.motion = read_matrix_text(detail::resolve(path.parent_path(), it->second), s.n_time);
  }
  s.validate();
  return s;
}

// voxel_id region beta... gamma...
inline void write_ground_truth(const fs::path& path, const SimulatedData& sim) {
  auto out = detail::open_out(path);
  out << "# voxel_id region";
  for (const auto& n : sim.design.x_names) out << " beta:" << n;
  for (const auto& n : sim.design.z_names) out << " gamma:" << n;
  out << '\n';
  for (const auto& t : sim.truth) {
    out << t.voxel_id << ' ' << to_string(t.region);
    for (Index j = 0; j < t.beta.size(); ++j) out << ' ' << detail::format_double(t.beta(j));
    for (Index j = 0; j < t.gamma.size(); ++j) out << ' ' << detail::format_double(t.gamma(j));
    out << '\n';
  }
  out << "# rho";
  for (Index j = 0; j < sim.rho.size(); ++j) out << ' ' << detail::format_double(sim.rho(j));
  out << '\n';
}

struct PreparedRun {
  Dataset data;
  DesignPair design;
  PriorConfig priors;
  SamplerConfig sampler;
  std::vector<Index> voxels;  // dataset columns to analyse
  std::optional<SimulatedData> simulation;
};

namespace detail {

inline void apply_on_trial(Indicators& forced, const std::vector<Index>& on_trial, const std::string& what) {
  forced.setConstant(true);
  for (Index j : on_trial) {
    if (j >= forced.size()) {
      throw InputError(what + " index " + std::to_string(j) + " out of range [0, " + std::to_string(forced.size()) +
                       ")");
    }
    forced(j) = false;
  }
}

}  // namespace detail

inline PreparedRun prepare_run(const RunConfig& cfg) {
  PreparedRun run;
  DesignInputs in;
  in.n_trends = cfg.n_trends;
  in.use_motion_derivative = cfg.motion_derivative != "none";

  if (!cfg.simulate.empty()) {
    SimulatedData sim = simulate_dataset(load_simulation_spec(cfg.simulate));
    run.data = sim.dataset;
    in.activity = sim.activity;
    in.motion = sim.motion;
    run.simulation = std::move(sim);
  } else {
    run.data = load_dataset(cfg.dataset);
  }
  const Index T = run.data.n_time();
  if (!cfg.design_file.empty()) in.activity = read_matrix_text(cfg.design_file, T);
  if (!cfg.motion.empty()) in.motion = read_matrix_text(cfg.motion, T);
  if (!cfg.motion_derivative.empty() && cfg.motion_derivative != "none") {
    in.motion_derivative = read_matrix_text(cfg.motion_derivative, T);
  }
  if (in.activity.cols() == 0) throw InputError("the design needs at least one activity covariate");
  run.design = build_design(in);

  if (cfg.gamma_covariates.empty()) {
    run.design = homoscedastic(run.design);
  } else if (cfg.gamma_covariates != "all") {
    select_variance_columns(run.design, read_index_list(cfg.gamma_covariates));
  }
  if (!cfg.ontrial_beta.empty()) {
    detail::apply_on_trial(run.design.forced_in_mean, read_index_list(cfg.ontrial_beta), "on-trial beta");
  }
  if (!cfg.ontrial_gamma.empty()) {
    detail::apply_on_trial(run.design.forced_in_var, read_index_list(cfg.ontrial_gamma), "on-trial gamma");
  }
  run.design.forced_in_mean(0) = true;
  run.design.forced_in_var(0) = true;

  run.sampler = cfg.sampler;
  run.sampler.validate(T);
  run.priors = PriorConfig::defaults(run.design, run.sampler.ar_order);
  run.priors.update_pi = cfg.update_pi;
  if (!cfg.ontrial_rho.empty()) {
    detail::apply_on_trial(run.priors.forced_in_rho, read_index_list(cfg.ontrial_rho), "on-trial rho");
  }
  run.priors.validate(run.design);

  const std::vector<std::uint8_t>* mask = nullptr;
  std::vector<std::uint8_t> file_mask;
  if (!cfg.mask.empty()) {
    if (auto it = run.data.masks.find(cfg.mask); it != run.data.masks.end()) {
      mask = &it->second;
    } else if (fs::exists(cfg.mask)) {
      file_mask = read_mask(cfg.mask, run.data.n_voxel());
      mask = &file_mask;
    } else {
      throw InputError("mask '" + cfg.mask + "' is neither a dataset mask nor a file");
    }
  }
  run.voxels = masked_columns(run.data, mask);
  return run;
}

// Everything needed to reproduce the run; wall time and voxel errors are
// added once the run finishes.
inline nlohmann::json manifest_json(const RunConfig& cfg, const PreparedRun& run) {
  nlohmann::json j;
  j["version"] = version;
  j["args"] = cfg.args;
  j["inputs"] = {{"dataset", cfg.dataset},           {"designfiles", cfg.design_file},
                 {"gammacovariates", cfg.gamma_covariates}, {"ontrialbeta", cfg.ontrial_beta},
                 {"ontrialgamma", cfg.ontrial_gamma}, {"ontrialrho", cfg.ontrial_rho},
                 {"mask", cfg.mask},                 {"regressmotion", cfg.motion},
                 {"regressmotionderiv", cfg.motion_derivative}, {"simulate", cfg.simulate}};
  j["sampler"] = {{"draws", run.sampler.n_draws},
                  {"burnin", run.sampler.n_burnin},
                  {"ar_order", run.sampler.ar_order},
                  {"seed", run.sampler.seed},
                  {"gamma_indicator_rate", run.sampler.gamma_indicator_rate},
                  {"newton_steps", run.sampler.gamma.newton_steps},
                  {"proposal_df", run.sampler.gamma.proposal_df},
                  {"expected_hessian", run.sampler.gamma.use_expected_hessian},
                  {"max_stationarity_redraws", run.sampler.max_stationarity_redraws},
                  {"save_full_posterior", run.sampler.store_full_posterior},
                  {"update_inclusion_prob", run.priors.update_pi}};
  j["threads"] = cfg.threads;
  j["output"] = cfg.output;
  j["wls"] = cfg.wls;
  j["n_time"] = run.data.n_time();
  j["n_voxel"] = run.data.n_voxel();
  j["n_analysed"] = run.voxels.size();
  j["layout"] = run.data.layout;
  auto forced_list = [](const Indicators& f) {
    std::vector<Index> v;
    for (Index i = 0; i < f.size(); ++i) {
      if (!f(i)) v.push_back(i);
    }
    return v;
  };
  j["design"] = {{"mean_columns", run.design.x_names},
                 {"variance_columns", run.design.z_names},
                 {"on_trial_mean", forced_list(run.design.forced_in_mean)},
                 {"on_trial_variance", forced_list(run.design.forced_in_var)},
                 {"on_trial_lags", forced_list(run.priors.forced_in_rho)}};
  j["conventions"] = {{"ppm", "Pr(beta > 0) over retained draws; draws with the indicator off count as beta = 0"},
                      {"std", "population (divide by n)"},
                      {"seed", "per-voxel seed = splitmix64 mix of (seed, voxel_id)"}};
  return j;
}

struct BatchSummary {
  std::size_t n_ok = 0;
  std::size_t n_failed = 0;
  std::size_t n_masked = 0;
  int exit_code() const { return n_failed == 0 ? 0 : 1; }
};

// Executes a parsed configuration and writes everything under cfg.output.
inline BatchSummary run_batch(const RunConfig& cfg, std::ostream& log = std::cerr) {
  const auto start = std::chrono::steady_clock::now();
  PreparedRun run = prepare_run(cfg);
  nlohmann::json manifest = manifest_json(cfg, run);
  const fs::path out_dir(cfg.output);

  if (cfg.dry_run) {
    std::cout << manifest.dump(2) << '\n';
    return {};
  }
  fs::create_directories(out_dir);

  if (run.simulation) {
    const fs::path sim_dir = out_dir / "simulated";
    save_dataset(sim_dir / "dataset.txt", run.simulation->dataset);
    write_matrix_text(sim_dir / "activity.txt", run.simulation->activity);
    write_matrix_text(sim_dir / "motion.txt", run.simulation->motion);
    write_ground_truth(sim_dir / "truth.txt", *run.simulation);
    log << "simulated dataset written to " << sim_dir.string() << '\n';
  }

  BatchSummary summary;
  summary.n_masked = static_cast<std::size_t>(run.data.n_voxel()) - run.voxels.size();
  if (cfg.analyze) {
    log << "analysing " << run.voxels.size() << " voxels on " << resolve_threads(cfg.threads) << " thread(s)\n";
    const auto outcomes = analyze_voxels(run.data, run.design, run.priors, run.sampler, run.voxels, cfg.threads);
    write_outcomes(out_dir, run.data, run.design, outcomes);
    nlohmann::json errors = nlohmann::json::array();
    for (const auto& o : outcomes) {
      if (o.ok()) {
        ++summary.n_ok;
      } else {
        ++summary.n_failed;
        errors.push_back({{"voxel_id", o.voxel_id}, {"error", o.error}});
      }
    }
    manifest["voxel_errors"] = errors;
    if (cfg.wls) write_wls(out_dir, run.data, run.design, run.voxels, run_wls(run.data, run.design, run.voxels));
  }
  manifest["wall_time_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  manifest["summary"] = {{"ok", summary.n_ok}, {"failed", summary.n_failed}, {"masked", summary.n_masked}};
  auto out = detail::open_out(out_dir / "manifest.json");
  out << manifest.dump(2) << '\n';
  log << summary.n_ok << " ok, " << summary.n_failed << " failed, " << summary.n_masked << " masked\n";
  return summary;
}

}  // namespace glmh
