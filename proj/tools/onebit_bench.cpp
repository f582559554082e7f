// Benchmark CLI: `sweep` runs the Monte Carlo NMSE/timing comparison across
// a measurement-count and activity grid, `single` reports one trial with
// per-iteration diagnostics, `selftest` runs built-in oracle checks.
#include <CLI11.hpp>

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "onebit/bench.hpp"
#include "onebit/detector.hpp"
#include "onebit/estimator.hpp"
#include "onebit/model.hpp"
#include "onebit/numerics.hpp"
#include "onebit/pipeline.hpp"
#include "onebit/rng.hpp"

namespace {

// key = value config mirroring the ExperimentSpec field names; '#' comments.
// Values already given on the command line win over file values.
struct SweepConfigTarget {
  onebit::ExperimentSpec* spec;
  std::string* out_path;
  std::string* format;
  std::string* policy;
  bool* timing;
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::string item;
  std::stringstream ss(text);
  while (ss >> item) {
    std::stringstream inner(item);
    std::string piece;
    while (std::getline(inner, piece, ','))
      if (!piece.empty()) items.push_back(piece);
  }
  return items;
}

void apply_sweep_config(const std::string& path, const CLI::App& sweep,
                        const SweepConfigTarget& target) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  auto given = [&](const char* name) { return sweep.count(name) > 0; };
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") != std::string::npos)
        throw std::runtime_error("config line " + std::to_string(line_no) + ": expected key=value");
      continue;
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "m") {
        if (!given("--m")) target.spec->m = std::stoi(value);
      } else if (key == "n_meas_grid" || key == "n-meas") {
        if (!given("--n-meas")) {
          target.spec->n_meas_grid.clear();
          for (const auto& item : split_list(value))
            target.spec->n_meas_grid.push_back(std::stoi(item));
        }
      } else if (key == "p_grid" || key == "p") {
        if (!given("--p")) {
          target.spec->p_grid.clear();
          for (const auto& item : split_list(value)) target.spec->p_grid.push_back(std::stod(item));
        }
      } else if (key == "sigma_e") {
        if (!given("--sigma-e")) target.spec->sigma_e = std::stod(value);
      } else if (key == "sigma_n") {
        if (!given("--sigma-n")) target.spec->sigma_n = std::stod(value);
      } else if (key == "sigma_r") {
        if (!given("--sigma-r")) target.spec->sigma_r = std::stod(value);
      } else if (key == "trials") {
        if (!given("--trials")) target.spec->trials = std::stoi(value);
      } else if (key == "base_seed" || key == "seed") {
        if (!given("--seed")) target.spec->base_seed = std::stoull(value);
      } else if (key == "algorithms" || key == "algos") {
        if (!given("--algos")) target.spec->algorithms = split_list(value);
      } else if (key == "threads") {
        if (!given("--threads")) target.spec->max_threads = std::stoi(value);
      } else if (key == "out") {
        if (!given("--out")) *target.out_path = value;
      } else if (key == "format") {
        if (!given("--format")) *target.format = value;
      } else if (key == "infeasible_policy") {
        if (!given("--infeasible-policy")) *target.policy = value;
      } else if (key == "timing") {
        if (!given("--timing")) *target.timing = value == "true" || value == "1";
      } else {
        throw std::runtime_error("unknown key '" + key + "'");
      }
    } catch (const std::runtime_error&) {
      throw;
    } catch (const std::exception&) {
      throw std::runtime_error("config line " + std::to_string(line_no) + ": bad value for '" +
                               key + "'");
    }
  }
}

int run_sweep(const onebit::ExperimentSpec& spec, const std::string& out_path,
              const std::string& format) {
  std::printf("sweep: m=%d, %zu N values, %zu p values, %d trials, seed=%" PRIu64 "\n", spec.m,
              spec.n_meas_grid.size(), spec.p_grid.size(), spec.trials, spec.base_seed);
  const auto records = onebit::run_monte_carlo(spec);
  const auto fmt = format == "json" ? onebit::OutputFormat::json : onebit::OutputFormat::csv;
  onebit::emit_results(records, fmt, out_path);
  std::printf("wrote %zu records to %s (summary: %s.summary.csv)\n", records.size(),
              out_path.c_str(), out_path.c_str());

  std::printf("\n%-10s %6s %6s %12s %10s %7s\n", "algorithm", "N", "p", "mean_nmse_db",
              "std", "count");
  for (const auto& cell : onebit::summarize(records)) {
    std::printf("%-10s %6d %6.3g %12.3f %10.3f %7d\n", cell.algorithm.c_str(), cell.n_meas,
                cell.p, cell.mean_nmse_db, cell.std_nmse_db, cell.count);
  }
  return 0;
}

int run_single(std::uint64_t seed, const onebit::ModelParams& params) {
  params.validate();
  std::printf("single trial: m=%d N=%d p=%g sigma_e=%g sigma_n=%g sigma_r=%g seed=%" PRIu64 "\n\n",
              params.m, params.n_meas, params.p, params.sigma_e, params.sigma_n, params.sigma_r,
              seed);

  onebit::Rng rng(seed);
  onebit::Rng rng_signal = rng.split(0);
  onebit::Rng rng_meas = rng.split(1);
  const auto signal = onebit::sample_sparse_signal(params, rng_signal);
  const auto meas = onebit::generate_measurements(signal, params, rng_meas);

  std::vector<int> true_support;
  for (int j = 0; j < params.m; ++j)
    if (signal.q(j)) true_support.push_back(j);
  std::printf("true support (%zu of %d):", true_support.size(), params.m);
  for (int j : true_support) std::printf(" %d", j);
  std::printf("\n\n");

  onebit::BhtMleConfig config;
  config.observer = [](const onebit::IterationTrace& tr) {
    std::printf(
        "  iter %2d: alpha=%5.3f p_hat=%6.4f Th=%7.4f sigma_z=%6.4f support=%3d "
        "solver_iters=%3d obj=%10.4f %s%s\n",
        tr.k, tr.alpha, tr.p_hat, tr.threshold, tr.sigma_z, tr.support_size,
        tr.solver_iterations, tr.objective, tr.solver_converged ? "converged" : "not-converged",
        tr.feasible ? "" : " INFEASIBLE");
  };

  std::printf("bht_mle iterations:\n");
  const auto bht = onebit::run_bht_mle(meas.a_mat, meas.y, params.sigma_e, params.sigma_n, config);
  std::printf("\ndetected support with LLR scores (threshold %.4f):\n", bht.support.threshold);
  for (int j = 0; j < params.m; ++j) {
    if (bht.support.q_hat(j))
      std::printf("  coord %3d: score %9.4f  s_hat=%+.5f  (truth: %s)\n", j, bht.support.scores(j),
                  bht.s_hat(j), signal.q(j) ? "active" : "inactive");
  }

  const auto mle = onebit::run_mle_baseline(meas.a_mat, meas.y, params.sigma_e, params.sigma_n);
  const Eigen::VectorXd ls = onebit::least_squares_init(meas.a_mat, meas.y);

  auto flags_text = [](const std::vector<std::string>& flags) {
    std::string text;
    for (const auto& f : flags) text += " " + f;
    return text.empty() ? std::string(" none") : text;
  };
  std::printf("\nresults:\n");
  std::printf("  bht_mle: NMSE %8.3f dB  wall %.4fs  flags:%s\n",
              onebit::nmse_db(signal.s, bht.s_hat), bht.wall_time_s,
              flags_text(bht.flag_names()).c_str());
  std::printf("  mle:     NMSE %8.3f dB  wall %.4fs  flags:%s\n",
              onebit::nmse_db(signal.s, mle.s_hat), mle.wall_time_s,
              flags_text(mle.flag_names()).c_str());
  std::printf("  ls_init: NMSE %8.3f dB\n", onebit::nmse_db(signal.s, ls));
  return 0;
}

// ---------------------------------------------------------------------------
// selftest: built-in oracle checks, one line per check.

bool report(const char* name, bool ok) {
  std::printf("[%s] %s\n", ok ? " ok " : "FAIL", name);
  return ok;
}

bool selftest_kernels() {
  // high-precision reference values for ln Phi(u) and phi(u)/Phi(u)
  struct Point {
    double u, log_cdf, mills;
  };
  static const Point table[] = {
      {-40, -8.04608442013753802e+02, 4.00249688472072620e+01},
      {-20, -2.03917155371097266e+02, 2.00497530685278491e+01},
      {-10, -5.32312851505124698e+01, 1.00980932339625120e+01},
      {-8, -3.50134371599145524e+01, 8.12136811223611232e+00},
      {-4, -1.03601014865272916e+01, 4.22560714448947117e+00},
      {-1, -1.84102164500926357e+00, 1.52513527616098110e+00},
      {0, -6.93147180559945286e-01, 7.97884560802865406e-01},
      {2, -2.30129093289634899e-02, 5.52478626789899563e-02},
      {8, -6.22096057427178585e-16, 5.05227108353689510e-15},
      {37, -5.72557122252457710e-300, 2.12000655152460556e-298},
  };
  for (const auto& pt : table) {
    const double lc = onebit::log_std_normal_cdf(pt.u);
    const double im = onebit::inverse_mills(pt.u);
    if (std::fabs(lc - pt.log_cdf) > 1e-10 * std::fabs(pt.log_cdf)) return false;
    if (std::fabs(im - pt.mills) > 1e-9 * std::fabs(pt.mills)) return false;
  }
  for (double u = -8.0; u <= 8.0; u += 0.37) {
    const double total =
        std::exp(onebit::log_std_normal_cdf(u)) + std::exp(onebit::log_std_normal_cdf(-u));
    if (std::fabs(total - 1.0) > 1e-12) return false;
  }
  return true;
}

bool selftest_gradient() {
  onebit::Rng rng(202);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 1 + static_cast<int>(rng.uniform() * 5);
    const int n_meas = 5 + static_cast<int>(rng.uniform() * 35);
    onebit::ReducedProblem prob;
    prob.h_mat.resize(n, n_meas);
    prob.y.resize(n_meas);
    prob.sigma_e = 0.1;
    prob.sigma_n = 0.1;
    prob.active_index.resize(n);
    for (int k = 0; k < n; ++k) {
      prob.active_index[k] = k;
      for (int i = 0; i < n_meas; ++i) prob.h_mat(k, i) = rng.gaussian();
    }
    for (int i = 0; i < n_meas; ++i) prob.y(i) = rng.bernoulli(0.5) ? 1.0 : -1.0;
    Eigen::VectorXd v(n);
    for (int k = 0; k < n; ++k) v(k) = 0.5 * rng.gaussian();

    const Eigen::VectorXd analytic = onebit::p2_gradient(v, prob);
    const Eigen::VectorXd numeric = onebit::finite_difference_gradient(
        [&](const Eigen::VectorXd& x) { return onebit::p2_objective(x, prob); }, v, 1e-6);
    if ((analytic - numeric).norm() > 1e-5 * std::max(1.0, analytic.norm())) return false;
  }
  return true;
}

bool selftest_llr() {
  onebit::Rng rng(303);
  for (int rep = 0; rep < 20; ++rep) {
    const int m = 2 + static_cast<int>(rng.uniform() * 9);
    const int n_meas = 5 + static_cast<int>(rng.uniform() * 45);
    Eigen::MatrixXd a(m, n_meas);
    Eigen::VectorXd y(n_meas), s(m);
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < n_meas; ++i) a(j, i) = rng.gaussian();
    for (int i = 0; i < n_meas; ++i) y(i) = rng.bernoulli(0.5) ? 1.0 : -1.0;
    for (int j = 0; j < m; ++j) s(j) = rng.bernoulli(0.5) ? rng.gaussian() : 0.0;
    if (s.isZero(0.0)) s(0) = 1.0;
    const double sigma_z = 0.2 + rng.uniform();
    const int j = static_cast<int>(rng.uniform() * m);

    // brute force: two independent full log-likelihood sums
    Eigen::VectorXd s_minus = s;
    s_minus(j) = 0.0;
    double full = 0.0, reduced = 0.0;
    for (int i = 0; i < n_meas; ++i) {
      full += onebit::log_std_normal_cdf(y(i) * a.col(i).dot(s) / sigma_z);
      reduced += onebit::log_std_normal_cdf(y(i) * a.col(i).dot(s_minus) / sigma_z);
    }
    const double brute = full - reduced;
    const double incremental = onebit::activity_score(j, y, a, s, sigma_z);
    if (std::fabs(brute - incremental) > 1e-10) return false;
  }
  return true;
}

bool selftest_roundtrip() {
  onebit::Rng rng(404);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 1 + static_cast<int>(rng.uniform() * 8);
    const double sigma_e = 0.05 + 0.4 * rng.uniform();
    const double sigma_n = 0.05 + 0.4 * rng.uniform();
    Eigen::VectorXd v(n);
    for (int k = 0; k < n; ++k) v(k) = rng.gaussian();
    v *= (0.95 * rng.uniform()) / (sigma_e * v.norm());  // strictly inside the feasible ball
    const Eigen::VectorXd w = onebit::recover_amplitudes(v, sigma_e, sigma_n);
    const Eigen::VectorXd v_back =
        w / onebit::equivalent_noise_std(w.squaredNorm(), sigma_e * sigma_e, sigma_n * sigma_n);
    if ((v_back - v).norm() > 1e-10 * v.norm()) return false;
  }
  return true;
}

bool selftest_solver() {
  onebit::Rng rng(505);
  for (int rep = 0; rep < 5; ++rep) {
    const int n_meas = 30;
    onebit::ReducedProblem prob;
    prob.h_mat.resize(1, n_meas);
    prob.y.resize(n_meas);
    prob.sigma_e = 0.1;
    prob.sigma_n = 0.1;
    prob.active_index = {0};
    for (int i = 0; i < n_meas; ++i) {
      prob.h_mat(0, i) = rng.gaussian();
      prob.y(i) = rng.bernoulli(0.5) ? 1.0 : -1.0;
    }
    const auto sol = onebit::solve_p2(prob, Eigen::VectorXd::Zero(1));
    double best = std::numeric_limits<double>::infinity();
    for (double v = -5.0; v <= 5.0; v += 1e-4) {
      Eigen::VectorXd vv(1);
      vv << v;
      best = std::min(best, onebit::p2_objective(vv, prob));
    }
    if (std::fabs(sol.objective - best) > 1e-6) return false;
  }
  return true;
}

bool selftest_csv() {
  std::vector<onebit::TrialRecord> records;
  onebit::TrialRecord r;
  r.algorithm = "bht_mle";
  r.m = 20;
  r.n_meas = 40;
  r.p = 0.1;
  r.trial_index = 3;
  r.seed = 123456789;
  r.nmse_db = -17.25;
  r.wall_time_s = 0.001953125;
  r.flags = {"infeasible_projected", "solver_not_converged"};
  records.push_back(r);
  r.trial_index = 4;
  r.nmse_db = -std::numeric_limits<double>::infinity();
  r.flags.clear();
  records.push_back(r);

  std::stringstream ss;
  onebit::emit_csv(records, ss);
  return onebit::parse_csv(ss) == records;
}

int run_selftest() {
  bool ok = true;
  ok &= report("stable kernels vs frozen high-precision table", selftest_kernels());
  ok &= report("analytic gradient vs central finite differences", selftest_gradient());
  ok &= report("incremental LLR vs brute-force two-sum", selftest_llr());
  ok &= report("amplitude reparameterization round trip", selftest_roundtrip());
  ok &= report("1-d solver vs dense grid search", selftest_solver());
  ok &= report("CSV emit/parse round trip", selftest_csv());
  std::printf(ok ? "selftest: all checks passed\n" : "selftest: FAILURES\n");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"one-bit compressed sensing benchmark (BHT-MLE vs plain MLE)"};
  app.require_subcommand(0, 1);

  onebit::ExperimentSpec spec;
  std::string out_path = "results.csv";
  std::string format = "csv";
  std::string policy = "project";
  bool timing = true;

  auto* sweep = app.add_subcommand("sweep", "Monte Carlo NMSE/timing sweep over (N, p) grid");
  sweep->add_option("--m", spec.m, "signal length");
  sweep->add_option("--n-meas,--n_meas_grid", spec.n_meas_grid, "sign measurement counts")
      ->delimiter(',');
  sweep->add_option("--p,--p_grid", spec.p_grid, "activity probabilities")->delimiter(',');
  sweep->add_option("--sigma-e,--sigma_e", spec.sigma_e, "perturbation std");
  sweep->add_option("--sigma-n,--sigma_n", spec.sigma_n, "additive-noise std");
  sweep->add_option("--sigma-r,--sigma_r", spec.sigma_r, "active-amplitude std");
  sweep->add_option("--trials", spec.trials, "Monte Carlo trials per cell");
  sweep->add_option("--seed,--base_seed", spec.base_seed, "base seed for trial derivation");
  sweep->add_option("--algos,--algorithms", spec.algorithms, "subset of bht_mle,mle,ls_init")
      ->delimiter(',')
      ->check(CLI::IsMember({"bht_mle", "mle", "ls_init"}));
  sweep->add_option("--out", out_path, "output file path");
  sweep->add_option("--format", format, "output format")->check(CLI::IsMember({"csv", "json"}));
  sweep->add_option("--threads", spec.max_threads, "worker threads (0 = auto)");
  sweep->add_flag("--timing,!--no-timing", timing,
                  "record wall times (disable for byte-identical reruns)");
  sweep->add_option("--infeasible-policy", policy, "handling of infeasible ML solutions")
      ->check(CLI::IsMember({"project", "zero", "abort"}));
  std::string config_path;
  sweep->add_option("--config", config_path,
                    "key=value file mirroring the experiment fields; flags override it");

  std::uint64_t single_seed = 1;
  onebit::ModelParams single_params;
  auto* single = app.add_subcommand("single", "one verbose trial with per-iteration diagnostics");
  single->add_option("--seed", single_seed, "trial seed");
  single->add_option("--m", single_params.m, "signal length");
  single->add_option("--n-meas", single_params.n_meas, "sign measurement count");
  single->add_option("--p", single_params.p, "activity probability");
  single->add_option("--sigma-e", single_params.sigma_e, "perturbation std");
  single->add_option("--sigma-n", single_params.sigma_n, "additive-noise std");
  single->add_option("--sigma-r", single_params.sigma_r, "active-amplitude std");

  auto* selftest = app.add_subcommand("selftest", "built-in oracle and property checks");

  if (argc <= 1) {
    std::cerr << app.help() << std::endl;
    return 2;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help() << std::endl;
    return 2;
  }

  try {
    if (sweep->parsed()) {
      if (!config_path.empty()) {
        SweepConfigTarget target{&spec, &out_path, &format, &policy, &timing};
        try {
          apply_sweep_config(config_path, *sweep, target);
        } catch (const std::exception& e) {
          std::cerr << "error: " << e.what() << std::endl;
          return 2;
        }
        if (format != "csv" && format != "json") {
          std::cerr << "error: config format must be csv or json" << std::endl;
          return 2;
        }
        if (policy != "project" && policy != "zero" && policy != "abort") {
          std::cerr << "error: config infeasible_policy must be project, zero or abort"
                    << std::endl;
          return 2;
        }
      }
      spec.record_timing = timing;
      if (policy == "zero")
        spec.bht_config.infeasible_policy = onebit::InfeasiblePolicy::zero;
      else if (policy == "abort")
        spec.bht_config.infeasible_policy = onebit::InfeasiblePolicy::abort;
      return run_sweep(spec, out_path, format);
    }
    if (single->parsed()) return run_single(single_seed, single_params);
    if (selftest->parsed()) return run_selftest();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  std::cerr << app.help() << std::endl;
  return 2;
}
