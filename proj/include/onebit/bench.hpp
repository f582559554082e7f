// Monte Carlo experiment harness: sweeps measurement counts and activity
// levels, runs every requested algorithm on identical data per trial, and
// emits machine-readable trial records plus a derivable summary.
#pragma once

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "onebit/model.hpp"
#include "onebit/pipeline.hpp"
#include "onebit/rng.hpp"

namespace onebit {

struct ExperimentSpec {
  int m = 200;
  std::vector<int> n_meas_grid = {400, 500, 600, 700, 800};
  std::vector<double> p_grid = {0.1, 0.2};
  double sigma_e = 0.1;
  double sigma_n = 0.1;
  double sigma_r = 1.0;
  int trials = 100;
  std::uint64_t base_seed = 1;
  std::vector<std::string> algorithms = {"bht_mle", "mle", "ls_init"};
  BhtMleConfig bht_config;
  bool record_timing = true;  // false writes wall_time_s as 0 for byte-stable reruns
  int max_threads = 0;        // 0 = hardware concurrency; ONEBIT_BHT_THREADS caps either way

  void validate() const {
    if (trials < 1) throw std::invalid_argument("ExperimentSpec: trials must be >= 1");
    if (n_meas_grid.empty() || p_grid.empty() || algorithms.empty())
      throw std::invalid_argument("ExperimentSpec: grids and algorithm list must be non-empty");
    for (const auto& algo : algorithms)
      if (algo != "bht_mle" && algo != "mle" && algo != "ls_init")
        throw std::invalid_argument("ExperimentSpec: unknown algorithm '" + algo + "'");
    for (int n : n_meas_grid) ModelParams{m, n, p_grid.front(), sigma_e, sigma_n, sigma_r}.validate();
    for (double p : p_grid) ModelParams{m, n_meas_grid.front(), p, sigma_e, sigma_n, sigma_r}.validate();
  }
};

struct TrialRecord {
  std::string algorithm;
  int m = 0;
  int n_meas = 0;
  double p = 0.0;
  int trial_index = 0;
  std::uint64_t seed = 0;
  double nmse_db = 0.0;  // -inf marks exact recovery
  double wall_time_s = 0.0;
  std::vector<std::string> flags;

  bool operator==(const TrialRecord&) const = default;
};

// 20 log10(||s - s_hat|| / ||s||); exact recovery maps to -inf.
inline double nmse_db(const Eigen::VectorXd& s_true, const Eigen::VectorXd& s_hat) {
  if (s_true.size() != s_hat.size()) throw std::invalid_argument("nmse_db: length mismatch");
  const double ref = s_true.norm();
  if (ref == 0.0) throw std::invalid_argument("nmse_db: zero reference signal");
  const double err = (s_true - s_hat).norm();
  if (err == 0.0) return -std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(err / ref);
}

namespace detail {

inline int worker_count(int requested) {
  int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* cap = std::getenv("ONEBIT_BHT_THREADS")) {
    const int limit = std::atoi(cap);
    if (limit >= 1 && limit < n) n = limit;
  }
  return n;
}

// Shortest round-trip decimal representation; infinities as bare inf/-inf.
inline std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& text) {
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{}) throw std::invalid_argument("parse_double: '" + text + "'");
  return v;
}

inline std::string join_flags(const std::vector<std::string>& flags) {
  std::string out;
  for (size_t i = 0; i < flags.size(); ++i) {
    if (i) out += ';';
    out += flags[i];
  }
  return out;
}

inline std::vector<std::string> split_flags(const std::string& text) {
  std::vector<std::string> out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) out.push_back(item);
  return out;
}

}  // namespace detail

// Runs every (p, N, trial) cell: one data draw per cell seeded by a stable
// hash of (base_seed, p-index, N, trial), then every requested algorithm on
// that same draw. Trials run on a worker pool; record order is by
// (algorithm, p, n_meas, trial_index) regardless of completion order.
// Timing covers the recovery call only, never data generation.
inline std::vector<TrialRecord> run_monte_carlo(const ExperimentSpec& spec) {
  spec.validate();

  struct Task {
    int p_index;
    int n_meas;
    int trial;
  };
  std::vector<Task> tasks;
  for (int pi = 0; pi < static_cast<int>(spec.p_grid.size()); ++pi)
    for (int n : spec.n_meas_grid)
      for (int t = 0; t < spec.trials; ++t) tasks.push_back({pi, n, t});

  const int n_algos = static_cast<int>(spec.algorithms.size());
  std::vector<TrialRecord> records(tasks.size() * n_algos);

  auto run_task = [&](size_t task_idx) {
    const Task& task = tasks[task_idx];
    const double p = spec.p_grid[task.p_index];
    const ModelParams params{spec.m,       task.n_meas,  p,
                             spec.sigma_e, spec.sigma_n, spec.sigma_r};
    const std::uint64_t seed =
        derive_seed(spec.base_seed, static_cast<std::uint64_t>(task.p_index),
                    static_cast<std::uint64_t>(task.n_meas), static_cast<std::uint64_t>(task.trial));
    Rng rng(seed);
    Rng rng_signal = rng.split(0);
    Rng rng_meas = rng.split(1);
    const SparseSignal signal = sample_sparse_signal(params, rng_signal);
    const MeasurementSet meas = generate_measurements(signal, params, rng_meas);

    for (int ai = 0; ai < n_algos; ++ai) {
      const std::string& algo = spec.algorithms[ai];
      TrialRecord rec;
      rec.algorithm = algo;
      rec.m = spec.m;
      rec.n_meas = task.n_meas;
      rec.p = p;
      rec.trial_index = task.trial;
      rec.seed = seed;
      const auto t0 = std::chrono::steady_clock::now();
      try {
        if (algo == "bht_mle") {
          const RecoveryResult res =
              run_bht_mle(meas.a_mat, meas.y, spec.sigma_e, spec.sigma_n, spec.bht_config);
          rec.nmse_db = nmse_db(signal.s, res.s_hat);
          rec.flags = res.flag_names();
        } else if (algo == "mle") {
          const RecoveryResult res = run_mle_baseline(
              meas.a_mat, meas.y, spec.sigma_e, spec.sigma_n, spec.bht_config.solver_tol,
              spec.bht_config.solver_max_iter, spec.bht_config.infeasible_policy);
          rec.nmse_db = nmse_db(signal.s, res.s_hat);
          rec.flags = res.flag_names();
        } else {  // ls_init
          rec.nmse_db = nmse_db(signal.s, least_squares_init(meas.a_mat, meas.y));
        }
      } catch (const std::exception&) {
        rec.nmse_db = std::numeric_limits<double>::quiet_NaN();
        rec.flags.push_back("failed");
      }
      rec.wall_time_s =
          spec.record_timing
              ? std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
              : 0.0;
      records[task_idx * n_algos + ai] = std::move(rec);
    }
  };

  const int n_workers = detail::worker_count(spec.max_threads);
  if (n_workers <= 1 || tasks.size() <= 1) {
    for (size_t i = 0; i < tasks.size(); ++i) run_task(i);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (int w = 0; w < n_workers; ++w)
      pool.emplace_back([&] {
        for (size_t i = next.fetch_add(1); i < tasks.size(); i = next.fetch_add(1)) run_task(i);
      });
    for (auto& th : pool) th.join();
  }

  std::sort(records.begin(), records.end(), [](const TrialRecord& a, const TrialRecord& b) {
    return std::tie(a.algorithm, a.p, a.n_meas, a.trial_index) <
           std::tie(b.algorithm, b.p, b.n_meas, b.trial_index);
  });
  return records;
}

inline constexpr const char* kCsvHeader =
    "algorithm,m,n_meas,p,trial_index,seed,nmse_db,wall_time_s,flags";

inline void emit_csv(const std::vector<TrialRecord>& records, std::ostream& out) {
  out << kCsvHeader << '\n';
  for (const auto& r : records) {
    out << r.algorithm << ',' << r.m << ',' << r.n_meas << ',' << detail::format_double(r.p) << ','
        << r.trial_index << ',' << r.seed << ',' << detail::format_double(r.nmse_db) << ','
        << detail::format_double(r.wall_time_s) << ',' << detail::join_flags(r.flags) << '\n';
  }
}

inline std::vector<TrialRecord> parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader)
    throw std::invalid_argument("parse_csv: missing or unexpected header");
  std::vector<TrialRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (line.back() == ',') fields.push_back("");  // empty trailing flags field
    if (fields.size() != 9) throw std::invalid_argument("parse_csv: malformed row: " + line);
    TrialRecord r;
    r.algorithm = fields[0];
    r.m = std::stoi(fields[1]);
    r.n_meas = std::stoi(fields[2]);
    r.p = detail::parse_double(fields[3]);
    r.trial_index = std::stoi(fields[4]);
    r.seed = std::stoull(fields[5]);
    r.nmse_db = detail::parse_double(fields[6]);
    r.wall_time_s = detail::parse_double(fields[7]);
    r.flags = detail::split_flags(fields[8]);
    records.push_back(std::move(r));
  }
  return records;
}

inline nlohmann::json to_json(const std::vector<TrialRecord>& records) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : records) {
    nlohmann::json item;
    item["algorithm"] = r.algorithm;
    item["m"] = r.m;
    item["n_meas"] = r.n_meas;
    item["p"] = r.p;
    item["trial_index"] = r.trial_index;
    item["seed"] = r.seed;
    if (std::isfinite(r.nmse_db))
      item["nmse_db"] = r.nmse_db;
    else
      item["nmse_db"] = detail::format_double(r.nmse_db);  // JSON has no inf literal
    item["wall_time_s"] = r.wall_time_s;
    item["flags"] = r.flags;
    arr.push_back(std::move(item));
  }
  return arr;
}

struct SummaryCell {
  std::string algorithm;
  int n_meas = 0;
  double p = 0.0;
  double mean_nmse_db = 0.0;
  double std_nmse_db = 0.0;
  int count = 0;       // records entering the mean (finite NMSE only)
  int n_excluded = 0;  // exact-recovery sentinels and failures left out
  double mean_wall_time_s = 0.0;
};

// Per-(algorithm, N, p) aggregation. Sentinel (-inf) and failed (nan) records
// are excluded from the mean and tallied separately so they cannot poison it.
inline std::vector<SummaryCell> summarize(const std::vector<TrialRecord>& records) {
  std::map<std::tuple<std::string, double, int>, std::vector<const TrialRecord*>> cells;
  for (const auto& r : records) cells[{r.algorithm, r.p, r.n_meas}].push_back(&r);
  std::vector<SummaryCell> out;
  for (const auto& [key, rs] : cells) {
    SummaryCell cell;
    cell.algorithm = std::get<0>(key);
    cell.p = std::get<1>(key);
    cell.n_meas = std::get<2>(key);
    double sum = 0.0, sum_sq = 0.0, time_sum = 0.0;
    for (const TrialRecord* r : rs) {
      time_sum += r->wall_time_s;
      if (!std::isfinite(r->nmse_db)) {
        ++cell.n_excluded;
        continue;
      }
      sum += r->nmse_db;
      sum_sq += r->nmse_db * r->nmse_db;
      ++cell.count;
    }
    if (cell.count > 0) {
      cell.mean_nmse_db = sum / cell.count;
      const double var = sum_sq / cell.count - cell.mean_nmse_db * cell.mean_nmse_db;
      cell.std_nmse_db = std::sqrt(std::max(0.0, var));
    }
    cell.mean_wall_time_s = rs.empty() ? 0.0 : time_sum / static_cast<double>(rs.size());
    out.push_back(std::move(cell));
  }
  return out;
}

inline void emit_summary_csv(const std::vector<SummaryCell>& cells, std::ostream& out) {
  out << "algorithm,n_meas,p,mean_nmse_db,std_nmse_db,count,n_excluded,mean_wall_time_s\n";
  for (const auto& c : cells) {
    out << c.algorithm << ',' << c.n_meas << ',' << detail::format_double(c.p) << ','
        << detail::format_double(c.mean_nmse_db) << ',' << detail::format_double(c.std_nmse_db)
        << ',' << c.count << ',' << c.n_excluded << ',' << detail::format_double(c.mean_wall_time_s)
        << '\n';
  }
}

enum class OutputFormat { csv, json };

// Writes the record file plus a companion "<path>.summary.csv". The summary
// is derivable from the records; the record file is authoritative.
inline void emit_results(const std::vector<TrialRecord>& records, OutputFormat format,
                         const std::string& path) {
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("emit_results: cannot open '" + path + "' for writing");
    if (format == OutputFormat::csv) {
      emit_csv(records, out);
    } else {
      out << to_json(records).dump(2) << '\n';
    }
    if (!out) throw std::runtime_error("emit_results: write failed for '" + path + "'");
  }
  const std::string summary_path = path + ".summary.csv";
  std::ofstream out(summary_path, std::ios::binary);
  if (!out) throw std::runtime_error("emit_results: cannot open '" + summary_path + "'");
  emit_summary_csv(summarize(records), out);
  if (!out) throw std::runtime_error("emit_results: write failed for '" + summary_path + "'");
}

}  // namespace onebit
