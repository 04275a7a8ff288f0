#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mml/model.hpp"
#include "mml/synthdata.hpp"
#include "mml/trainers.hpp"

namespace mml {

/// One row of the experiment ledger. Optional fields are null (with
/// null_reason set) when a run failed before producing them.
struct RunRecord {
  std::string run_id;
  std::string dataset_id;
  std::string algorithm;
  double lr = 0.0;
  std::uint64_t seed = 0;
  double l1 = 0.0;
  std::size_t rebalance_window = 0;
  double imbalance_tolerance = 0.0;
  std::size_t epochs_completed = 0;
  std::optional<double> best_val_acc;
  std::optional<double> test_acc;
  std::optional<double> acc_f0, acc_f0_prime, acc_f1, acc_f1_prime;
  std::optional<double> u_m0_given_m1, u_m1_given_m0;
  std::optional<double> diff_util;
  std::optional<double> diff_speed_at_t;
  std::optional<std::size_t> horizon_t;
  std::optional<double> sparsity;  // R(f)
  double wall_seconds = 0.0;
  std::string status = "ok";       // ok | diverged | error
  std::string null_reason;         // why optional fields are missing

  std::string to_json() const;
  static RunRecord from_json(const std::string& text);
};

/// Trains one configuration on `data`, restores the best-validation
/// checkpoint, runs the utilization diagnostics on the test split and writes
/// record.json, metrics.jsonl and best/ + last/ checkpoints under out_dir
/// (skipped when out_dir is empty).
RunRecord run_single(const BimodalDataset& data, const std::string& dataset_id,
                     const TrainConfig& cfg, const std::string& run_id,
                     const std::string& out_dir);

struct SweepSpec {
  std::string dataset_id;
  std::vector<std::string> algorithms = {"vanilla"};
  std::vector<double> lrs;          // explicit list, or
  std::size_t lr_samples = 0;       // log-uniform sample count in [lr_lo, lr_hi]
  double lr_lo = 1e-4, lr_hi = 1e-1;
  std::vector<std::uint64_t> seeds = {1, 2};
  std::vector<double> lambdas = {0.0};
  TrainConfig base;                 // shared fields (epochs, batch, Q, alpha...)
  std::uint64_t lr_seed = 7;        // stream for log-uniform sampling

  /// The realized lr grid (samples drawn deterministically from lr_seed).
  std::vector<double> resolve_lrs() const;
  std::size_t total_runs() const;
};

struct SweepSummary {
  std::size_t n_total = 0, n_failed = 0;
  double mean_diff_util = 0.0, std_diff_util = 0.0;
  double mean_diff_speed = 0.0, std_diff_speed = 0.0;
  std::size_t util_pos = 0, util_neg = 0, util_zero = 0;
  double sign_test_p = 1.0;   // two-sided, on diff_util
  double spearman_speed_util = 0.0;
};

/// Executes every run in the sweep (up to `jobs` concurrently; 0 means use
/// the MMLAB_JOBS environment variable or the hardware count). Failed runs
/// are recorded and excluded from aggregates.
std::vector<RunRecord> run_sweep(const BimodalDataset& data, const SweepSpec& spec,
                                 const std::string& out_dir, std::size_t jobs = 0);

SweepSummary summarize(const std::vector<RunRecord>& records);

struct L1Row {
  double lambda = 0.0;
  std::size_t n = 0;
  double mean_sparsity = 0.0;
  double mean_abs_diff_util = 0.0;
  double mean_abs_diff_speed = 0.0;
};

struct L1Study {
  std::vector<L1Row> rows;            // ascending lambda
  bool sparsity_nondecreasing = true; // allowing slack handled by caller
  double spearman_sparsity_util = 0.0;  // across individual runs
};

L1Study summarize_l1(const std::vector<RunRecord>& records);

/// Reads every record.json under runs_dir and writes summary.csv plus
/// histograms.json (diff_util and diff_speed counts over fixed bins
/// [-1.5, 1.5], width 0.1, with underflow/overflow buckets).
void write_report(const std::string& runs_dir, const std::string& out_csv,
                  const std::string& out_hist_json);

std::vector<RunRecord> load_records(const std::string& runs_dir);

// -- small statistics helpers (exposed for tests) --
double mean_of(const std::vector<double>& v);
double stddev_of(const std::vector<double>& v);  // population
/// Two-sided exact binomial sign test against median zero; zeros dropped.
double sign_test_p_value(std::size_t pos, std::size_t neg);
/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace mml
