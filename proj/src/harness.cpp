#include "mml/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "mml/checkpoint.hpp"
#include "mml/diagnose.hpp"
#include "mml/io.hpp"
#include "mml/rng.hpp"

namespace mml {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void put_opt(json& j, const char* key, const std::optional<double>& v) {
  if (v) j[key] = *v; else j[key] = nullptr;
}

std::optional<double> get_opt(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

std::string RunRecord::to_json() const {
  json j;
  j["run_id"] = run_id;
  j["dataset_id"] = dataset_id;
  j["algorithm"] = algorithm;
  j["lr"] = lr;
  j["seed"] = seed;
  j["l1"] = l1;
  j["rebalance_window"] = rebalance_window;
  j["imbalance_tolerance"] = imbalance_tolerance;
  j["epochs_completed"] = epochs_completed;
  put_opt(j, "best_val_acc", best_val_acc);
  put_opt(j, "test_acc", test_acc);
  put_opt(j, "acc_f0", acc_f0);
  put_opt(j, "acc_f0_prime", acc_f0_prime);
  put_opt(j, "acc_f1", acc_f1);
  put_opt(j, "acc_f1_prime", acc_f1_prime);
  put_opt(j, "u_m0_given_m1", u_m0_given_m1);
  put_opt(j, "u_m1_given_m0", u_m1_given_m0);
  put_opt(j, "diff_util", diff_util);
  put_opt(j, "diff_speed_at_t", diff_speed_at_t);
  if (horizon_t) j["horizon_t"] = *horizon_t; else j["horizon_t"] = nullptr;
  put_opt(j, "sparsity", sparsity);
  j["wall_seconds"] = wall_seconds;
  j["status"] = status;
  j["null_reason"] = null_reason;
  return j.dump(2) + "\n";
}

RunRecord RunRecord::from_json(const std::string& text) {
  json j = json::parse(text);
  RunRecord r;
  r.run_id = j.at("run_id").get<std::string>();
  r.dataset_id = j.at("dataset_id").get<std::string>();
  r.algorithm = j.at("algorithm").get<std::string>();
  r.lr = j.at("lr").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.l1 = j.at("l1").get<double>();
  r.rebalance_window = j.at("rebalance_window").get<std::size_t>();
  r.imbalance_tolerance = j.at("imbalance_tolerance").get<double>();
  r.epochs_completed = j.at("epochs_completed").get<std::size_t>();
  r.best_val_acc = get_opt(j, "best_val_acc");
  r.test_acc = get_opt(j, "test_acc");
  r.acc_f0 = get_opt(j, "acc_f0");
  r.acc_f0_prime = get_opt(j, "acc_f0_prime");
  r.acc_f1 = get_opt(j, "acc_f1");
  r.acc_f1_prime = get_opt(j, "acc_f1_prime");
  r.u_m0_given_m1 = get_opt(j, "u_m0_given_m1");
  r.u_m1_given_m0 = get_opt(j, "u_m1_given_m0");
  r.diff_util = get_opt(j, "diff_util");
  r.diff_speed_at_t = get_opt(j, "diff_speed_at_t");
  if (!j.at("horizon_t").is_null())
    r.horizon_t = j.at("horizon_t").get<std::size_t>();
  r.sparsity = get_opt(j, "sparsity");
  r.wall_seconds = j.at("wall_seconds").get<double>();
  r.status = j.at("status").get<std::string>();
  r.null_reason = j.at("null_reason").get<std::string>();
  return r;
}

RunRecord run_single(const BimodalDataset& data, const std::string& dataset_id,
                     const TrainConfig& cfg, const std::string& run_id,
                     const std::string& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.run_id = run_id;
  rec.dataset_id = dataset_id;
  rec.algorithm = algorithm_name(cfg.algorithm);
  rec.lr = cfg.lr;
  rec.seed = cfg.seed;
  rec.l1 = cfg.l1;
  rec.rebalance_window = cfg.rebalance_window;
  rec.imbalance_tolerance = cfg.imbalance_tolerance;

  auto finish = [&](RunRecord& r) -> RunRecord& {
    r.wall_seconds = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
    if (!out_dir.empty()) {
      fs::create_directories(out_dir);
      write_text_file(out_dir + "/record.json", r.to_json());
    }
    return r;
  };

  try {
    cfg.validate();
    ArchConfig arch;
    arch.classes = data.spec.classes;
    arch.batchnorm = cfg.batchnorm;
    arch.average_probs = cfg.average_probs;
    MultiModalNet net = MultiModalNet::create(arch, data.c0, data.c1,
                                              data.spec.image_size, cfg.seed);
    TrainConfig local = cfg;
    if (!out_dir.empty()) {
      fs::create_directories(out_dir);
      if (local.step_log_path.empty())
        local.step_log_path = out_dir + "/steps.jsonl";
    }
    TrainResult res = train(net, data, local);
    rec.epochs_completed = res.epochs_run;
    if (!out_dir.empty()) {
      std::ostringstream lines;
      for (const auto& em : res.history) {
        json j = {{"epoch", em.epoch},
                  {"train_loss", em.train_loss},
                  {"train_acc", em.train_acc},
                  {"val_acc", em.val_acc},
                  {"diff_speed", em.diff_speed},
                  {"regular_steps", em.regular_steps},
                  {"rebalance_m0_steps", em.rebalance_m0_steps},
                  {"rebalance_m1_steps", em.rebalance_m1_steps},
                  {"cumulative_steps", em.cumulative_steps}};
        lines << j.dump() << "\n";
      }
      write_text_file(out_dir + "/metrics.jsonl", lines.str());
    }
    if (res.diverged) {
      rec.status = "diverged";
      rec.null_reason = "training diverged (non-finite loss)";
      return finish(rec);
    }
    rec.best_val_acc = res.best_val_acc;
    rec.horizon_t = res.best_steps;

    if (!out_dir.empty()) save_checkpoint(out_dir + "/last", net, res.last);
    std::vector<Tensor> mom = res.best.momentum;
    restore_snapshot(net, mom, res.best);
    if (!out_dir.empty()) save_checkpoint(out_dir + "/best", net, res.best);

    auto hbar = compute_h_bar(net, data.train, cfg.eval_batch);
    UtilizationReport rep = utilization(net, data.test, hbar, cfg.eval_batch);
    rep.dataset_id = dataset_id;
    rep.checkpoint_id = run_id + "/best";
    rec.test_acc = rep.acc_f;
    rec.acc_f0 = rep.acc_f0;
    rec.acc_f0_prime = rep.acc_f0_prime;
    rec.acc_f1 = rep.acc_f1;
    rec.acc_f1_prime = rep.acc_f1_prime;
    rec.u_m0_given_m1 = rep.u_m0_given_m1;
    rec.u_m1_given_m0 = rep.u_m1_given_m0;
    rec.diff_util = rep.diff_util;
    rec.sparsity = sparsity_fraction(net);
    const SpeedAccumulator& acc = res.best.acc;
    if (acc.m_theta0 > 0.0 && acc.m_fusion0 > 0.0 && acc.m_theta1 > 0.0 &&
        acc.m_fusion1 > 0.0)
      rec.diff_speed_at_t = acc.diff_speed();
    else
      rec.null_reason = "diff_speed undefined: accumulator not warmed up";
    if (!out_dir.empty()) {
      json u = {{"acc_f", rep.acc_f},
                {"acc_f0", rep.acc_f0},
                {"acc_f0_prime", rep.acc_f0_prime},
                {"acc_f1", rep.acc_f1},
                {"acc_f1_prime", rep.acc_f1_prime},
                {"u_m0_given_m1", rep.u_m0_given_m1},
                {"u_m1_given_m0", rep.u_m1_given_m0},
                {"diff_util", rep.diff_util},
                {"dataset_id", rep.dataset_id},
                {"checkpoint_id", rep.checkpoint_id},
                {"hbar_recomputed", rep.hbar_recomputed},
                {"bound_violation", rep.bound_violation}};
      write_text_file(out_dir + "/utilization.json", u.dump(2) + "\n");
    }
  } catch (const std::exception& e) {
    rec.status = "error";
    rec.null_reason = e.what();
  }
  return finish(rec);
}

std::vector<double> SweepSpec::resolve_lrs() const {
  if (!lrs.empty()) return lrs;
  if (lr_samples == 0) throw Error("sweep: no learning rates specified");
  if (!(lr_lo > 0.0) || !(lr_hi >= lr_lo))
    throw Error("sweep: invalid log-uniform lr range");
  Rng rng(derive_seed(lr_seed, "lr-sample"));
  std::vector<double> out(lr_samples);
  const double lo = std::log(lr_lo), hi = std::log(lr_hi);
  for (auto& v : out) v = std::exp(lo + (hi - lo) * rng.uniform());
  return out;
}

std::size_t SweepSpec::total_runs() const {
  return resolve_lrs().size() * seeds.size() * algorithms.size() * lambdas.size();
}

namespace {

std::size_t resolve_jobs(std::size_t jobs) {
  if (jobs > 0) return jobs;
  if (const char* env = std::getenv("MMLAB_JOBS")) {
    long v = std::atol(env);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : hc;
}

std::string format_lr(double lr) {
  std::ostringstream os;
  os << lr;
  std::string s = os.str();
  for (auto& c : s)
    if (c == '+' || c == '.') c = '_';
  return s;
}

}  // namespace

std::vector<RunRecord> run_sweep(const BimodalDataset& data, const SweepSpec& spec,
                                 const std::string& out_dir, std::size_t jobs) {
  struct Job {
    TrainConfig cfg;
    std::string run_id;
  };
  std::vector<Job> plan;
  const auto lrs = spec.resolve_lrs();
  for (const auto& algo : spec.algorithms)
    for (double lambda : spec.lambdas)
      for (double lr : lrs)
        for (std::uint64_t seed : spec.seeds) {
          TrainConfig cfg = spec.base;
          cfg.algorithm = algorithm_from_name(algo);
          cfg.lr = lr;
          cfg.seed = seed;
          cfg.l1 = lambda;
          std::ostringstream id;
          id << algo << "-lr" << format_lr(lr) << "-seed" << seed;
          if (spec.lambdas.size() > 1 || lambda != 0.0)
            id << "-l1" << format_lr(lambda);
          plan.push_back({cfg, id.str()});
        }

  std::vector<RunRecord> records(plan.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= plan.size()) return;
      std::string run_dir =
          out_dir.empty() ? "" : out_dir + "/" + plan[i].run_id;
      records[i] = run_single(data, spec.dataset_id, plan[i].cfg,
                              plan[i].run_id, run_dir);
    }
  };
  const std::size_t n_jobs = std::min(resolve_jobs(jobs), plan.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t + 1 < n_jobs; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return records;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) throw Error("mean of empty set");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

double sign_test_p_value(std::size_t pos, std::size_t neg) {
  const std::size_t n = pos + neg;
  if (n == 0) return 1.0;
  const std::size_t k = std::min(pos, neg);
  // P(X <= k) for X ~ Binomial(n, 1/2), via log binomial coefficients.
  double tail = 0.0;
  for (std::size_t i = 0; i <= k; ++i) {
    double logc = std::lgamma(static_cast<double>(n) + 1.0) -
                  std::lgamma(static_cast<double>(i) + 1.0) -
                  std::lgamma(static_cast<double>(n - i) + 1.0);
    tail += std::exp(logc - static_cast<double>(n) * std::log(2.0));
  }
  return std::min(1.0, 2.0 * tail);
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double ma = mean_of(a), mb = mean_of(b);
  double num = 0.0, da = 0.0, db = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - ma) * (b[i] - mb);
    da += (a[i] - ma) * (a[i] - ma);
    db += (b[i] - mb) * (b[i] - mb);
  }
  if (da == 0.0 || db == 0.0) return 0.0;
  return num / std::sqrt(da * db);
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error("spearman: length mismatch");
  if (a.size() < 2) throw Error("spearman: need at least two points");
  return pearson(average_ranks(a), average_ranks(b));
}

SweepSummary summarize(const std::vector<RunRecord>& records) {
  SweepSummary s;
  s.n_total = records.size();
  std::vector<double> utils, speeds, paired_util, paired_speed;
  for (const auto& r : records) {
    if (r.status != "ok") {
      ++s.n_failed;
      continue;
    }
    if (r.diff_util) {
      utils.push_back(*r.diff_util);
      if (*r.diff_util > 0) ++s.util_pos;
      else if (*r.diff_util < 0) ++s.util_neg;
      else ++s.util_zero;
    }
    if (r.diff_speed_at_t) speeds.push_back(*r.diff_speed_at_t);
    if (r.diff_util && r.diff_speed_at_t) {
      paired_util.push_back(*r.diff_util);
      paired_speed.push_back(*r.diff_speed_at_t);
    }
  }
  if (!utils.empty()) {
    s.mean_diff_util = mean_of(utils);
    s.std_diff_util = stddev_of(utils);
  }
  if (!speeds.empty()) {
    s.mean_diff_speed = mean_of(speeds);
    s.std_diff_speed = stddev_of(speeds);
  }
  s.sign_test_p = sign_test_p_value(s.util_pos, s.util_neg);
  if (paired_util.size() >= 2)
    s.spearman_speed_util = spearman(paired_speed, paired_util);
  return s;
}

L1Study summarize_l1(const std::vector<RunRecord>& records) {
  L1Study study;
  std::vector<double> lambdas;
  for (const auto& r : records)
    if (r.status == "ok" &&
        std::find(lambdas.begin(), lambdas.end(), r.l1) == lambdas.end())
      lambdas.push_back(r.l1);
  std::sort(lambdas.begin(), lambdas.end());
  std::vector<double> run_sparsity, run_abs_util;
  for (double lam : lambdas) {
    L1Row row;
    row.lambda = lam;
    std::vector<double> sp, au, as;
    for (const auto& r : records) {
      if (r.status != "ok" || r.l1 != lam) continue;
      if (r.sparsity) sp.push_back(*r.sparsity);
      if (r.diff_util) au.push_back(std::abs(*r.diff_util));
      if (r.diff_speed_at_t) as.push_back(std::abs(*r.diff_speed_at_t));
      if (r.sparsity && r.diff_util) {
        run_sparsity.push_back(*r.sparsity);
        run_abs_util.push_back(std::abs(*r.diff_util));
      }
    }
    row.n = sp.size();
    if (!sp.empty()) row.mean_sparsity = mean_of(sp);
    if (!au.empty()) row.mean_abs_diff_util = mean_of(au);
    if (!as.empty()) row.mean_abs_diff_speed = mean_of(as);
    study.rows.push_back(row);
  }
  for (std::size_t i = 1; i < study.rows.size(); ++i)
    if (study.rows[i].mean_sparsity < study.rows[i - 1].mean_sparsity)
      study.sparsity_nondecreasing = false;
  if (run_sparsity.size() >= 2)
    study.spearman_sparsity_util = spearman(run_sparsity, run_abs_util);
  return study;
}

std::vector<RunRecord> load_records(const std::string& runs_dir) {
  std::vector<std::string> paths;
  for (const auto& e : fs::recursive_directory_iterator(runs_dir))
    if (e.is_regular_file() && e.path().filename() == "record.json")
      paths.push_back(e.path().string());
  std::sort(paths.begin(), paths.end());
  std::vector<RunRecord> out;
  out.reserve(paths.size());
  for (const auto& p : paths) out.push_back(RunRecord::from_json(read_text_file(p)));
  return out;
}

namespace {

std::string csv_opt(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream os;
  os.precision(17);
  os << *v;
  return os.str();
}

json histogram_of(const std::vector<double>& values) {
  // Fixed bins over [-1.5, 1.5], width 0.1, plus under/overflow buckets.
  constexpr int kBins = 30;
  std::vector<std::size_t> counts(kBins, 0);
  std::size_t under = 0, over = 0;
  for (double v : values) {
    if (v < -1.5) { ++under; continue; }
    if (v >= 1.5) { ++over; continue; }
    int b = static_cast<int>(std::floor((v + 1.5) / 0.1));
    if (b < 0) b = 0;
    if (b >= kBins) b = kBins - 1;
    ++counts[static_cast<std::size_t>(b)];
  }
  json bins = json::array();
  for (int b = 0; b < kBins; ++b)
    bins.push_back({{"lo", -1.5 + 0.1 * b},
                    {"hi", -1.5 + 0.1 * (b + 1)},
                    {"count", counts[static_cast<std::size_t>(b)]}});
  return {{"bins", bins}, {"underflow", under}, {"overflow", over},
          {"n", values.size()}};
}

}  // namespace

void write_report(const std::string& runs_dir, const std::string& out_csv,
                  const std::string& out_hist_json) {
  auto records = load_records(runs_dir);
  std::ostringstream csv;
  csv << "run_id,dataset_id,algorithm,lr,seed,l1,rebalance_window,"
         "imbalance_tolerance,epochs_completed,best_val_acc,test_acc,"
         "acc_f0,acc_f0_prime,acc_f1,acc_f1_prime,u_m0_given_m1,"
         "u_m1_given_m0,diff_util,diff_speed_at_t,horizon_t,sparsity,"
         "wall_seconds,status,null_reason\n";
  csv.precision(17);
  for (const auto& r : records) {
    csv << r.run_id << ',' << r.dataset_id << ',' << r.algorithm << ',' << r.lr
        << ',' << r.seed << ',' << r.l1 << ',' << r.rebalance_window << ','
        << r.imbalance_tolerance << ',' << r.epochs_completed << ','
        << csv_opt(r.best_val_acc) << ',' << csv_opt(r.test_acc) << ','
        << csv_opt(r.acc_f0) << ',' << csv_opt(r.acc_f0_prime) << ','
        << csv_opt(r.acc_f1) << ',' << csv_opt(r.acc_f1_prime) << ','
        << csv_opt(r.u_m0_given_m1) << ',' << csv_opt(r.u_m1_given_m0) << ','
        << csv_opt(r.diff_util) << ',' << csv_opt(r.diff_speed_at_t) << ','
        << (r.horizon_t ? std::to_string(*r.horizon_t) : "") << ','
        << csv_opt(r.sparsity) << ',' << r.wall_seconds << ',' << r.status
        << ',' << '"' << r.null_reason << '"' << '\n';
  }
  write_text_file(out_csv, csv.str());

  std::vector<double> utils, speeds;
  for (const auto& r : records) {
    if (r.status != "ok") continue;
    if (r.diff_util) utils.push_back(*r.diff_util);
    if (r.diff_speed_at_t) speeds.push_back(*r.diff_speed_at_t);
  }
  SweepSummary s = summarize(records);
  json hist = {{"diff_util", histogram_of(utils)},
               {"diff_speed", histogram_of(speeds)},
               {"aggregates",
                {{"n_total", s.n_total},
                 {"n_failed", s.n_failed},
                 {"mean_diff_util", s.mean_diff_util},
                 {"std_diff_util", s.std_diff_util},
                 {"mean_diff_speed", s.mean_diff_speed},
                 {"std_diff_speed", s.std_diff_speed},
                 {"util_pos", s.util_pos},
                 {"util_neg", s.util_neg},
                 {"util_zero", s.util_zero},
                 {"sign_test_p", s.sign_test_p},
                 {"spearman_speed_util", s.spearman_speed_util}}}};
  write_text_file(out_hist_json, hist.dump(2) + "\n");
}

}  // namespace mml
