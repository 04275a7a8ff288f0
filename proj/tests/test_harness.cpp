#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "mml/harness.hpp"
#include "mml/io.hpp"
#include "mml/synthdata.hpp"

using namespace mml;
namespace fs = std::filesystem;

namespace {

GeneratorSpec tiny_spec() {
  GeneratorSpec s;
  s.classes = 3;
  s.image_size = 8;
  s.train_size = 48;
  s.val_size = 12;
  s.test_size = 12;
  s.p_train = 0.99;
  s.p_val = 0.4;
  s.p_test = 0.4;
  s.shape_noise = 0.5;
  s.seed = 5;
  return s;
}

struct TmpDir {
  std::string path;
  explicit TmpDir(std::string p) : path(std::move(p)) { fs::remove_all(path); }
  ~TmpDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("sign test p-values match the exact binomial") {
  CHECK(sign_test_p_value(0, 0) == doctest::Approx(1.0));
  // n = 5, k = 0: 2 * (1/32)
  CHECK(sign_test_p_value(5, 0) == doctest::Approx(2.0 / 32.0).epsilon(1e-12));
  CHECK(sign_test_p_value(0, 5) == doctest::Approx(2.0 / 32.0).epsilon(1e-12));
  // n = 4, k = 2 (balanced): capped at 1
  CHECK(sign_test_p_value(2, 2) == doctest::Approx(1.0));
  // n = 10, k = 2: 2 * (1 + 10 + 45) / 1024
  CHECK(sign_test_p_value(8, 2) ==
        doctest::Approx(2.0 * 56.0 / 1024.0).epsilon(1e-12));
}

TEST_CASE("spearman handles monotone data and ties") {
  CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
  CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
  // monotone in ranks despite nonlinearity
  CHECK(spearman({1, 2, 3, 4}, {1, 8, 27, 256}) == doctest::Approx(1.0));
  // constant input has zero rank variance -> 0 by convention
  CHECK(spearman({1, 1, 1}, {1, 2, 3}) == doctest::Approx(0.0));
  // average ranks for ties: hand-checked value
  // a = {1,1,2}, ranks {1.5,1.5,3}; b = {1,2,3}, ranks {1,2,3}
  const double want = (1.5 * 1 + 1.5 * 2 + 3 * 3 - 3 * 2.0 * 2.0) /
                      std::sqrt((2 * 0.25 + 1.0) * 2.0);
  CHECK(spearman({1, 1, 2}, {1, 2, 3}) == doctest::Approx(want).epsilon(1e-12));
  CHECK_THROWS_AS(spearman({1.0}, {2.0}), Error);
  CHECK_THROWS_AS(spearman({1, 2}, {1, 2, 3}), Error);
}

TEST_CASE("mean and population stddev") {
  CHECK(mean_of({1, 2, 3, 4}) == doctest::Approx(2.5));
  CHECK(stddev_of({2, 4, 4, 4, 5, 5, 7, 9}) == doctest::Approx(2.0));
  CHECK_THROWS_AS(mean_of({}), Error);
}

TEST_CASE("RunRecord JSON round trip preserves nulls") {
  RunRecord r;
  r.run_id = "abc";
  r.dataset_id = "ds";
  r.algorithm = "vanilla";
  r.lr = 0.01;
  r.seed = 9;
  r.status = "diverged";
  r.null_reason = "training diverged (non-finite loss)";
  r.diff_util = std::nullopt;
  r.best_val_acc = 0.5;
  RunRecord back = RunRecord::from_json(r.to_json());
  CHECK(back.run_id == r.run_id);
  CHECK_FALSE(back.diff_util.has_value());
  CHECK(back.best_val_acc.has_value());
  CHECK(*back.best_val_acc == 0.5);
  CHECK(back.status == "diverged");
}

TEST_CASE("sweep spec resolves counts and deterministic lr samples") {
  SweepSpec spec;
  spec.algorithms = {"vanilla"};
  spec.lrs = {0.01, 0.02};
  spec.seeds = {1, 2};
  CHECK(spec.total_runs() == 4);
  spec.algorithms = {"vanilla", "guided"};
  spec.lambdas = {0.0, 1e-4};
  CHECK(spec.total_runs() == 16);

  SweepSpec sampled;
  sampled.lrs.clear();
  sampled.lr_samples = 5;
  sampled.lr_lo = 1e-4;
  sampled.lr_hi = 1e-1;
  auto a = sampled.resolve_lrs();
  auto b = sampled.resolve_lrs();
  CHECK(a == b);
  REQUIRE(a.size() == 5);
  for (double lr : a) {
    CHECK(lr >= 1e-4);
    CHECK(lr <= 1e-1);
  }
}

TEST_CASE("sweep produces one record per combination and a summary") {
  BimodalDataset data = gen_shortcut_bimodal(tiny_spec());
  SweepSpec spec;
  spec.dataset_id = "tiny";
  spec.lrs = {0.01, 0.05};
  spec.seeds = {1, 2};
  spec.base.epochs = 1;
  spec.base.batch_size = 16;
  TmpDir d("harness_sweep_tmp");
  auto records = run_sweep(data, spec, d.path, 1);
  REQUIRE(records.size() == 4);
  for (const auto& r : records) {
    CHECK(r.status == "ok");
    CHECK(r.epochs_completed == 1);
    CHECK(fs::exists(d.path + "/" + r.run_id + "/record.json"));
    CHECK(fs::exists(d.path + "/" + r.run_id + "/best/manifest.json"));
    CHECK(fs::exists(d.path + "/" + r.run_id + "/metrics.jsonl"));
  }
  auto summary = summarize(records);
  CHECK(summary.n_total == 4);
  CHECK(summary.n_failed == 0);
}

TEST_CASE("summarize excludes failed runs from aggregates") {
  RunRecord ok1, ok2, bad;
  ok1.status = ok2.status = "ok";
  ok1.diff_util = 0.2;
  ok1.diff_speed_at_t = 0.1;
  ok2.diff_util = 0.4;
  ok2.diff_speed_at_t = 0.3;
  bad.status = "diverged";
  bad.diff_util = std::nullopt;
  auto s = summarize({ok1, ok2, bad});
  CHECK(s.n_total == 3);
  CHECK(s.n_failed == 1);
  CHECK(s.mean_diff_util == doctest::Approx(0.3));
  CHECK(s.util_pos == 2);
  CHECK(s.util_neg == 0);
}

TEST_CASE("L1 study rows are ordered by lambda with per-lambda means") {
  auto rec = [](double lam, double r, double du) {
    RunRecord x;
    x.status = "ok";
    x.l1 = lam;
    x.sparsity = r;
    x.diff_util = du;
    return x;
  };
  auto study = summarize_l1(
      {rec(1e-3, 0.3, 0.5), rec(0.0, 0.0, 0.1), rec(1e-3, 0.5, 0.7),
       rec(0.0, 0.0, -0.2)});
  REQUIRE(study.rows.size() == 2);
  CHECK(study.rows[0].lambda == 0.0);
  CHECK(study.rows[1].lambda == 1e-3);
  CHECK(study.rows[1].mean_sparsity == doctest::Approx(0.4));
  CHECK(study.rows[0].mean_abs_diff_util == doctest::Approx(0.15));
  CHECK(study.sparsity_nondecreasing);
  CHECK(study.spearman_sparsity_util > 0.0);
}

TEST_CASE("report is a deterministic pure function of the records") {
  BimodalDataset data = gen_shortcut_bimodal(tiny_spec());
  SweepSpec spec;
  spec.dataset_id = "tiny";
  spec.lrs = {0.02};
  spec.seeds = {1, 2};
  spec.base.epochs = 1;
  spec.base.batch_size = 16;
  TmpDir d("harness_report_tmp");
  run_sweep(data, spec, d.path, 1);
  write_report(d.path, d.path + "/summary.csv", d.path + "/hist.json");
  std::string csv1 = read_text_file(d.path + "/summary.csv");
  std::string hist1 = read_text_file(d.path + "/hist.json");
  write_report(d.path, d.path + "/summary.csv", d.path + "/hist.json");
  CHECK(read_text_file(d.path + "/summary.csv") == csv1);
  CHECK(read_text_file(d.path + "/hist.json") == hist1);
  CHECK(csv1.find("run_id,dataset_id,algorithm") == 0);
  // one header + one row per record
  CHECK(std::count(csv1.begin(), csv1.end(), '\n') == 3);
  auto loaded = load_records(d.path);
  CHECK(loaded.size() == 2);
}
