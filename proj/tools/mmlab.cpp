// mmlab: dataset generation, training runs, sweeps, diagnostics and reports.
#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mml/checkpoint.hpp"
#include "mml/diagnose.hpp"
#include "mml/harness.hpp"
#include "mml/io.hpp"
#include "mml/synthdata.hpp"
#include "mml/trainers.hpp"

using nlohmann::json;

namespace {

mml::GeneratorSpec spec_from_json(const json& j) {
  mml::GeneratorSpec s;
  s.classes = j.value("classes", s.classes);
  s.image_size = j.value("image_size", s.image_size);
  s.train_size = j.value("train_size", s.train_size);
  s.val_size = j.value("val_size", s.val_size);
  s.test_size = j.value("test_size", s.test_size);
  s.p_train = j.value("p_train", s.p_train);
  s.p_val = j.value("p_val", s.p_val);
  s.p_test = j.value("p_test", s.p_test);
  s.shape_noise = j.value("shape_noise", s.shape_noise);
  s.seed = j.value("seed", s.seed);
  return s;
}

mml::TrainConfig train_config_from_json(const json& j) {
  mml::TrainConfig c;
  c.algorithm = mml::algorithm_from_name(j.value("algorithm", "vanilla"));
  c.lr = j.value("lr", c.lr);
  c.momentum = j.value("momentum", c.momentum);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.rebalance_window = j.value("rebalance_window", c.rebalance_window);
  c.imbalance_tolerance = j.value("imbalance_tolerance", c.imbalance_tolerance);
  c.l1 = j.value("l1", c.l1);
  c.seed = j.value("seed", c.seed);
  c.batchnorm = j.value("batchnorm", c.batchnorm);
  c.average_probs = j.value("average_probs", c.average_probs);
  c.stop_at_full_train_acc =
      j.value("stop_at_full_train_acc", c.stop_at_full_train_acc);
  c.eval_batch = j.value("eval_batch", c.eval_batch);
  return c;
}

int cmd_gen_data(const std::string& spec_path, const std::string& out) {
  json j = json::parse(mml::read_text_file(spec_path));
  mml::GeneratorSpec spec = spec_from_json(j);
  const std::string kind = j.value("kind", std::string("shortcut"));
  mml::BimodalDataset ds;
  if (kind == "shortcut") ds = mml::gen_shortcut_bimodal(spec);
  else if (kind == "duplicated-m0") ds = mml::gen_duplicated(spec, 0);
  else if (kind == "duplicated-m1") ds = mml::gen_duplicated(spec, 1);
  else throw mml::Error("gen-data: unknown kind '" + kind + "'");
  mml::save_dataset(ds, out);
  std::cout << "wrote dataset '" << ds.kind << "' (" << ds.train.size() << "/"
            << ds.val.size() << "/" << ds.test.size() << ") to " << out << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out) {
  json j = json::parse(mml::read_text_file(config_path));
  mml::TrainConfig cfg = train_config_from_json(j);
  mml::BimodalDataset ds = mml::load_dataset(data_dir);
  const std::string run_id = j.value("run_id", std::string("run"));
  mml::RunRecord rec = mml::run_single(ds, data_dir, cfg, run_id, out);
  std::cout << rec.to_json();
  return rec.status == "ok" ? 0 : 1;
}

int cmd_sweep(const std::string& spec_path, const std::string& data_dir,
              const std::string& out, std::size_t jobs) {
  json j = json::parse(mml::read_text_file(spec_path));
  mml::SweepSpec spec;
  spec.dataset_id = j.value("dataset_id", data_dir);
  if (j.contains("algorithms"))
    spec.algorithms = j.at("algorithms").get<std::vector<std::string>>();
  if (j.contains("lrs")) spec.lrs = j.at("lrs").get<std::vector<double>>();
  spec.lr_samples = j.value("lr_samples", spec.lr_samples);
  spec.lr_lo = j.value("lr_lo", spec.lr_lo);
  spec.lr_hi = j.value("lr_hi", spec.lr_hi);
  spec.lr_seed = j.value("lr_seed", spec.lr_seed);
  if (j.contains("seeds"))
    spec.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (j.contains("lambdas"))
    spec.lambdas = j.at("lambdas").get<std::vector<double>>();
  if (j.contains("base")) spec.base = train_config_from_json(j.at("base"));

  mml::BimodalDataset ds = mml::load_dataset(data_dir);
  auto records = mml::run_sweep(ds, spec, out, jobs);
  mml::SweepSummary s = mml::summarize(records);
  json summary = {{"n_total", s.n_total},
                  {"n_failed", s.n_failed},
                  {"mean_diff_util", s.mean_diff_util},
                  {"std_diff_util", s.std_diff_util},
                  {"mean_diff_speed", s.mean_diff_speed},
                  {"std_diff_speed", s.std_diff_speed},
                  {"util_pos", s.util_pos},
                  {"util_neg", s.util_neg},
                  {"util_zero", s.util_zero},
                  {"sign_test_p", s.sign_test_p},
                  {"spearman_speed_util", s.spearman_speed_util}};
  mml::write_text_file(out + "/sweep_summary.json", summary.dump(2) + "\n");
  std::cout << summary.dump(2) << "\n";
  bool any_failed = s.n_failed > 0;
  return any_failed ? 1 : 0;
}

int cmd_diagnose(const std::string& ckpt_dir, const std::string& data_dir,
                 const std::string& out) {
  mml::Checkpoint cp = mml::load_checkpoint(ckpt_dir);
  mml::MultiModalNet net = mml::restore_net(cp);
  mml::BimodalDataset ds = mml::load_dataset(data_dir);
  auto hbar = mml::compute_h_bar(net, ds.train);
  mml::UtilizationReport rep = mml::utilization(net, ds.test, hbar);
  rep.dataset_id = data_dir;
  rep.checkpoint_id = ckpt_dir;
  json j = {{"acc_f", rep.acc_f},
            {"acc_f0", rep.acc_f0},
            {"acc_f0_prime", rep.acc_f0_prime},
            {"acc_f1", rep.acc_f1},
            {"acc_f1_prime", rep.acc_f1_prime},
            {"u_m0_given_m1", rep.u_m0_given_m1},
            {"u_m1_given_m0", rep.u_m1_given_m0},
            {"diff_util", rep.diff_util},
            {"sparsity", mml::sparsity_fraction(net)},
            {"dataset_id", rep.dataset_id},
            {"checkpoint_id", rep.checkpoint_id},
            {"hbar_recomputed", rep.hbar_recomputed},
            {"bound_violation", rep.bound_violation}};
  if (!out.empty()) mml::write_text_file(out, j.dump(2) + "\n");
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-modal learning lab"};
  app.require_subcommand(1);

  std::string spec_path, config_path, data_dir, out, ckpt_dir, runs_dir;
  std::string hist_out = "histograms.json";
  std::size_t jobs = 0;

  auto* gen = app.add_subcommand("gen-data", "generate a dataset directory");
  gen->add_option("--spec", spec_path, "generator spec (json)")->required();
  gen->add_option("--out", out, "output dataset directory")->required();

  auto* tr = app.add_subcommand("train", "run one training configuration");
  tr->add_option("--config", config_path, "run configuration (json)")->required();
  tr->add_option("--data", data_dir, "dataset directory")->required();
  tr->add_option("--out", out, "run output directory")->required();

  auto* sw = app.add_subcommand("sweep", "run a seeded sweep");
  sw->add_option("--spec", spec_path, "sweep spec (json)")->required();
  sw->add_option("--data", data_dir, "dataset directory")->required();
  sw->add_option("--out", out, "sweep output directory")->required();
  sw->add_option("--jobs", jobs, "max concurrent runs (default: MMLAB_JOBS)");

  auto* dg = app.add_subcommand("diagnose", "utilization report for a checkpoint");
  dg->add_option("--checkpoint", ckpt_dir, "checkpoint directory")->required();
  dg->add_option("--data", data_dir, "dataset directory")->required();
  dg->add_option("--out", out, "report output path (json)");

  auto* rp = app.add_subcommand("report", "aggregate run records");
  rp->add_option("--runs", runs_dir, "directory tree of run records")->required();
  rp->add_option("--out", out, "summary csv path")->required();
  rp->add_option("--hist", hist_out, "histogram json path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(spec_path, out);
    if (tr->parsed()) return cmd_train(config_path, data_dir, out);
    if (sw->parsed()) return cmd_sweep(spec_path, data_dir, out, jobs);
    if (dg->parsed()) return cmd_diagnose(ckpt_dir, data_dir, out);
    if (rp->parsed()) {
      mml::write_report(runs_dir, out, hist_out);
      std::cout << "wrote " << out << " and " << hist_out << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
