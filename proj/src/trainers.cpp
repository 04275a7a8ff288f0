#include "mml/trainers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace mml {

using nlohmann::json;

const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::Vanilla: return "vanilla";
    case Algorithm::Guided: return "guided";
    case Algorithm::Random: return "random";
  }
  return "?";
}

Algorithm algorithm_from_name(const std::string& name) {
  if (name == "vanilla") return Algorithm::Vanilla;
  if (name == "guided") return Algorithm::Guided;
  if (name == "random") return Algorithm::Random;
  throw Error("unknown algorithm: " + name);
}

void TrainConfig::validate() const {
  if (lr <= 0.0) throw Error("TrainConfig: learning rate must be > 0");
  if (momentum < 0.0 || momentum >= 1.0)
    throw Error("TrainConfig: momentum must be in [0, 1)");
  if (batch_size == 0) throw Error("TrainConfig: batch size must be >= 1");
  if (epochs == 0) throw Error("TrainConfig: epochs must be >= 1");
  if (l1 < 0.0) throw Error("TrainConfig: l1 weight must be >= 0");
  if (algorithm == Algorithm::Guided) {
    if (rebalance_window == 0) throw Error("TrainConfig: guided requires Q >= 1");
    if (!(imbalance_tolerance > 0.0))
      throw Error("TrainConfig: guided requires alpha > 0");
  }
}

SgdOptimizer::SgdOptimizer(std::vector<Var> params, double lr, double momentum)
    : params_(std::move(params)), lr_(lr), momentum_(momentum) {
  velocity_.reserve(params_.size());
  for (const auto& p : params_) velocity_.emplace_back(p->value.shape, 0.0);
}

void SgdOptimizer::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& g = params_[i]->ensure_grad();
    Tensor& v = velocity_[i];
    Tensor& theta = params_[i]->value;
    for (std::size_t j = 0; j < theta.size(); ++j) {
      if (!std::isfinite(g[j]))
        throw Error("sgd_step: non-finite gradient in parameter '" +
                    params_[i]->name + "'");
      v[j] = momentum_ * v[j] + g[j];
      theta[j] -= lr_ * v[j];
    }
  }
}

void apply_l1_subgradient(const std::vector<Var>& params, double lambda) {
  if (lambda == 0.0) return;
  for (const auto& p : params) {
    Tensor& g = p->ensure_grad();
    for (std::size_t j = 0; j < g.size(); ++j) {
      double t = p->value[j];
      if (t > 0.0)
        g[j] += lambda;
      else if (t < 0.0)
        g[j] -= lambda;
    }
  }
}

TrainSnapshot take_snapshot(MultiModalNet& net, const std::vector<Tensor>& momentum) {
  TrainSnapshot s;
  for (const auto& nt : net.named_tensors()) s.tensors.push_back(*nt.tensor);
  s.momentum = momentum;
  for (const auto& f : net.fusions) {
    s.fusion_h_counts.push_back(f.stats.h_count);
    s.fusion_w_counts.push_back(f.stats.w_count);
  }
  return s;
}

void restore_snapshot(MultiModalNet& net, std::vector<Tensor>& momentum,
                      const TrainSnapshot& snap) {
  auto named = net.named_tensors();
  if (named.size() != snap.tensors.size())
    throw Error("restore_snapshot: tensor count mismatch (" +
                std::to_string(named.size()) + " vs " +
                std::to_string(snap.tensors.size()) + ")");
  for (std::size_t i = 0; i < named.size(); ++i) {
    if (named[i].tensor->shape != snap.tensors[i].shape)
      throw Error("restore_snapshot: shape mismatch for " + named[i].name);
    *named[i].tensor = snap.tensors[i];
  }
  momentum = snap.momentum;
  if (snap.fusion_h_counts.size() != net.fusions.size())
    throw Error("restore_snapshot: fusion count mismatch");
  for (std::size_t i = 0; i < net.fusions.size(); ++i) {
    net.fusions[i].stats.h_count = snap.fusion_h_counts[i];
    net.fusions[i].stats.w_count = snap.fusion_w_counts[i];
  }
}

double evaluate_accuracy(MultiModalNet& net, const Split& split,
                         std::size_t eval_batch) {
  NoGradGuard ng;
  const bool was_training = net.training;
  net.training = false;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < split.size(); start += eval_batch) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(split.size(), start + eval_batch); ++i)
      idx.push_back(i);
    Tensor x0 = split.batch_x0(idx);
    Tensor x1 = split.batch_x1(idx);
    auto labels = split.batch_labels(idx);
    auto res = net.forward(&x0, &x1, FusionMode::Regular);
    auto pred = predict(res.probs_avg);
    for (std::size_t i = 0; i < pred.size(); ++i)
      if (pred[i] == labels[i]) ++correct;
  }
  net.training = was_training;
  return static_cast<double>(correct) / static_cast<double>(split.size());
}

namespace {

FusionMode mode_of(StepKind kind) {
  switch (kind) {
    case StepKind::Regular: return FusionMode::Regular;
    case StepKind::RebalanceM0: return FusionMode::RebalanceM0;
    case StepKind::RebalanceM1: return FusionMode::RebalanceM1;
  }
  return FusionMode::Regular;
}

}  // namespace

TrainResult train(MultiModalNet& net, const BimodalDataset& data,
                  const TrainConfig& cfg, const TrainSnapshot* resume) {
  cfg.validate();
  TrainResult result;
  ParamPartition part = net.partition();
  std::vector<Var> theta0 = part.theta0;
  std::vector<Var> theta1 = part.theta1;
  std::vector<Var> fusion0 = part.fusion0();
  std::vector<Var> fusion1 = part.fusion1();
  std::vector<Var> all = net.all_params();

  SgdOptimizer opt(all, cfg.lr, cfg.momentum);
  SpeedAccumulator acc;
  std::size_t total_steps = 0;
  std::size_t start_epoch = 0;  // 0-based
  double best_val = -1.0;
  std::size_t best_epoch = 0, best_steps = 0;
  std::size_t q = cfg.rebalance_window;
  double last_diff = 0.0;
  TrainSnapshot best_snap;

  if (resume) {
    restore_snapshot(net, opt.velocity(), *resume);
    acc = resume->acc;
    total_steps = resume->total_steps;
    start_epoch = resume->epochs_done;
    best_val = resume->best_val_acc;
    best_epoch = resume->best_epoch;
    best_steps = resume->best_steps;
    q = resume->q == 0 ? cfg.rebalance_window : resume->q;
    last_diff = resume->last_diff_speed;
  }

  std::ofstream step_log;
  if (!cfg.step_log_path.empty()) {
    step_log.open(cfg.step_log_path, resume ? std::ios::app : std::ios::trunc);
    if (!step_log) throw Error("cannot open step log: " + cfg.step_log_path);
  }

  const std::size_t n_train = data.train.size();
  const std::size_t batch_size = std::min(cfg.batch_size, n_train);

  for (std::size_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    net.training = true;
    auto batches = make_batches(n_train, batch_size,
                                derive_seed(cfg.seed, "shuffle", epoch));
    Rng kind_rng(derive_seed(cfg.seed, "stepkind", epoch));

    EpochMetrics em;
    em.epoch = epoch + 1;
    double loss_sum = 0.0;
    std::size_t correct = 0;
    bool diverged = false;

    for (const auto& idx : batches) {
      // Step-kind policy.
      StepKind kind = StepKind::Regular;
      bool check_trigger = false;
      if (epoch > 0) {
        switch (cfg.algorithm) {
          case Algorithm::Vanilla:
            break;
          case Algorithm::Guided:
            if (q == cfg.rebalance_window) {
              kind = StepKind::Regular;
              check_trigger = true;
            } else {
              ++q;
              kind = last_diff > 0.0 ? StepKind::RebalanceM0 : StepKind::RebalanceM1;
            }
            break;
          case Algorithm::Random: {
            std::uint64_t r = kind_rng.below(3);
            kind = r == 0 ? StepKind::Regular
                          : (r == 1 ? StepKind::RebalanceM0 : StepKind::RebalanceM1);
            break;
          }
        }
      }

      Tensor x0 = data.train.batch_x0(idx);
      Tensor x1 = data.train.batch_x1(idx);
      auto labels = data.train.batch_labels(idx);

      const bool regular = kind == StepKind::Regular;
      auto res = net.forward(&x0, &x1, mode_of(kind), nullptr, /*capture=*/regular);
      Var loss = multimodal_loss(res.logits0, res.logits1, labels);
      double loss_value = loss->value[0];
      if (!std::isfinite(loss_value)) {
        diverged = true;
        break;
      }
      loss_sum += loss_value;
      auto pred = predict(res.probs_avg);
      for (std::size_t i = 0; i < pred.size(); ++i)
        if (pred[i] == labels[i]) ++correct;

      for (const auto& p : all) p->zero_grad();
      backward(loss);
      apply_l1_subgradient(all, cfg.l1);
      // Non-finite gradients (a finite loss does not guarantee them, e.g.
      // when ReLU masks a poisoned activation in the forward pass but its
      // batch statistics leak into the backward pass) are divergence too.
      if (!std::all_of(all.begin(), all.end(), [](const Var& p) {
            return p->grad.shape != p->value.shape || p->grad.all_finite();
          })) {
        diverged = true;
        break;
      }

      if (regular) {
        // Fusion running means accumulate over Regular steps only.
        for (std::size_t fi = 0; fi < net.fusions.size(); ++fi) {
          const FusionCapture& cap = res.captures[fi];
          net.fusions[fi].update_stats(cap.h0, cap.h1, cap.w0, cap.w1);
        }
        double g_t0 = group_grad_sq_norm(theta0);
        double g_f0 = group_grad_sq_norm(fusion0);
        double g_t1 = group_grad_sq_norm(theta1);
        double g_f1 = group_grad_sq_norm(fusion1);
        opt.step();
        acc.accumulate(mu(g_t0, group_sq_norm(theta0)),
                       mu(g_f0, group_sq_norm(fusion0)),
                       mu(g_t1, group_sq_norm(theta1)),
                       mu(g_f1, group_sq_norm(fusion1)));
        em.regular_steps++;
      } else {
        opt.step();
        if (kind == StepKind::RebalanceM0)
          em.rebalance_m0_steps++;
        else
          em.rebalance_m1_steps++;
      }
      ++total_steps;

      if (regular && acc.m_theta0 > 0.0 && acc.m_fusion0 > 0.0 &&
          acc.m_theta1 > 0.0 && acc.m_fusion1 > 0.0) {
        double diff = acc.diff_speed();
        if (step_log.is_open()) {
          json rec{{"step", total_steps},
                   {"epoch", epoch + 1},
                   {"m_theta0", acc.m_theta0},
                   {"m_fusion0", acc.m_fusion0},
                   {"m_theta1", acc.m_theta1},
                   {"m_fusion1", acc.m_fusion1},
                   {"diff_speed", diff}};
          step_log << rec.dump() << "\n";
        }
        // Guided trigger check happens only on q == Q regular steps and
        // never during the warm-up epoch.
        if (check_trigger && std::abs(diff) > cfg.imbalance_tolerance) {
          q = 1;
          last_diff = diff;
        }
      }
    }

    if (diverged) {
      result.diverged = true;
      result.status = "diverged";
      result.epochs_run = epoch;
      break;
    }

    em.train_loss = loss_sum / static_cast<double>(batches.size());
    em.train_acc = static_cast<double>(correct) / static_cast<double>(n_train);
    em.val_acc = evaluate_accuracy(net, data.val, cfg.eval_batch);
    em.diff_speed = (acc.m_theta0 > 0.0 && acc.m_fusion0 > 0.0 &&
                     acc.m_theta1 > 0.0 && acc.m_fusion1 > 0.0)
                        ? acc.diff_speed()
                        : 0.0;
    em.cumulative_steps = total_steps;
    result.history.push_back(em);
    result.epochs_run = epoch + 1;

    if (em.val_acc > best_val) {
      best_val = em.val_acc;
      best_epoch = epoch + 1;
      best_steps = total_steps;
      best_snap = take_snapshot(net, opt.velocity());
      best_snap.acc = acc;
      best_snap.epochs_done = epoch + 1;
      best_snap.total_steps = total_steps;
      best_snap.best_val_acc = best_val;
      best_snap.best_epoch = best_epoch;
      best_snap.best_steps = best_steps;
      best_snap.q = q;
      best_snap.last_diff_speed = last_diff;
    }

    if (cfg.stop_at_full_train_acc && em.train_acc >= 1.0 &&
        epoch + 1 < cfg.epochs) {
      result.status = "reached-full-train-accuracy";
      break;
    }
  }

  result.last = take_snapshot(net, opt.velocity());
  result.last.acc = acc;
  result.last.epochs_done = result.epochs_run;
  result.last.total_steps = total_steps;
  result.last.best_val_acc = best_val;
  result.last.best_epoch = best_epoch;
  result.last.best_steps = best_steps;
  result.last.q = q;
  result.last.last_diff_speed = last_diff;

  if (best_val < 0.0) {
    // Diverged before the first validation point.
    result.best = result.last;
  } else {
    result.best = std::move(best_snap);
  }
  result.best_val_acc = std::max(0.0, best_val);
  result.best_epoch = best_epoch;
  result.best_steps = best_steps;
  net.training = false;
  return result;
}

}  // namespace mml
