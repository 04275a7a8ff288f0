#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mml/model.hpp"
#include "mml/speedtrack.hpp"
#include "mml/synthdata.hpp"

namespace mml {

enum class Algorithm { Vanilla, Guided, Random };

const char* algorithm_name(Algorithm a);
Algorithm algorithm_from_name(const std::string& name);

enum class StepKind { Regular, RebalanceM0, RebalanceM1 };

struct TrainConfig {
  Algorithm algorithm = Algorithm::Vanilla;
  double lr = 0.01;
  double momentum = 0.9;
  std::size_t batch_size = 128;
  std::size_t epochs = 60;
  std::size_t rebalance_window = 5;   // Q
  double imbalance_tolerance = 0.1;   // alpha; strict ">" comparison
  double l1 = 0.0;                    // lambda
  std::uint64_t seed = 0;
  bool batchnorm = true;
  bool average_probs = true;
  bool stop_at_full_train_acc = true;
  std::size_t eval_batch = 256;
  std::string step_log_path;  // optional per-step metrics (jsonl)

  void validate() const;
};

/// SGD with momentum. L1 is applied by the trainer as a subgradient added
/// into the gradient buffers before the step (so effective-update capture
/// sees the full update direction).
class SgdOptimizer {
 public:
  SgdOptimizer(std::vector<Var> params, double lr, double momentum);

  /// v <- momentum*v + g; theta <- theta - lr*v. Throws on non-finite
  /// gradients.
  void step();

  std::vector<Tensor>& velocity() { return velocity_; }
  const std::vector<Var>& params() const { return params_; }

 private:
  std::vector<Var> params_;
  std::vector<Tensor> velocity_;
  double lr_, momentum_;
};

/// Adds lambda*sign(theta) into each parameter's gradient buffer
/// (subgradient 0 at theta == 0). No-op when lambda == 0.
void apply_l1_subgradient(const std::vector<Var>& params, double lambda);

/// Everything mutable in a training run, captured at an epoch boundary.
/// Reloading a snapshot reproduces subsequent training bit-identically.
struct TrainSnapshot {
  std::vector<Tensor> tensors;   // values of net.named_tensors(), in order
  std::vector<Tensor> momentum;  // parallel to net.all_params()
  std::vector<std::size_t> fusion_h_counts, fusion_w_counts;
  SpeedAccumulator acc;
  std::size_t epochs_done = 0;
  std::size_t total_steps = 0;
  double best_val_acc = -1.0;
  std::size_t best_epoch = 0;
  std::size_t best_steps = 0;  // T: optimizer steps at the best checkpoint
  // Guided-algorithm state machine.
  std::size_t q = 0;
  double last_diff_speed = 0.0;
};

TrainSnapshot take_snapshot(MultiModalNet& net, const std::vector<Tensor>& momentum);
void restore_snapshot(MultiModalNet& net, std::vector<Tensor>& momentum,
                      const TrainSnapshot& snap);

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double diff_speed = 0.0;
  std::size_t regular_steps = 0, rebalance_m0_steps = 0, rebalance_m1_steps = 0;
  std::size_t cumulative_steps = 0;
};

struct TrainResult {
  TrainSnapshot best;  // highest validation accuracy, earliest epoch on ties
  TrainSnapshot last;  // end-of-run state, resumable
  std::vector<EpochMetrics> history;
  std::size_t epochs_run = 0;
  bool diverged = false;
  std::string status = "ok";
  double best_val_acc = 0.0;
  std::size_t best_epoch = 0;
  std::size_t best_steps = 0;  // T
};

/// Runs the configured algorithm (vanilla / guided / random) on the dataset.
/// Pass `resume` to continue a run from a prior epoch-boundary snapshot.
TrainResult train(MultiModalNet& net, const BimodalDataset& data,
                  const TrainConfig& cfg, const TrainSnapshot* resume = nullptr);

/// Accuracy of the averaged prediction on a split (evaluation mode).
double evaluate_accuracy(MultiModalNet& net, const Split& split,
                         std::size_t eval_batch = 256);

}  // namespace mml
