#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mml/fusion.hpp"
#include "mml/ops.hpp"

namespace mml {

struct ConvLayerSpec {
  std::size_t out_channels = 8;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t pad = 1;
};

struct ArchConfig {
  std::vector<ConvLayerSpec> layers = {{8, 3, 2, 1}, {16, 3, 2, 1}, {32, 3, 1, 1}};
  std::vector<std::size_t> fusion_after = {2, 3};  // 1-based layer indices
  std::size_t classes = 10;
  std::size_t fusion_reduction = 4;
  bool batchnorm = true;
  // Prediction averaging: probabilities (default) or logits.
  bool average_probs = true;
};

struct ConvLayer {
  Var kernel, bias;
  Var bn_gamma, bn_beta;  // null when batchnorm is off
  BatchNormState bn;
  std::size_t stride = 1, pad = 0;
};

struct Branch {
  std::vector<ConvLayer> layers;
  Var head_w, head_b;
};

/// Values observed at one fusion module during a Regular forward pass,
/// recorded for the running-mean updates.
struct FusionCapture {
  Tensor h0, h1, w0, w1;  // each [B x C]
};

struct ForwardResult {
  Var logits0, logits1;  // null for the branch a marginal mode skips
  Tensor probs0, probs1, probs_avg;
  std::vector<FusionCapture> captures;  // one per fusion module when requested
};

/// The four named parameter groups. The joint fusion blocks belong to both
/// fusion-side groups; everything else is disjoint.
struct ParamPartition {
  std::vector<Var> theta0, theta1;  // branch parameters incl. heads and BN
  std::vector<Var> joint;           // shared fusion projections
  std::vector<Var> gate0, gate1;    // branch-specific fusion projections

  std::vector<Var> fusion0() const;  // theta'_0 = joint + gate0
  std::vector<Var> fusion1() const;  // theta'_1 = joint + gate1
  std::size_t total_count() const;   // joint blocks counted once
};

struct NamedTensor {
  std::string name;
  Tensor* tensor;
  std::string label;  // theta0 | theta1 | joint | gate0 | gate1 | state
};

/// Two uni-modal conv branches joined by fusion modules at configured
/// depths, each with a linear head on its pooled features.
class MultiModalNet {
 public:
  ArchConfig cfg;
  std::size_t in_c0 = 0, in_c1 = 0, img = 0;
  Branch branch0, branch1;
  std::vector<FusionModule> fusions;
  bool training = false;

  static MultiModalNet create(const ArchConfig& cfg, std::size_t in_c0,
                              std::size_t in_c1, std::size_t img,
                              std::uint64_t seed);

  /// x1 may be null only in MarginalM0 (and x0 only in MarginalM1).
  /// `stats_override` supplies recomputed per-module means for marginal
  /// evaluation; `capture` records per-module (h, w) batches.
  ForwardResult forward(const Tensor* x0, const Tensor* x1, FusionMode mode,
                        const std::vector<FusionStats>* stats_override = nullptr,
                        bool capture = false);

  ParamPartition partition() const;
  std::vector<Var> all_params() const;
  /// Parameters plus all non-trainable state (BN running stats, fusion sums),
  /// in a fixed serialization order.
  std::vector<NamedTensor> named_tensors();

  /// The relabeled network: branches, fusion projections and stats swapped,
  /// so evaluating it on swapped inputs mirrors this network exactly.
  MultiModalNet mirrored() const;

  /// Structural deep copy (fresh leaves with identical values).
  MultiModalNet clone() const;
};

/// Sum of the two modality-specific cross-entropies (batch-mean each).
Var multimodal_loss(const Var& logits0, const Var& logits1,
                    const std::vector<int>& labels);

/// Argmax per row with ties broken toward the lowest class index. Rows are
/// validated to sum to 1 within 1e-6.
std::vector<int> predict(const Tensor& probs);
/// Argmax without the probability-sum validation (for raw logit rows).
std::vector<int> argmax_rows(const Tensor& rows);

}  // namespace mml
