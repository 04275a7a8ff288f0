#pragma once

#include <cstdint>
#include <vector>

#include "mml/graph.hpp"

namespace mml {

// Elementwise primitives. Binary ops take equal shapes, or a scalar
// (size-1) second operand which broadcasts.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var relu(const Var& a);
Var sigmoid(const Var& a);

/// Sum of all entries, as a scalar node.
Var sum_all(const Var& a);

/// [m x k] * [k x n] -> [m x n].
Var matmul(const Var& a, const Var& b);

/// Adds a length-N bias row to every row of a [B x N] tensor.
Var add_bias(const Var& a, const Var& bias);

/// Cross-correlation (no kernel flip) of [B x C x H x W] with
/// [F x C x kh x kw]; output [B x F x H' x W'] with
/// H' = (H + 2*pad - kh) / stride + 1 (floor).
Var conv2d(const Var& input, const Var& kernel, std::size_t stride,
           std::size_t padding);

/// Per-channel mean over spatial axes: [B x C x H x W] -> [B x C].
/// Rank-1 and rank-2 inputs have no spatial axes and pass through.
Var global_avg_pool(const Var& a);

/// Rank-1 [C] ++ [C'] -> [C+C'], or batched [B x C] ++ [B x C'] -> [B x C+C'].
Var concat_channels(const Var& a, const Var& b);

/// Multiplies every channel-c entry of `a` by 2*sigmoid(w_c).
/// `a` is [C], [B x C] or [B x C x H x W]; `w` is [C] (one gate vector
/// shared by the whole batch) or [B x C] (per-sample gates).
Var channel_scale(const Var& a, const Var& w);

/// Mean over the batch of -log softmax(logits)[label]; max-subtracted.
Var softmax_cross_entropy(const Var& logits, const std::vector<int>& labels);

/// Row-wise softmax of a [B x K] tensor (value-only, no graph node).
Tensor softmax_probs(const Tensor& logits);

/// Running statistics of one batch-norm layer (not trainable parameters).
struct BatchNormState {
  Tensor running_mean;  // [C]
  Tensor running_var;   // [C]
  void init(std::size_t channels);
};

/// Channel-wise batch normalization of [B x C x H x W]. Training mode uses
/// batch statistics and folds them into the running estimates with momentum
/// 0.9 (keep 0.9 of the old value); evaluation mode reads the running
/// estimates and mutates nothing.
Var batch_norm(const Var& x, const Var& gamma, const Var& beta,
               BatchNormState& state, bool training, double momentum = 0.9,
               double eps = 1e-5);

}  // namespace mml
