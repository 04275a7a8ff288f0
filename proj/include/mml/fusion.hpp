#pragma once

#include <cstddef>
#include <string>
#include <utility>

#include "mml/graph.hpp"
#include "mml/rng.hpp"

namespace mml {

/// How a forward pass treats the fusion gates. One mode applies to every
/// fusion module of the network uniformly.
enum class FusionMode {
  Regular,      // per-sample gates on both branches
  MarginalM0,   // branch-0 gates from [h0, mean(h1)]; branch 1 not evaluated
  MarginalM1,   // branch-1 gates from [mean(h0), h1]; branch 0 not evaluated
  RebalanceM0,  // branch 0 gated by the mean gate activation, branch 1 per-sample
  RebalanceM1,  // mirror image
};

const char* fusion_mode_name(FusionMode m);

/// Running means of the squeezed vectors (h) and pre-sigmoid gate
/// activations (w), stored as sums plus counts so streaming updates and
/// checkpoint round-trips are exact.
struct FusionStats {
  Tensor h0_sum, h1_sum;  // [C], [C']
  Tensor w0_sum, w1_sum;  // [C], [C']
  std::size_t h_count = 0;
  std::size_t w_count = 0;

  void init(std::size_t c0, std::size_t c1);
  Tensor h0_mean() const;
  Tensor h1_mean() const;
  Tensor w0_mean() const;
  Tensor w1_mean() const;
};

/// One MMTM gate: a shared joint projection followed by ReLU and two
/// branch-specific projections back to the channel counts.
struct FusionModule {
  std::size_t c0 = 0, c1 = 0, hidden = 0;
  Var joint_w, joint_b;  // [(C+C') x H], [H]   -- in both theta'_0 and theta'_1
  Var gate0_w, gate0_b;  // [H x C], [C]        -- theta'_0 only
  Var gate1_w, gate1_b;  // [H x C'], [C']      -- theta'_1 only
  FusionStats stats;

  static FusionModule create(std::size_t c0, std::size_t c1,
                             std::size_t reduction, Rng& rng,
                             const std::string& name_prefix);

  /// Global average pooling of both branches' feature maps to [B x C] and
  /// [B x C'] channel vectors.
  std::pair<Var, Var> squeeze(const Var& a0, const Var& a1) const;

  /// Gate activations for the given mode. Marginal modes return only the
  /// evaluated branch (the other Var is null). `stats_override` replaces the
  /// module's running means (used when h-bar is recomputed at diagnosis time).
  std::pair<Var, Var> excite(const Var& h0, const Var& h1, FusionMode mode,
                             const FusionStats* stats_override = nullptr) const;

  /// Applies 2*sigmoid(gate) channel scaling per the mode. In rebalance
  /// modes one branch's gate is the stored mean activation, constant across
  /// the batch.
  std::pair<Var, Var> apply_gates(const Var& a0, const Var& a1, const Var& w0,
                                  const Var& w1, FusionMode mode) const;

  /// Folds one batch of observed (h, w) vectors into the running means.
  /// Called on Regular steps only.
  void update_stats(const Tensor& h0, const Tensor& h1, const Tensor& w0,
                    const Tensor& w1);
};

}  // namespace mml
