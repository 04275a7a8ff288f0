#include "mml/fusion.hpp"

#include <algorithm>

#include "mml/init.hpp"
#include "mml/ops.hpp"

namespace mml {
namespace {

Tensor mean_of(const Tensor& sum, std::size_t count, const char* what) {
  if (count == 0)
    throw Error(std::string("FusionStats: ") + what +
                " requested but stats not warmed up (count 0)");
  Tensor m = sum;
  for (double& v : m.data) v /= static_cast<double>(count);
  return m;
}

/// Constant [B x C] node whose every row is `row`.
Var broadcast_rows(const Tensor& row, std::size_t batch) {
  Tensor t({batch, row.size()});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < row.size(); ++c) t[b * row.size() + c] = row[c];
  return make_leaf(std::move(t));
}

void accumulate_rows(Tensor& sum, const Tensor& batch) {
  const std::size_t c = sum.size();
  if (batch.rank() != 2 || batch.shape[1] != c)
    throw Error("FusionStats: observation shape " + shape_str(batch.shape) +
                " does not match " + shape_str(sum.shape));
  for (std::size_t b = 0; b < batch.shape[0]; ++b)
    for (std::size_t i = 0; i < c; ++i) sum[i] += batch[b * c + i];
}

}  // namespace

const char* fusion_mode_name(FusionMode m) {
  switch (m) {
    case FusionMode::Regular: return "regular";
    case FusionMode::MarginalM0: return "marginal-m0";
    case FusionMode::MarginalM1: return "marginal-m1";
    case FusionMode::RebalanceM0: return "rebalance-m0";
    case FusionMode::RebalanceM1: return "rebalance-m1";
  }
  return "?";
}

void FusionStats::init(std::size_t c0, std::size_t c1) {
  h0_sum = Tensor({c0}, 0.0);
  h1_sum = Tensor({c1}, 0.0);
  w0_sum = Tensor({c0}, 0.0);
  w1_sum = Tensor({c1}, 0.0);
  h_count = 0;
  w_count = 0;
}

Tensor FusionStats::h0_mean() const { return mean_of(h0_sum, h_count, "h0 mean"); }
Tensor FusionStats::h1_mean() const { return mean_of(h1_sum, h_count, "h1 mean"); }
Tensor FusionStats::w0_mean() const { return mean_of(w0_sum, w_count, "w0 mean"); }
Tensor FusionStats::w1_mean() const { return mean_of(w1_sum, w_count, "w1 mean"); }

FusionModule FusionModule::create(std::size_t c0, std::size_t c1,
                                  std::size_t reduction, Rng& rng,
                                  const std::string& p) {
  if (c0 == 0 || c1 == 0) throw Error("FusionModule: channel counts must be positive");
  FusionModule m;
  m.c0 = c0;
  m.c1 = c1;
  m.hidden = std::max<std::size_t>(1, (c0 + c1) / std::max<std::size_t>(1, reduction));
  const std::size_t cin = c0 + c1;
  m.joint_w = init_param({cin, m.hidden}, cin, rng, p + ".joint.weight");
  m.joint_b = init_param({m.hidden}, cin, rng, p + ".joint.bias");
  m.gate0_w = init_param({m.hidden, c0}, m.hidden, rng, p + ".gate0.weight");
  m.gate0_b = init_param({c0}, m.hidden, rng, p + ".gate0.bias");
  m.gate1_w = init_param({m.hidden, c1}, m.hidden, rng, p + ".gate1.weight");
  m.gate1_b = init_param({c1}, m.hidden, rng, p + ".gate1.bias");
  m.stats.init(c0, c1);
  return m;
}

std::pair<Var, Var> FusionModule::squeeze(const Var& a0, const Var& a1) const {
  Var h0 = a0 ? global_avg_pool(a0) : nullptr;
  Var h1 = a1 ? global_avg_pool(a1) : nullptr;
  if (h0 && h0->value.shape.back() != c0)
    throw Error("FusionModule::squeeze: branch-0 channels " +
                shape_str(h0->value.shape) + " do not match configured C=" +
                std::to_string(c0));
  if (h1 && h1->value.shape.back() != c1)
    throw Error("FusionModule::squeeze: branch-1 channels " +
                shape_str(h1->value.shape) + " do not match configured C'=" +
                std::to_string(c1));
  return {h0, h1};
}

std::pair<Var, Var> FusionModule::excite(const Var& h0, const Var& h1,
                                         FusionMode mode,
                                         const FusionStats* ov) const {
  const FusionStats& st = ov ? *ov : stats;
  auto project = [this](const Var& joint_in, bool branch0, bool branch1) {
    Var hid = relu(add_bias(matmul(joint_in, joint_w), joint_b));
    Var w0v = branch0 ? add_bias(matmul(hid, gate0_w), gate0_b) : nullptr;
    Var w1v = branch1 ? add_bias(matmul(hid, gate1_w), gate1_b) : nullptr;
    return std::make_pair(w0v, w1v);
  };

  switch (mode) {
    case FusionMode::Regular:
    case FusionMode::RebalanceM0:
    case FusionMode::RebalanceM1: {
      // Rebalance modes still excite per-sample; the mean substitution
      // happens at gate application. The frozen branch's gate projection
      // feeds nothing on such a step, so it is skipped.
      bool need0 = mode != FusionMode::RebalanceM0;
      bool need1 = mode != FusionMode::RebalanceM1;
      return project(concat_channels(h0, h1), need0, need1);
    }
    case FusionMode::MarginalM0: {
      std::size_t batch = h0->value.rank() == 2 ? h0->value.shape[0] : 0;
      Var hbar1 = batch ? broadcast_rows(st.h1_mean(), batch)
                        : make_leaf(st.h1_mean());
      return project(concat_channels(h0, hbar1), true, false);
    }
    case FusionMode::MarginalM1: {
      std::size_t batch = h1->value.rank() == 2 ? h1->value.shape[0] : 0;
      Var hbar0 = batch ? broadcast_rows(st.h0_mean(), batch)
                        : make_leaf(st.h0_mean());
      return project(concat_channels(hbar0, h1), false, true);
    }
  }
  throw Error("FusionModule::excite: bad mode");
}

std::pair<Var, Var> FusionModule::apply_gates(const Var& a0, const Var& a1,
                                              const Var& w0, const Var& w1,
                                              FusionMode mode) const {
  switch (mode) {
    case FusionMode::Regular:
      return {channel_scale(a0, w0), channel_scale(a1, w1)};
    case FusionMode::MarginalM0:
      return {channel_scale(a0, w0), nullptr};
    case FusionMode::MarginalM1:
      return {nullptr, channel_scale(a1, w1)};
    case FusionMode::RebalanceM0:
      return {channel_scale(a0, make_leaf(stats.w0_mean())),
              channel_scale(a1, w1)};
    case FusionMode::RebalanceM1:
      return {channel_scale(a0, w0),
              channel_scale(a1, make_leaf(stats.w1_mean()))};
  }
  throw Error("FusionModule::apply_gates: bad mode");
}

void FusionModule::update_stats(const Tensor& h0, const Tensor& h1,
                                const Tensor& w0, const Tensor& w1) {
  accumulate_rows(stats.h0_sum, h0);
  accumulate_rows(stats.h1_sum, h1);
  accumulate_rows(stats.w0_sum, w0);
  accumulate_rows(stats.w1_sum, w1);
  stats.h_count += h0.shape[0];
  stats.w_count += w0.shape[0];
}

}  // namespace mml
