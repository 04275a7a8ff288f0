#include "mml/diagnose.hpp"

#include <cmath>

namespace mml {
namespace {

std::vector<std::size_t> range_chunk(std::size_t start, std::size_t end) {
  std::vector<std::size_t> idx(end - start);
  for (std::size_t i = start; i < end; ++i) idx[i - start] = i;
  return idx;
}

}  // namespace

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::F: return "f";
    case Variant::F0: return "f0";
    case Variant::F1: return "f1";
    case Variant::F0Prime: return "f0'";
    case Variant::F1Prime: return "f1'";
  }
  return "?";
}

std::vector<FusionStats> compute_h_bar(MultiModalNet& net, const Split& train_split,
                                       std::size_t eval_batch) {
  if (train_split.size() == 0) throw Error("compute_h_bar: empty dataset");
  NoGradGuard ng;
  const bool was_training = net.training;
  net.training = false;
  std::vector<FusionStats> stats(net.fusions.size());
  for (std::size_t fi = 0; fi < net.fusions.size(); ++fi)
    stats[fi].init(net.fusions[fi].c0, net.fusions[fi].c1);
  for (std::size_t start = 0; start < train_split.size(); start += eval_batch) {
    auto idx = range_chunk(start, std::min(train_split.size(), start + eval_batch));
    Tensor x0 = train_split.batch_x0(idx);
    Tensor x1 = train_split.batch_x1(idx);
    auto res = net.forward(&x0, &x1, FusionMode::Regular, nullptr, /*capture=*/true);
    for (std::size_t fi = 0; fi < net.fusions.size(); ++fi) {
      const FusionCapture& cap = res.captures[fi];
      const std::size_t b = cap.h0.shape[0];
      for (std::size_t r = 0; r < b; ++r) {
        for (std::size_t c = 0; c < stats[fi].h0_sum.size(); ++c)
          stats[fi].h0_sum[c] += cap.h0[r * stats[fi].h0_sum.size() + c];
        for (std::size_t c = 0; c < stats[fi].h1_sum.size(); ++c)
          stats[fi].h1_sum[c] += cap.h1[r * stats[fi].h1_sum.size() + c];
        for (std::size_t c = 0; c < stats[fi].w0_sum.size(); ++c)
          stats[fi].w0_sum[c] += cap.w0[r * stats[fi].w0_sum.size() + c];
        for (std::size_t c = 0; c < stats[fi].w1_sum.size(); ++c)
          stats[fi].w1_sum[c] += cap.w1[r * stats[fi].w1_sum.size() + c];
      }
      stats[fi].h_count += b;
      stats[fi].w_count += b;
    }
  }
  net.training = was_training;
  return stats;
}

double variant_accuracy(MultiModalNet& net, Variant variant, const Split& split,
                        const std::vector<FusionStats>* hbar,
                        std::size_t eval_batch) {
  if (split.size() == 0) throw Error("variant_accuracy: empty dataset");
  if ((variant == Variant::F0Prime || variant == Variant::F1Prime) && !hbar)
    throw Error("variant_accuracy: marginal variants require h-bar statistics");
  NoGradGuard ng;
  const bool was_training = net.training;
  net.training = false;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < split.size(); start += eval_batch) {
    auto idx = range_chunk(start, std::min(split.size(), start + eval_batch));
    Tensor x0 = split.batch_x0(idx);
    Tensor x1 = split.batch_x1(idx);
    auto labels = split.batch_labels(idx);
    std::vector<int> pred;
    switch (variant) {
      case Variant::F: {
        auto res = net.forward(&x0, &x1, FusionMode::Regular);
        pred = predict(res.probs_avg);
        break;
      }
      case Variant::F0: {
        auto res = net.forward(&x0, &x1, FusionMode::Regular);
        pred = predict(res.probs0);
        break;
      }
      case Variant::F1: {
        auto res = net.forward(&x0, &x1, FusionMode::Regular);
        pred = predict(res.probs1);
        break;
      }
      case Variant::F0Prime: {
        auto res = net.forward(&x0, nullptr, FusionMode::MarginalM0, hbar);
        pred = predict(res.probs0);
        break;
      }
      case Variant::F1Prime: {
        auto res = net.forward(nullptr, &x1, FusionMode::MarginalM1, hbar);
        pred = predict(res.probs1);
        break;
      }
    }
    for (std::size_t i = 0; i < pred.size(); ++i)
      if (pred[i] == labels[i]) ++correct;
  }
  net.training = was_training;
  return static_cast<double>(correct) / static_cast<double>(split.size());
}

UtilizationReport utilization(MultiModalNet& net, const Split& test_split,
                              const std::vector<FusionStats>& hbar,
                              std::size_t eval_batch) {
  UtilizationReport rep;
  rep.acc_f = variant_accuracy(net, Variant::F, test_split, nullptr, eval_batch);
  rep.acc_f0 = variant_accuracy(net, Variant::F0, test_split, nullptr, eval_batch);
  rep.acc_f1 = variant_accuracy(net, Variant::F1, test_split, nullptr, eval_batch);
  rep.acc_f0_prime =
      variant_accuracy(net, Variant::F0Prime, test_split, &hbar, eval_batch);
  rep.acc_f1_prime =
      variant_accuracy(net, Variant::F1Prime, test_split, &hbar, eval_batch);
  if (rep.acc_f0 <= 0.0 || rep.acc_f1 <= 0.0)
    throw Error("utilization undefined: a branch accuracy is zero");
  rep.u_m0_given_m1 = (rep.acc_f1 - rep.acc_f1_prime) / rep.acc_f1;
  rep.u_m1_given_m0 = (rep.acc_f0 - rep.acc_f0_prime) / rep.acc_f0;
  rep.diff_util = rep.u_m1_given_m0 - rep.u_m0_given_m1;
  rep.bound_violation =
      rep.acc_f0_prime > rep.acc_f0 || rep.acc_f1_prime > rep.acc_f1;
  return rep;
}

double sparsity_fraction(const MultiModalNet& net, double threshold) {
  std::size_t below = 0, total = 0;
  for (const auto& p : net.all_params())
    for (double v : p->value.data) {
      if (std::abs(v) < threshold) ++below;
      ++total;
    }
  return total == 0 ? 0.0 : static_cast<double>(below) / static_cast<double>(total);
}

}  // namespace mml
