#pragma once

#include <string>
#include <vector>

#include "mml/model.hpp"
#include "mml/synthdata.hpp"

namespace mml {

/// Which model derived from f is being evaluated.
enum class Variant { F, F0, F1, F0Prime, F1Prime };

const char* variant_name(Variant v);

struct UtilizationReport {
  double acc_f = 0.0;
  double acc_f0 = 0.0, acc_f0_prime = 0.0;
  double acc_f1 = 0.0, acc_f1_prime = 0.0;
  double u_m0_given_m1 = 0.0;  // (A(f1) - A(f1')) / A(f1)
  double u_m1_given_m0 = 0.0;  // (A(f0) - A(f0')) / A(f0)
  double diff_util = 0.0;      // u(m1|m0) - u(m0|m1)
  std::string dataset_id;
  std::string checkpoint_id;
  bool hbar_recomputed = true;  // false: training-time running means used
  // Set when some A(f') exceeds its A(f); u is reported unclamped.
  bool bound_violation = false;
};

/// Exact means of the squeezed vectors over the full training set, one
/// FusionStats per fusion module (evaluation mode, frozen network).
std::vector<FusionStats> compute_h_bar(MultiModalNet& net, const Split& train_split,
                                       std::size_t eval_batch = 256);

/// Fraction of correct argmax predictions of one derived model on a split.
/// `hbar` is required for the marginal variants.
double variant_accuracy(MultiModalNet& net, Variant variant, const Split& split,
                        const std::vector<FusionStats>* hbar = nullptr,
                        std::size_t eval_batch = 256);

/// Full conditional-utilization report on a test split.
UtilizationReport utilization(MultiModalNet& net, const Split& test_split,
                              const std::vector<FusionStats>& hbar,
                              std::size_t eval_batch = 256);

/// R(f): fraction of trainable parameters with |theta| below the threshold.
double sparsity_fraction(const MultiModalNet& net, double threshold = 1e-7);

}  // namespace mml
