#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "mml/graph.hpp"

namespace mml {

/// Effective update of a parameter group: squared gradient norm (captured
/// before the optimizer step) over squared parameter norm (after the step).
double mu(double grad_sq_norm, double param_sq_norm_after);

/// Running sums of effective updates per parameter group, fed on Regular
/// steps only.
struct SpeedAccumulator {
  double m_theta0 = 0.0, m_fusion0 = 0.0;
  double m_theta1 = 0.0, m_fusion1 = 0.0;
  std::size_t steps = 0;

  void accumulate(double mu_theta0, double mu_fusion0, double mu_theta1,
                  double mu_fusion1);

  /// (s(m1|m0), s(m0|m1)): natural-log ratios of fusion-side to branch-side
  /// accumulated effective updates.
  std::pair<double, double> cond_speed() const;

  /// s(m1|m0) - s(m0|m1).
  double diff_speed() const;
};

struct MultiDiffSpeed {
  double value = 0.0;
  std::size_t max_index = 0;
  std::size_t min_index = 0;
};

/// k-modality extension: the spread between the two most different
/// conditional learning speeds. For k = 2 the magnitude equals |diff_speed|.
MultiDiffSpeed diff_speed_multi(const std::vector<double>& speeds);

}  // namespace mml
