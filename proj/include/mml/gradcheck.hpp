#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mml/graph.hpp"

namespace mml {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
};

/// Compares analytic gradients against central finite differences, one
/// parameter scalar at a time. `loss_fn` must rebuild the forward graph from
/// the parameters' current values on every call. Relative error per scalar is
/// |analytic - numeric| / max(1e-6, |numeric|); the absolute floor keeps
/// finite-difference roundoff on zero-gradient parameters (dead ReLU paths)
/// from reading as spurious relative error.
///
/// Note: if the loss involves train-mode batch norm, running statistics drift
/// during probing; run this on a throwaway network.
GradCheckResult grad_check(const std::function<Var()>& loss_fn,
                           const std::vector<Var>& params, double step = 1e-5);

}  // namespace mml
