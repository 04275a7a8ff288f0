#include "mml/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace mml {

GradCheckResult grad_check(const std::function<Var()>& loss_fn,
                           const std::vector<Var>& params, double step) {
  for (const auto& p : params) p->zero_grad();
  Var loss = loss_fn();
  backward(loss);
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.push_back(p->ensure_grad());

  GradCheckResult res;
  NoGradGuard ng;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& value = params[pi]->value;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double saved = value[i];
      value[i] = saved + step;
      double lp = loss_fn()->value[0];
      value[i] = saved - step;
      double lm = loss_fn()->value[0];
      value[i] = saved;
      double numeric = (lp - lm) / (2.0 * step);
      double err = std::abs(analytic[pi][i] - numeric) /
                   std::max(1e-6, std::abs(numeric));
      if (err > res.max_rel_error) {
        res.max_rel_error = err;
        res.worst_param = params[pi]->name;
        res.worst_index = i;
      }
    }
  }
  return res;
}

}  // namespace mml
