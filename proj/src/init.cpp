#include "mml/init.hpp"

#include <cmath>

namespace mml {

Var init_param(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng,
               std::string name) {
  Tensor t(shape);
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : t.data) v = rng.uniform(-bound, bound);
  return make_leaf(std::move(t), /*trainable=*/true, std::move(name));
}

Var const_param(std::vector<std::size_t> shape, double value, std::string name) {
  return make_leaf(Tensor(std::move(shape), value), /*trainable=*/true,
                   std::move(name));
}

}  // namespace mml
