#pragma once

#include <string>
#include <vector>

#include "mml/graph.hpp"
#include "mml/rng.hpp"

namespace mml {

/// Fan-in-scaled uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
Var init_param(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng,
               std::string name);

/// Constant-valued trainable parameter (batch-norm scale/shift).
Var const_param(std::vector<std::size_t> shape, double value, std::string name);

}  // namespace mml
