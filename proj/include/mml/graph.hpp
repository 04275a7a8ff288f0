#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mml/tensor.hpp"

namespace mml {

struct Node;
using Var = std::shared_ptr<Node>;

/// One application of a primitive in the computation graph. Parents precede
/// the node by construction, so a reverse DFS order is a valid reverse
/// topological order for backpropagation.
struct Node {
  Tensor value;
  Tensor grad;  // allocated lazily; same shape as value once touched
  bool requires_grad = false;
  bool trainable = false;
  std::string name;
  std::vector<Var> parents;
  // Reads this->grad, accumulates into parents' grads.
  std::function<void(Node&)> backward_fn;

  Tensor& ensure_grad();
  void zero_grad();
};

/// Thread-local switch: when off, ops produce value-only nodes with no
/// parents or backward closures (used for evaluation passes).
bool& autograd_enabled();

struct NoGradGuard {
  NoGradGuard() : prev_(autograd_enabled()) { autograd_enabled() = false; }
  ~NoGradGuard() { autograd_enabled() = prev_; }

 private:
  bool prev_;
};

Var make_leaf(Tensor value, bool trainable = false, std::string name = "");
Var make_node(Tensor value, std::vector<Var> parents,
              std::function<void(Node&)> backward_fn);

/// Reverse-mode accumulation from a scalar loss node. Every trainable leaf
/// reachable from the loss ends up with its gradient added into `grad`;
/// unreachable leaves are left untouched (zero if freshly zeroed).
void backward(const Var& loss);

/// Sum of squared entries over the values of a parameter group.
double group_sq_norm(const std::vector<Var>& group);
/// Sum of squared entries over the gradients of a parameter group.
double group_grad_sq_norm(const std::vector<Var>& group);

}  // namespace mml
