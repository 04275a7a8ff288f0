#include "mml/graph.hpp"

#include <unordered_set>

namespace mml {

Tensor& Node::ensure_grad() {
  if (grad.shape != value.shape) grad = Tensor(value.shape, 0.0);
  return grad;
}

void Node::zero_grad() {
  if (grad.shape == value.shape)
    grad.fill(0.0);
  else
    grad = Tensor(value.shape, 0.0);
}

bool& autograd_enabled() {
  thread_local bool enabled = true;
  return enabled;
}

Var make_leaf(Tensor value, bool trainable, std::string name) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->trainable = trainable;
  n->requires_grad = trainable;
  n->name = std::move(name);
  return n;
}

Var make_node(Tensor value, std::vector<Var> parents,
              std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  if (autograd_enabled()) {
    for (const auto& p : parents)
      if (p && p->requires_grad) {
        n->requires_grad = true;
        break;
      }
    if (n->requires_grad) {
      n->parents = std::move(parents);
      n->backward_fn = std::move(backward_fn);
    }
  }
  return n;
}

void backward(const Var& loss) {
  if (!loss) throw Error("backward: null loss node");
  if (loss->value.size() != 1)
    throw Error("backward: loss must be scalar, got shape " +
                shape_str(loss->value.shape));
  if (!loss->requires_grad) return;

  // Iterative post-order DFS; postorder reversed is a valid backprop order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.get(), 0);
  visited.insert(loss.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx].get();
      ++idx;
      if (p && p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order)
    if (n != loss.get()) n->ensure_grad();
  loss->ensure_grad();
  loss->grad.data[0] += 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

double group_sq_norm(const std::vector<Var>& group) {
  if (group.empty()) throw Error("group_sq_norm: empty parameter group");
  double s = 0.0;
  for (const auto& v : group)
    for (double x : v->value.data) s += x * x;
  return s;
}

double group_grad_sq_norm(const std::vector<Var>& group) {
  if (group.empty()) throw Error("group_grad_sq_norm: empty parameter group");
  double s = 0.0;
  for (const auto& v : group) {
    if (v->grad.shape != v->value.shape) continue;  // never touched: zero
    for (double x : v->grad.data) s += x * x;
  }
  return s;
}

}  // namespace mml
