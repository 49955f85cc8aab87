#include "dmssn/autograd.hpp"

#include <unordered_set>

#include "dmssn/error.hpp"

namespace dmssn {

Tensor& Node::grad_buffer() {
  if (grad.empty() && !value.empty()) grad = Tensor(value.shape(), 0.0);
  return grad;
}

Var constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

Var parameter(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var(std::move(n));
}

Var make_node(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  for (const auto& in : inputs) {
    if (in.requires_grad()) n->requires_grad = true;
  }
  if (n->requires_grad) {
    n->inputs.reserve(inputs.size());
    for (auto& in : inputs) n->inputs.push_back(in.shared());
    n->backward = std::move(backward);
  }
  return Var(std::move(n));
}

void backward(const Var& output, double seed) {
  if (!output.defined()) throw Error("backward on an undefined value");
  if (output.value().size() != 1) {
    throw ShapeError("backward needs a scalar output, got " + shape_string(output.shape()));
  }
  if (!output.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{output.node(), 0}};
  seen.insert(output.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  output.node()->grad_buffer()[0] += seed;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
  // Interior gradients are not needed once propagated; leaves keep theirs.
  for (Node* n : order) {
    if (n->backward) n->grad = Tensor();
  }
}

std::size_t parameter_count(const NamedParams& params) {
  std::size_t n = 0;
  for (const auto& [name, v] : params) n += v.value().size();
  return n;
}

void zero_grads(const NamedParams& params) {
  for (const auto& [name, v] : params) {
    Var copy = v;
    copy.zero_grad();
  }
}

void set_trainable(const NamedParams& params, bool trainable) {
  for (const auto& [name, v] : params) {
    Var copy = v;
    copy.set_requires_grad(trainable);
  }
}

}  // namespace dmssn
