#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "dmssn/tensor.hpp"

namespace dmssn {

/// One value in the reverse-mode tape.
///
/// Nodes that do not require a gradient keep neither inputs nor a backward
/// rule, so evaluating a model whose leaves are all frozen records nothing.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  /// Gradient buffer, allocated as zeros on first use.
  Tensor& grad_buffer();
};

/// Handle to a tape node. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  Tensor& mutable_grad() { return node_->grad; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  const std::vector<int>& shape() const { return node_->value.shape(); }
  bool defined() const { return static_cast<bool>(node_); }
  void zero_grad() { node_->grad = Tensor(); }

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Leaf that never receives a gradient.
Var constant(Tensor value);
/// Leaf that accumulates gradients across backward passes.
Var parameter(Tensor value);

/// Builds an interior node. The backward rule and inputs are dropped when no
/// input requires a gradient.
Var make_node(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward);

/// Back-propagates from a scalar (single-element) output, seeding with `seed`.
/// Gradients accumulate into every reachable node that requires one.
void backward(const Var& output, double seed = 1.0);

using NamedParams = std::vector<std::pair<std::string, Var>>;

std::size_t parameter_count(const NamedParams& params);
void zero_grads(const NamedParams& params);
void set_trainable(const NamedParams& params, bool trainable);

}  // namespace dmssn
