#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "core/error.hpp"

namespace spmkd {

using Shape = std::vector<std::int64_t>;

inline std::int64_t numel(const Shape& s) {
  std::int64_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

// One vertex of the autodiff graph. Ops create a node per output; parents
// keep the upstream graph alive until every handle to the result is dropped.
template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> values;
  bool requires_grad = false;
  std::vector<T> grad;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward_fn;
  const char* op = "leaf";

  std::int64_t size() const { return static_cast<std::int64_t>(values.size()); }

  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), T(0));
  }
};

// Value-semantics handle over a shared graph node. Tensors are immutable
// once created; the two sanctioned exceptions are optimizer updates through
// values_mutable() and gradient buffers during backward().
template <typename T>
class Tensor {
 public:
  using Node = TensorNode<T>;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return filled(std::move(shape), T(0), requires_grad);
  }

  static Tensor filled(Shape shape, T value, bool requires_grad = false) {
    auto node = std::make_shared<Node>();
    node->values.assign(static_cast<std::size_t>(numel(shape)), value);
    node->shape = std::move(shape);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
  }

  static Tensor from(Shape shape, std::vector<T> values, bool requires_grad = false) {
    if (static_cast<std::int64_t>(values.size()) != numel(shape)) {
      throw DimensionError("tensor data length " + std::to_string(values.size()) +
                           " does not match shape " + shape_str(shape));
    }
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->values = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
  }

  static Tensor scalar(T value, bool requires_grad = false) {
    return from({1}, {value}, requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::int64_t size() const { return node_->size(); }
  bool requires_grad() const { return node_->requires_grad; }

  const std::vector<T>& values() const { return node_->values; }
  std::vector<T>& values_mutable() const { return node_->values; }

  const std::vector<T>& grad() const { return node_->grad; }

  bool has_grad() const { return !node_->grad.empty(); }

  void zero_grad() const {
    if (node_->requires_grad) node_->grad.assign(node_->values.size(), T(0));
  }

  T item() const {
    if (node_->size() != 1) {
      throw DimensionError("item() requires a single-element tensor, got " + shape_str(node_->shape));
    }
    return node_->values[0];
  }

  bool all_finite() const {
    for (T v : node_->values) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  // Same values, detached from the graph.
  Tensor detach() const {
    auto node = std::make_shared<Node>();
    node->shape = node_->shape;
    node->values = node_->values;
    node->requires_grad = false;
    return Tensor(std::move(node));
  }

  // Reverse-mode sweep from a scalar root. Seeds d(root)/d(root) = 1 and
  // walks the graph in reverse topological order.
  void backward() const {
    if (node_->size() != 1) {
      throw DimensionError("backward() requires a scalar root, got " + shape_str(node_->shape));
    }
    if (!node_->requires_grad) {
      throw StateError("backward() called on a tensor that does not require gradients");
    }
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    seen.insert(node_.get());
    while (!stack.empty()) {
      auto& [n, next] = stack.back();
      if (next < n->parents.size()) {
        Node* p = n->parents[next++].get();
        if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
      } else {
        order.push_back(n);
        stack.pop_back();
      }
    }
    node_->ensure_grad();
    node_->grad[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node* n = *it;
      if (n->backward_fn) n->backward_fn(*n);
    }
  }

  std::shared_ptr<Node> node() const { return node_; }

  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<Node> node_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

namespace detail {

// Builds the result node for an op: values moved in, parents attached only
// when some input tracks gradients.
template <typename T>
Tensor<T> make_op_result(Shape shape, std::vector<T> values, const char* op,
                         std::vector<std::shared_ptr<TensorNode<T>>> parents,
                         std::function<void(TensorNode<T>&)> backward_fn) {
  auto node = std::make_shared<TensorNode<T>>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->op = op;
  bool needs = false;
  for (const auto& p : parents) {
    if (p->requires_grad) needs = true;
  }
  if (needs) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor<T>(std::move(node));
}

template <typename T>
void accumulate(TensorNode<T>& parent, const std::vector<T>& delta) {
  parent.ensure_grad();
  for (std::size_t i = 0; i < delta.size(); ++i) parent.grad[i] += delta[i];
}

}  // namespace detail

}  // namespace spmkd
