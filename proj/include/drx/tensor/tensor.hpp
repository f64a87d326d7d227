#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "drx/errors.hpp"

namespace drx {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

template <typename T>
struct TensorNode;

template <typename T>
using NodePtr = std::shared_ptr<TensorNode<T>>;

// One vertex of the differentiation graph. Leaves have no parents; op nodes
// carry a backward rule that reads `grad` and accumulates into parent grads.
template <typename T>
struct TensorNode {
  Shape shape;
  std::shared_ptr<std::vector<T>> data;
  std::vector<T> grad;  // empty until populated
  bool requires_grad = false;
  bool consumed = false;  // root of a completed backward
  std::string op = "leaf";
  std::vector<NodePtr<T>> parents;
  std::function<void(TensorNode&)> backward;

  bool is_leaf() const { return parents.empty(); }

  std::vector<T>& ensure_grad() {
    if (grad.empty()) grad.assign(data->size(), T(0));
    return grad;
  }
};

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    std::vector<T> v(shape_numel(shape), T(0));
    return from(std::move(shape), std::move(v), requires_grad);
  }

  static Tensor full(Shape shape, T value, bool requires_grad = false) {
    std::vector<T> v(shape_numel(shape), value);
    return from(std::move(shape), std::move(v), requires_grad);
  }

  static Tensor scalar(T value, bool requires_grad = false) { return from({1}, {value}, requires_grad); }

  static Tensor from(Shape shape, std::vector<T> values, bool requires_grad = false) {
    if (shape_numel(shape) != values.size()) {
      throw ShapeError("tensor: shape " + shape_str(shape) + " holds " +
                       std::to_string(shape_numel(shape)) + " values, got " +
                       std::to_string(values.size()));
    }
    auto node = std::make_shared<TensorNode<T>>();
    node->shape = std::move(shape);
    node->data = std::make_shared<std::vector<T>>(std::move(values));
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
  }

  // Builds an op result. Parents that do not require grad are dropped from the
  // graph, and if none requires grad the result is a plain constant.
  static Tensor from_op(std::string op, Shape shape, std::vector<T> values, std::vector<Tensor> inputs,
                        std::function<void(TensorNode<T>&)> backward) {
    for (const T v : values) {
      if (!std::isfinite(static_cast<double>(v))) {
        throw NumericError(op + ": produced a non-finite value");
      }
    }
    Tensor out = from(std::move(shape), std::move(values), false);
    bool any = false;
    for (const auto& in : inputs) any = any || in.requires_grad();
    if (any) {
      out.node_->requires_grad = true;
      out.node_->op = std::move(op);
      for (auto& in : inputs) out.node_->parents.push_back(in.node_);
      out.node_->backward = std::move(backward);
    } else {
      out.node_->op = std::move(op);
    }
    return out;
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t numel() const { return node_->data->size(); }

  std::span<const T> data() const { return *node_->data; }
  // Leaves only: optimizers and the finite-difference oracle write through this.
  std::span<T> mutable_data() {
    if (!node_->is_leaf()) throw GraphError("mutable_data: tensor is not a leaf");
    return *node_->data;
  }
  T operator[](std::size_t i) const { return (*node_->data)[i]; }
  T item() const {
    if (numel() != 1) throw ShapeError("item: tensor " + shape_str(shape()) + " is not a scalar");
    return (*node_->data)[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const T> grad() const { return node_->grad; }
  void zero_grad() {
    node_->grad.clear();
    node_->consumed = false;
  }

  // Same storage, no history, no gradient.
  Tensor detach() const {
    auto node = std::make_shared<TensorNode<T>>();
    node->shape = node_->shape;
    node->data = node_->data;
    return Tensor(std::move(node));
  }

  // Same storage as a fresh leaf that does require grad (graph cut point).
  Tensor tap() const {
    Tensor t = detach();
    t.node_->requires_grad = true;
    return t;
  }

  Tensor clone(bool requires_grad = false) const { return from(shape(), *node_->data, requires_grad); }

  const std::string& op() const { return node_->op; }
  const NodePtr<T>& node() const { return node_; }

 private:
  explicit Tensor(NodePtr<T> node) : node_(std::move(node)) {}
  NodePtr<T> node_;
};

// Reverse-mode sweep from a scalar root. Every node is visited once, in
// reverse topological order; fan-out contributions accumulate additively.
template <typename T>
void backward(const Tensor<T>& root) {
  if (!root.defined() || root.numel() != 1) {
    throw GraphError("backward: root must be a scalar tensor");
  }
  const auto& rnode = root.node();
  if (!rnode->requires_grad) throw GraphError("backward: root does not depend on any requires_grad tensor");
  if (rnode->consumed) throw GraphError("backward: graph already differentiated; reset gradients first");

  std::vector<TensorNode<T>*> order;
  std::unordered_set<TensorNode<T>*> seen;
  // iterative post-order DFS
  std::vector<std::pair<TensorNode<T>*, std::size_t>> stack{{rnode.get(), 0}};
  seen.insert(rnode.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorNode<T>* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (TensorNode<T>* n : order) {
    if (!n->grad.empty()) {
      throw GraphError("backward: gradient buffer on '" + n->op +
                       "' already populated; call zero_grad() before a second backward");
    }
  }

  rnode->ensure_grad()[0] = T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode<T>* n = *it;
    if (n->backward) n->backward(*n);
  }
  rnode->consumed = true;
}

}  // namespace drx
