// Dense tensor with a reverse-mode autodiff tape.
//
// A Tensor is a shared handle to a Node holding shape, contiguous values,
// an optional gradient buffer, and (for op results) the parent handles plus
// a backprop closure. Graphs are DAGs built implicitly by the ops; calling
// backward() on a scalar runs the closures in reverse topological order,
// accumulating gradients additively into every requires_grad ancestor.
//
// Layout convention for image tensors is [batch, channels, height, width].
// The engine is instantiated for float (training) and double (gradient
// checks; central differences are meaningless in 32-bit).
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "latis/common.hpp"

namespace latis {

inline void check_shape(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

inline std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

namespace detail {

template <typename T>
struct Node {
  std::vector<int> shape;
  std::vector<T> values;
  std::vector<T> grad;  // empty until the first contribution arrives
  bool requires_grad = false;
  const char* op = "";  // op label for diagnostics; "" for leaves
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;

  int64_t numel() const {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
  }
  // Gradient buffer, zero-initialized on first use.
  std::vector<T>& grad_buffer() {
    if (grad.empty()) grad.assign(values.size(), T(0));
    return grad;
  }
};

}  // namespace detail

template <typename T>
class Tensor {
 public:
  using Node = detail::Node<T>;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
    return filled(std::move(shape), T(0), requires_grad);
  }
  static Tensor filled(std::vector<int> shape, T value,
                       bool requires_grad = false) {
    auto n = std::make_shared<Node>();
    validate_shape(shape);
    n->shape = std::move(shape);
    n->values.assign(n->numel(), value);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }
  static Tensor from(std::vector<int> shape, std::vector<T> values,
                     bool requires_grad = false) {
    auto n = std::make_shared<Node>();
    validate_shape(shape);
    n->shape = std::move(shape);
    check_shape(static_cast<int64_t>(values.size()) == n->numel(),
                "tensor data length does not match shape " +
                    shape_str(n->shape));
    n->values = std::move(values);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }
  static Tensor scalar(T value) { return from({1}, {value}); }

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  int dim(int i) const { return node_->shape[i]; }
  int64_t numel() const { return node_->numel(); }

  const std::vector<T>& values() const { return node_->values; }
  // Direct mutation is for leaves (parameter updates, test setup); mutating
  // an op result would desynchronize it from its tape.
  std::vector<T>& mutable_values() { return node_->values; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool has_grad() const { return !node_->grad.empty(); }
  const std::vector<T>& grad() const { return node_->grad; }
  std::vector<T>& grad_buffer() { return node_->grad_buffer(); }
  void zero_grad() { node_->grad.clear(); }

  T item() const {
    check_shape(numel() == 1, "item() on non-scalar tensor");
    return node_->values[0];
  }

  // Flat offset of a multi-index, for tests and oracles.
  int64_t index(std::initializer_list<int> idx) const {
    check_shape(static_cast<int>(idx.size()) == rank(),
                "index rank mismatch");
    int64_t off = 0;
    int i = 0;
    for (int v : idx) off = off * node_->shape[i++] + v;
    return off;
  }

  // Gradients are the true total derivative of this scalar; repeated calls
  // without zero_grad() accumulate.
  void backward() const {
    if (numel() != 1) throw UsageError("backward() requires a scalar tensor");
    if (!node_->requires_grad) return;
    std::vector<Node*> order = topo_order();
    node_->grad_buffer()[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node* n = *it;
      if (n->backprop && !n->grad.empty()) n->backprop(*n);
    }
  }

  std::shared_ptr<Node> node() const { return node_; }

 private:
  static void validate_shape(const std::vector<int>& shape) {
    check_shape(!shape.empty(), "empty shape");
    for (int d : shape)
      check_shape(d > 0, "non-positive dimension in shape " + shape_str(shape));
  }

  // Iterative post-order DFS over parents; every node exactly once.
  std::vector<Node*> topo_order() const {
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, size_t>> stack{{node_.get(), 0}};
    seen.insert(node_.get());
    while (!stack.empty()) {
      auto& [n, next] = stack.back();
      if (next < n->parents.size()) {
        Node* p = n->parents[next++].get();
        if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
      } else {
        order.push_back(n);
        stack.pop_back();
      }
    }
    return order;
  }

  std::shared_ptr<Node> node_;
};

namespace detail {

template <typename T>
void check_finite_values(const Node<T>& n) {
  for (T v : n.values) {
    if (!std::isfinite(v))
      throw DivergenceError(std::string("non-finite value produced by op '") +
                            n.op + "'");
  }
}

// Assembles an op result node. Parents and the backprop closure are dropped
// when no input carries a gradient, detaching constant subgraphs.
template <typename T>
Tensor<T> make_op(const char* op, std::vector<int> shape,
                  std::vector<T> values,
                  std::vector<Tensor<T>> parents,
                  std::function<void(Node<T>&)> backprop) {
  auto n = std::make_shared<Node<T>>();
  n->shape = std::move(shape);
  n->values = std::move(values);
  n->op = op;
  bool needs_grad = false;
  for (const auto& p : parents) needs_grad |= p.requires_grad();
  n->requires_grad = needs_grad;
  if (needs_grad) {
    n->parents.reserve(parents.size());
    for (auto& p : parents) n->parents.push_back(p.node());
    n->backprop = std::move(backprop);
  }
  if (finite_checks_enabled()) check_finite_values(*n);
  return Tensor<T>(std::move(n));
}

}  // namespace detail

}  // namespace latis
