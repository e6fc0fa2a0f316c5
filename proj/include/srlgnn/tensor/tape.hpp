#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "srlgnn/tensor/tensor.hpp"

namespace srlgnn {

template <typename T>
class Tape;

/// Handle to a value recorded on a tape. Cheap to copy; only valid while
/// the owning tape is alive.
template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  std::size_t id = 0;

  const Tensor<T>& value() const { return tape->value(id); }
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Reverse-mode recording. Nodes are appended in execution order, so
/// backward() is a single reverse sweep over the node list. Gradient
/// contributions are always accumulated into the input slots.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Tensor<T> value) { return push(std::move(value), false, {}, "constant"); }

  Var<T> variable(Tensor<T> value) { return push(std::move(value), true, {}, "variable"); }

  /// Records the result of an op. `backward` only runs when at least one
  /// input is tracked; it receives the tape and the id of the result node.
  Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> inputs, BackwardFn backward,
                const char* op) {
    bool tracked = false;
    for (const auto& in : inputs) tracked = tracked || nodes_[in.id].requires_grad;
    return record_tracked(std::move(value), tracked, std::move(backward), op);
  }

  Var<T> record_tracked(Tensor<T> value, bool tracked, BackwardFn backward, const char* op) {
    return push(std::move(value), tracked, tracked ? std::move(backward) : BackwardFn{}, op);
  }

  bool requires_grad(Var<T> v) const { return nodes_[v.id].requires_grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  const Tensor<T>& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor<T>& value(Var<T> v) const { return nodes_[v.id].value; }

  /// Gradient of the last backward() root with respect to `v`; zeros when
  /// no gradient reached it.
  Tensor<T> grad(Var<T> v) const {
    const auto& node = nodes_[v.id];
    return node.grad ? *node.grad : Tensor<T>(node.value.shape());
  }

  /// Mutable gradient slot, allocated on first use.
  Tensor<T>& grad_slot(std::size_t id) {
    auto& node = nodes_[id];
    if (!node.grad) node.grad.emplace(node.value.shape());
    return *node.grad;
  }

  bool has_grad(std::size_t id) const { return nodes_[id].grad.has_value(); }

  void backward(Var<T> root) {
    if (root.value().size() != 1) {
      throw ShapeError("backward root must be a scalar, got shape " +
                       shape_string(root.value().shape()));
    }
    for (auto& node : nodes_) node.grad.reset();
    grad_slot(root.id)[0] = T(1);
    for (std::size_t id = root.id + 1; id-- > 0;) {
      auto& node = nodes_[id];
      if (node.backward && node.grad) node.backward(*this, id);
    }
  }

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    std::optional<Tensor<T>> grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Var<T> push(Tensor<T> value, bool tracked, BackwardFn backward, const char* op) {
    if (!value.all_finite()) {
      throw NumericError(std::string("non-finite value produced by ") + op);
    }
    nodes_.push_back(Node{std::move(value), std::nullopt, tracked, std::move(backward)});
    return Var<T>{this, nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
};

}  // namespace srlgnn
