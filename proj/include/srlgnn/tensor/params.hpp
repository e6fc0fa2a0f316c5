#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "srlgnn/tensor/tape.hpp"

namespace srlgnn {

/// Named, ordered collection of trainable tensors. Order is insertion
/// order and defines the checkpoint layout.
template <typename T>
class ParamStore {
 public:
  std::size_t add(std::string name, Tensor<T> value) {
    if (index_.count(name)) throw ConfigError("duplicate parameter name " + name);
    index_.emplace(name, names_.size());
    names_.push_back(std::move(name));
    values_.push_back(std::move(value));
    return values_.size() - 1;
  }

  std::size_t index(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter " + name);
    return it->second;
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t size() const noexcept { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  const std::vector<std::string>& names() const noexcept { return names_; }

  Tensor<T>& value(std::size_t i) { return values_[i]; }
  const Tensor<T>& value(std::size_t i) const { return values_[i]; }
  Tensor<T>& value(const std::string& name) { return values_[index(name)]; }
  const Tensor<T>& value(const std::string& name) const { return values_[index(name)]; }

  std::vector<Tensor<T>>& tensors() noexcept { return values_; }
  const std::vector<Tensor<T>>& tensors() const noexcept { return values_; }

  std::size_t element_count() const {
    std::size_t n = 0;
    for (const auto& v : values_) n += v.size();
    return n;
  }

  std::vector<Tensor<T>> zeros_like() const {
    std::vector<Tensor<T>> out;
    out.reserve(values_.size());
    for (const auto& v : values_) out.emplace_back(v.shape());
    return out;
  }

  friend bool operator==(const ParamStore& a, const ParamStore& b) {
    return a.names_ == b.names_ && a.values_ == b.values_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor<T>> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// A parameter store attached to one tape. Parameters are registered as
/// tracked variables lazily, on first use, so a forward pass that never
/// touches a parameter leaves its gradient at zero.
template <typename T>
class BoundParams {
 public:
  BoundParams(Tape<T>& tape, const ParamStore<T>& store, bool track = true)
      : tape_(&tape), store_(&store), vars_(store.size()), track_(track) {}

  Var<T> operator[](std::size_t i) {
    if (!vars_[i]) {
      vars_[i] = track_ ? tape_->variable(store_->value(i)) : tape_->constant(store_->value(i));
    }
    return *vars_[i];
  }

  Tape<T>& tape() { return *tape_; }

  /// Adds this tape's gradients into `grads` (same layout as the store).
  void accumulate_grads(std::vector<Tensor<T>>& grads) const {
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      if (!vars_[i] || !tape_->has_grad(vars_[i]->id)) continue;
      const Tensor<T> g = tape_->grad(*vars_[i]);
      auto& acc = grads[i];
      for (std::size_t k = 0; k < g.size(); ++k) acc[k] += g[k];
    }
  }

 private:
  Tape<T>* tape_;
  const ParamStore<T>* store_;
  std::vector<std::optional<Var<T>>> vars_;
  bool track_;
};

}  // namespace srlgnn
