// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Reverse-mode differentiation tape.
//
// A Tape owns every intermediate array of one forward pass. Operations append
// nodes in execution order, so the node list is already topologically sorted
// and Tape::backward only has to walk it once from the loss back to the first
// node. Vars are cheap handles (tape pointer + node id) and stay valid for the
// lifetime of the tape.

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "symse/errors.hpp"

namespace symse::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

template <typename Real>
struct Tensor {
  Shape shape;
  std::vector<Real> values;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(std::move(s)), values(numel(shape), Real(0)) {}
  Tensor(Shape s, std::vector<Real> v) : shape(std::move(s)), values(std::move(v)) {
    SYMSE_REQUIRE(values.size() == numel(shape),
                  "tensor: " + std::to_string(values.size()) + " values for shape " +
                      to_string(shape));
  }

  static Tensor scalar(Real v) { return Tensor(Shape{1}, {v}); }

  std::size_t size() const { return values.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }
  Real& operator[](std::size_t i) { return values[i]; }
  Real operator[](std::size_t i) const { return values[i]; }
};

template <typename Real>
class Tape;

template <typename Real>
class Var {
 public:
  Var() = default;
  Var(Tape<Real>* tape, std::size_t id) : tape_(tape), id_(id) {}

  bool valid() const { return tape_ != nullptr; }
  std::size_t id() const { return id_; }
  Tape<Real>* tape() const { return tape_; }

  const Shape& shape() const { return tape_->shape(id_); }
  std::size_t size() const { return tape_->value(id_).size(); }
  std::span<const Real> value() const { return tape_->value(id_); }
  Real item() const {
    SYMSE_REQUIRE(size() == 1, "item() on non-scalar of shape " + to_string(shape()));
    return value()[0];
  }
  Tensor<Real> tensor() const {
    auto v = value();
    return Tensor<Real>(shape(), std::vector<Real>(v.begin(), v.end()));
  }

 private:
  Tape<Real>* tape_ = nullptr;
  std::size_t id_ = 0;
};

template <typename Real>
class Tape {
 public:
  // Receives the tape and the id of the node whose output gradient is ready;
  // must accumulate into the gradient sinks of the node's inputs.
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<Real> constant(Tensor<Real> t) { return push(std::move(t), false, {}); }
  Var<Real> parameter(Tensor<Real> t) { return push(std::move(t), true, {}); }

  // Appends the result of an operation. The backward rule is kept only when
  // at least one input participates in differentiation.
  Var<Real> record(Shape shape, std::vector<Real> values,
                   std::initializer_list<Var<Real>> inputs, BackwardFn fn) {
    return record(std::move(shape), std::move(values), std::span<const Var<Real>>(inputs.begin(), inputs.size()),
                  std::move(fn));
  }

  Var<Real> record(Shape shape, std::vector<Real> values, std::span<const Var<Real>> inputs,
                   BackwardFn fn) {
    bool needs = false;
    for (const auto& in : inputs) {
      SYMSE_REQUIRE(in.tape() == this, "tape: input belongs to a different tape");
      needs = needs || nodes_[in.id()].requires_grad;
    }
    return push(Tensor<Real>(std::move(shape), std::move(values)), needs,
                needs ? std::move(fn) : BackwardFn{});
  }

  void backward(const Var<Real>& loss) {
    SYMSE_REQUIRE(loss.tape() == this, "backward: loss belongs to a different tape");
    SYMSE_REQUIRE(nodes_[loss.id()].value.size() == 1,
                  "backward: loss must be scalar, got shape " + to_string(nodes_[loss.id()].shape));
    SYMSE_REQUIRE(!backward_done_, "backward: tape already consumed");
    backward_done_ = true;
    if (!nodes_[loss.id()].requires_grad) return;
    nodes_[loss.id()].grad.assign(1, Real(1));
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad.empty() || !n.backward) continue;
      n.backward(*this, i);
    }
  }

  // Gradient of the last backward() loss w.r.t. v; zeros when v is not on
  // any path to the loss.
  Tensor<Real> grad(const Var<Real>& v) const {
    const Node& n = nodes_.at(v.id());
    if (n.grad.empty()) return Tensor<Real>(n.shape);
    return Tensor<Real>(n.shape, n.grad);
  }

  bool requires_grad(const Var<Real>& v) const { return nodes_.at(v.id()).requires_grad; }

  // Accessors for backward rules.
  const Shape& shape(std::size_t id) const { return nodes_[id].shape; }
  std::span<const Real> value(std::size_t id) const { return nodes_[id].value; }
  std::span<const Real> upstream(std::size_t id) const { return nodes_[id].grad; }

  // Gradient accumulator of node id, allocated on first use; nullptr when the
  // node does not take part in differentiation.
  Real* sink(std::size_t id) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return nullptr;
    if (n.grad.empty()) n.grad.assign(n.value.size(), Real(0));
    return n.grad.data();
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Shape shape;
    std::vector<Real> value;
    std::vector<Real> grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Var<Real> push(Tensor<Real> t, bool requires_grad, BackwardFn fn) {
    nodes_.push_back(Node{std::move(t.shape), std::move(t.values), {}, requires_grad, std::move(fn)});
    return Var<Real>(this, nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace symse::ad
