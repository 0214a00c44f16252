// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Differentiable primitives. Sequence tensors use the [batch, channels, time]
// layout for convolutions and [batch, time, features] for everything that
// works along the last axis (affine, softmax, attention).

#pragma once

#include <cstdint>
#include <random>
#include <span>

#include "symse/tensor.hpp"

namespace symse::ad {

enum class ActivationKind { kRelu, kLeakyRelu };

struct Activation {
  ActivationKind kind = ActivationKind::kRelu;
  double slope = 0.0;  // leaky-relu only, must lie in (0, 1)

  static Activation relu() { return {ActivationKind::kRelu, 0.0}; }
  static Activation leaky(double slope) { return {ActivationKind::kLeakyRelu, slope}; }
};

// input [B,Cin,T], kernel [Cout,Cin,W], bias [Cout] -> [B,Cout,ceil(T/stride)].
// "Same" padding: floor((W-1)/2) zeros on the left, the rest on the right.
template <typename Real>
Var<Real> conv1d(const Var<Real>& input, const Var<Real>& kernel, const Var<Real>& bias,
                 std::size_t stride);

// input [B,Cin,T], kernel [Cin,Cout,W], bias [Cout] -> [B,Cout,T*stride].
// Exact adjoint of conv1d (same kernel memory, same padding), plus bias.
template <typename Real>
Var<Real> deconv1d(const Var<Real>& input, const Var<Real>& kernel, const Var<Real>& bias,
                   std::size_t stride);

// input [...,Din] . weight [Din,Dout] + bias [Dout].
template <typename Real>
Var<Real> affine(const Var<Real>& input, const Var<Real>& weight, const Var<Real>& bias);

template <typename Real>
Var<Real> activation(const Var<Real>& input, Activation kind);

template <typename Real>
Var<Real> relu(const Var<Real>& input) {
  return activation(input, Activation::relu());
}

template <typename Real>
Var<Real> leaky_relu(const Var<Real>& input, double slope) {
  return activation(input, Activation::leaky(slope));
}

// Softmax over the last axis, max-subtracted.
template <typename Real>
Var<Real> softmax(const Var<Real>& input);

// Inverted dropout; identity when !training or rate == 0.
template <typename Real>
Var<Real> dropout(const Var<Real>& input, double rate, bool training, std::mt19937_64& rng);

template <typename Real>
Var<Real> stop_gradient(const Var<Real>& input);

// Forward value is `target` exactly; the gradient flows to `input` unchanged.
// This is h + sg(target - h) without the rounding of the add/subtract pair.
template <typename Real>
Var<Real> straight_through(const Var<Real>& input, const Tensor<Real>& target);

template <typename Real>
Var<Real> add(const Var<Real>& a, const Var<Real>& b);
template <typename Real>
Var<Real> sub(const Var<Real>& a, const Var<Real>& b);
template <typename Real>
Var<Real> mul(const Var<Real>& a, const Var<Real>& b);
template <typename Real>
Var<Real> scale(const Var<Real>& a, double factor);

// a + b where b's shape equals the trailing dimensions of a's shape.
template <typename Real>
Var<Real> add_broadcast(const Var<Real>& a, const Var<Real>& b);

template <typename Real>
Var<Real> sum(const Var<Real>& a);
template <typename Real>
Var<Real> mean(const Var<Real>& a);
// mean((a - b)^2) over all elements.
template <typename Real>
Var<Real> mse(const Var<Real>& a, const Var<Real>& b);

template <typename Real>
Var<Real> reshape(const Var<Real>& a, Shape shape);

// [B,X,Y] -> [B,Y,X]
template <typename Real>
Var<Real> transpose12(const Var<Real>& a);

// Concatenation / slicing along `axis` of tensors with equal rank.
template <typename Real>
Var<Real> concat(std::span<const Var<Real>> parts, std::size_t axis);
template <typename Real>
Var<Real> concat(const std::vector<Var<Real>>& parts, std::size_t axis) {
  return concat(std::span<const Var<Real>>(parts), axis);
}
template <typename Real>
Var<Real> slice(const Var<Real>& a, std::size_t axis, std::size_t start, std::size_t length);

// Batched products: a [B,M,K], b [B,N,K] -> a.b^T [B,M,N]; a [B,M,N], b [B,N,P] -> [B,M,P].
template <typename Real>
Var<Real> bmm_nt(const Var<Real>& a, const Var<Real>& b);
template <typename Real>
Var<Real> bmm(const Var<Real>& a, const Var<Real>& b);

// Row lookup: table [R,D], indices of any shape S -> [S...,D].
template <typename Real>
Var<Real> embedding(const Var<Real>& table, std::span<const std::int32_t> indices, Shape index_shape);

}  // namespace symse::ad
