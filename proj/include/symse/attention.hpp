// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Multi-head attention from decoder states (queries) onto the symbolic
// sequence (keys and values), with additive sinusoidal position codes.

#pragma once

#include <vector>

#include "symse/tensor.hpp"

namespace symse::attn {

struct MhaConfig {
  std::size_t heads = 4;
  std::size_t key_dim = 256;    // query/key projection, split across heads
  std::size_t value_dim = 512;  // value projection, split across heads
  bool positional = true;
};

// pe[t, 2i] = sin(t / 10000^(2i/dim)), pe[t, 2i+1] = cos(...). dim must be even.
std::vector<double> positional_encoding(std::size_t length, std::size_t dim);

// Projection weights. wq [Cq,key_dim], wk [Ck,key_dim], wv [Ck,value_dim].
template <typename Real>
struct MhaWeights {
  ad::Var<Real> wq, bq, wk, bk, wv, bv;
};

// softmax(Q K^T / sqrt(dk)) V for Q [B,Tq,dk], K [B,Tk,dk], V [B,Tk,dv].
// `weights`, when given, receives the attention matrix [B,Tq,Tk].
template <typename Real>
ad::Var<Real> scaled_dot_attention(const ad::Var<Real>& q, const ad::Var<Real>& k, const ad::Var<Real>& v,
                                   ad::Var<Real>* weights = nullptr);

// queries [B,Tq,Cq], keys [B,Tk,Ck] -> [B,Tq,value_dim]. Heads are
// concatenated with no output projection. `weights`, when given, receives the
// per-head attention matrices.
template <typename Real>
ad::Var<Real> mha(const ad::Var<Real>& queries, const ad::Var<Real>& keys, const MhaWeights<Real>& w,
                  const MhaConfig& config, std::vector<ad::Var<Real>>* weights = nullptr);

}  // namespace symse::attn
