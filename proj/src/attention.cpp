// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "symse/attention.hpp"

#include <cmath>

#include "symse/errors.hpp"
#include "symse/ops.hpp"

namespace symse::attn {

std::vector<double> positional_encoding(std::size_t length, std::size_t dim) {
  SYMSE_REQUIRE(dim % 2 == 0 && dim > 0, "positional_encoding: dim must be even and positive, got " + std::to_string(dim));
  std::vector<double> pe(length * dim);
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t i = 0; i < dim / 2; ++i) {
      const double angle =
          static_cast<double>(t) / std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(dim));
      pe[t * dim + 2 * i] = std::sin(angle);
      pe[t * dim + 2 * i + 1] = std::cos(angle);
    }
  }
  return pe;
}

namespace {

template <typename Real>
ad::Var<Real> with_positions(const ad::Var<Real>& x) {
  const auto& s = x.shape();
  auto pe = positional_encoding(s[1], s[2]);
  ad::Tensor<Real> table(ad::Shape{s[1], s[2]});
  for (std::size_t i = 0; i < pe.size(); ++i) table.values[i] = static_cast<Real>(pe[i]);
  return ad::add_broadcast(x, x.tape()->constant(std::move(table)));
}

}  // namespace

template <typename Real>
ad::Var<Real> scaled_dot_attention(const ad::Var<Real>& q, const ad::Var<Real>& k, const ad::Var<Real>& v,
                                   ad::Var<Real>* weights) {
  SYMSE_REQUIRE(q.shape().size() == 3 && k.shape().size() == 3 && v.shape().size() == 3,
                "attention: expected rank-3 Q, K, V");
  SYMSE_REQUIRE(q.shape()[2] == k.shape()[2], "attention: Q and K feature dims differ");
  SYMSE_REQUIRE(k.shape()[1] == v.shape()[1], "attention: K and V lengths differ");
  const double inv = 1.0 / std::sqrt(static_cast<double>(q.shape()[2]));
  auto a = ad::softmax(ad::scale(ad::bmm_nt(q, k), inv));
  if (weights) *weights = a;
  return ad::bmm(a, v);
}

template <typename Real>
ad::Var<Real> mha(const ad::Var<Real>& queries, const ad::Var<Real>& keys, const MhaWeights<Real>& w,
                  const MhaConfig& config, std::vector<ad::Var<Real>>* weights) {
  SYMSE_REQUIRE(config.heads >= 1 && config.key_dim % config.heads == 0 && config.value_dim % config.heads == 0,
                "mha: projection sizes must divide evenly across heads");
  SYMSE_REQUIRE(queries.shape().size() == 3 && keys.shape().size() == 3, "mha: expected [B,T,C] inputs");
  SYMSE_REQUIRE(queries.shape()[0] == keys.shape()[0], "mha: batch sizes differ");
  SYMSE_REQUIRE(w.wq.shape() == (ad::Shape{queries.shape()[2], config.key_dim}),
                "mha: query projection " + ad::to_string(w.wq.shape()) + " does not fit input " +
                    ad::to_string(queries.shape()));
  SYMSE_REQUIRE(w.wk.shape() == (ad::Shape{keys.shape()[2], config.key_dim}),
                "mha: key projection " + ad::to_string(w.wk.shape()) + " does not fit input " +
                    ad::to_string(keys.shape()));
  SYMSE_REQUIRE(w.wv.shape() == (ad::Shape{keys.shape()[2], config.value_dim}),
                "mha: value projection " + ad::to_string(w.wv.shape()) + " does not fit input " +
                    ad::to_string(keys.shape()));

  auto qin = config.positional ? with_positions(queries) : queries;
  auto kin = config.positional ? with_positions(keys) : keys;
  auto q = ad::affine(qin, w.wq, w.bq);
  auto k = ad::affine(kin, w.wk, w.bk);
  auto v = ad::affine(kin, w.wv, w.bv);
  if (config.heads == 1) {
    ad::Var<Real> a;
    auto out = scaled_dot_attention(q, k, v, &a);
    if (weights) weights->assign(1, a);
    return out;
  }
  const std::size_t dk = config.key_dim / config.heads, dv = config.value_dim / config.heads;
  std::vector<ad::Var<Real>> parts;
  if (weights) weights->clear();
  for (std::size_t h = 0; h < config.heads; ++h) {
    ad::Var<Real> a;
    parts.push_back(scaled_dot_attention(ad::slice(q, 2, h * dk, dk), ad::slice(k, 2, h * dk, dk),
                                         ad::slice(v, 2, h * dv, dv), &a));
    if (weights) weights->push_back(a);
  }
  return ad::concat(parts, 2);
}

#define SYMSE_INSTANTIATE_ATTN(Real)                                                                       \
  template ad::Var<Real> scaled_dot_attention(const ad::Var<Real>&, const ad::Var<Real>&, const ad::Var<Real>&, \
                                              ad::Var<Real>*);                                              \
  template ad::Var<Real> mha(const ad::Var<Real>&, const ad::Var<Real>&, const MhaWeights<Real>&,           \
                             const MhaConfig&, std::vector<ad::Var<Real>>*);

SYMSE_INSTANTIATE_ATTN(float)
SYMSE_INSTANTIATE_ATTN(double)

}  // namespace symse::attn
