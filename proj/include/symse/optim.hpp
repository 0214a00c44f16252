// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "symse/tensor.hpp"

namespace symse::ad {

// Named learnable tensors in insertion order. Names are unique.
template <typename Real>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor<Real> tensor;
  };

  Tensor<Real>& add(const std::string& name, Tensor<Real> t);
  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  Tensor<Real>& at(const std::string& name);
  const Tensor<Real>& at(const std::string& name) const;
  std::size_t index_of(const std::string& name) const;

  std::size_t size() const { return entries_.size(); }
  std::size_t total_values() const;
  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }

  // One leaf Var per entry, in entry order.
  std::vector<Var<Real>> bind(Tape<Real>& tape) const;
  std::vector<Tensor<Real>> gradients(const Tape<Real>& tape, const std::vector<Var<Real>>& bound) const;

  template <typename Other>
  ParamStore<Other> cast() const {
    ParamStore<Other> out;
    for (const auto& e : entries_) {
      Tensor<Other> t(e.tensor.shape);
      for (std::size_t i = 0; i < t.size(); ++i) t.values[i] = static_cast<Other>(e.tensor.values[i]);
      out.add(e.name, std::move(t));
    }
    return out;
  }

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double epsilon = 1e-8;
};

struct AdamState {
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };

  AdamConfig config;
  std::uint64_t step = 0;
  std::map<std::string, Moments> moments;  // keyed by parameter name
};

// Bias-corrected Adam update of every parameter; grads align with
// params.entries() by position and shape.
template <typename Real>
void adam_step(ParamStore<Real>& params, const std::vector<Tensor<Real>>& grads, AdamState& state);

}  // namespace symse::ad
