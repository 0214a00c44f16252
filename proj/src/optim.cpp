// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "symse/optim.hpp"

#include <cmath>

namespace symse::ad {

template <typename Real>
Tensor<Real>& ParamStore<Real>::add(const std::string& name, Tensor<Real> t) {
  SYMSE_REQUIRE(!contains(name), "parameter '" + name + "' registered twice");
  index_[name] = entries_.size();
  entries_.push_back({name, std::move(t)});
  return entries_.back().tensor;
}

template <typename Real>
std::size_t ParamStore<Real>::index_of(const std::string& name) const {
  auto it = index_.find(name);
  SYMSE_REQUIRE(it != index_.end(), "unknown parameter '" + name + "'");
  return it->second;
}

template <typename Real>
Tensor<Real>& ParamStore<Real>::at(const std::string& name) {
  return entries_[index_of(name)].tensor;
}

template <typename Real>
const Tensor<Real>& ParamStore<Real>::at(const std::string& name) const {
  return entries_[index_of(name)].tensor;
}

template <typename Real>
std::size_t ParamStore<Real>::total_values() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.size();
  return n;
}

template <typename Real>
std::vector<Var<Real>> ParamStore<Real>::bind(Tape<Real>& tape) const {
  std::vector<Var<Real>> vars;
  vars.reserve(entries_.size());
  for (const auto& e : entries_) vars.push_back(tape.parameter(e.tensor));
  return vars;
}

template <typename Real>
std::vector<Tensor<Real>> ParamStore<Real>::gradients(const Tape<Real>& tape,
                                                      const std::vector<Var<Real>>& bound) const {
  SYMSE_REQUIRE(bound.size() == entries_.size(), "gradients: bound vars do not match parameters");
  std::vector<Tensor<Real>> grads;
  grads.reserve(bound.size());
  for (const auto& v : bound) grads.push_back(tape.grad(v));
  return grads;
}

template <typename Real>
void adam_step(ParamStore<Real>& params, const std::vector<Tensor<Real>>& grads, AdamState& state) {
  SYMSE_REQUIRE(grads.size() == params.size(), "adam: " + std::to_string(grads.size()) +
                                                   " gradients for " + std::to_string(params.size()) +
                                                   " parameters");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const auto& e = params.entries()[i];
    SYMSE_REQUIRE(grads[i].shape == e.tensor.shape, "adam: gradient shape " + to_string(grads[i].shape) +
                                                        " != parameter '" + e.name + "' shape " +
                                                        to_string(e.tensor.shape));
  }
  const AdamConfig& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    auto& e = params.entries()[i];
    auto& mom = state.moments[e.name];
    const std::size_t n = e.tensor.size();
    if (mom.m.size() != n) {
      SYMSE_REQUIRE(mom.m.empty(), "adam: stored moments for '" + e.name + "' have the wrong size");
      mom.m.assign(n, 0.0);
      mom.v.assign(n, 0.0);
    }
    for (std::size_t j = 0; j < n; ++j) {
      const double g = grads[i].values[j];
      mom.m[j] = c.beta1 * mom.m[j] + (1.0 - c.beta1) * g;
      mom.v[j] = c.beta2 * mom.v[j] + (1.0 - c.beta2) * g * g;
      const double mhat = mom.m[j] / bc1;
      const double vhat = mom.v[j] / bc2;
      e.tensor.values[j] = static_cast<Real>(e.tensor.values[j] - c.lr * mhat / (std::sqrt(vhat) + c.epsilon));
    }
  }
}

template class ParamStore<float>;
template class ParamStore<double>;
template void adam_step(ParamStore<float>&, const std::vector<Tensor<float>>&, AdamState&);
template void adam_step(ParamStore<double>&, const std::vector<Tensor<double>>&, AdamState&);

}  // namespace symse::ad
