// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "symse/tensor.hpp"

namespace symse::ad {

struct GradCheckOptions {
  double step = 1e-5;
  // Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor).
  double floor = 1e-3;
  // 0 checks every entry; otherwise a seeded random subset of this many per input.
  std::size_t max_entries_per_input = 0;
  std::uint64_t seed = 1234;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_input;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t entries_checked = 0;
};

// Builds the graph under test from leaf vars (one per input). A non-scalar
// output is reduced with a fixed random projection before differentiating.
using GraphBuilder = std::function<Var<double>(Tape<double>&, std::span<const Var<double>>)>;

GradCheckReport grad_check(const GraphBuilder& build, const std::vector<Tensor<double>>& inputs,
                           const std::vector<std::string>& names = {}, const GradCheckOptions& options = {});

}  // namespace symse::ad
