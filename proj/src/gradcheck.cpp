// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "symse/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "symse/ops.hpp"

namespace symse::ad {

namespace {

class ScalarProbe {
 public:
  ScalarProbe(const GraphBuilder& build, std::uint64_t seed) : build_(build), seed_(seed) {}

  // Runs the graph; when `grads` is given, also backpropagates into it.
  double run(const std::vector<Tensor<double>>& inputs, std::vector<Tensor<double>>* grads) {
    Tape<double> tape;
    std::vector<Var<double>> leaves;
    for (const auto& t : inputs) leaves.push_back(tape.parameter(t));
    Var<double> out = build_(tape, leaves);
    if (out.size() != 1) {
      if (projection_.shape != out.shape()) {
        std::mt19937_64 rng(seed_);
        std::uniform_real_distribution<double> uni(-1.0, 1.0);
        projection_ = Tensor<double>(out.shape());
        for (auto& v : projection_.values) v = uni(rng);
      }
      out = sum(mul(out, tape.constant(projection_)));
    }
    const double value = out.item();
    if (grads) {
      tape.backward(out);
      grads->clear();
      for (const auto& l : leaves) grads->push_back(tape.grad(l));
    }
    return value;
  }

 private:
  const GraphBuilder& build_;
  std::uint64_t seed_;
  Tensor<double> projection_;
};

}  // namespace

GradCheckReport grad_check(const GraphBuilder& build, const std::vector<Tensor<double>>& inputs,
                           const std::vector<std::string>& names, const GradCheckOptions& options) {
  ScalarProbe probe(build, options.seed);
  std::vector<Tensor<double>> analytic;
  probe.run(inputs, &analytic);

  GradCheckReport report;
  std::vector<Tensor<double>> work = inputs;
  std::mt19937_64 rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
  for (std::size_t i = 0; i < work.size(); ++i) {
    std::vector<std::size_t> entries(work[i].size());
    std::iota(entries.begin(), entries.end(), 0);
    if (options.max_entries_per_input > 0 && entries.size() > options.max_entries_per_input) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(options.max_entries_per_input);
      std::sort(entries.begin(), entries.end());
    }
    for (std::size_t j : entries) {
      const double orig = work[i].values[j];
      work[i].values[j] = orig + options.step;
      const double up = probe.run(work, nullptr);
      work[i].values[j] = orig - options.step;
      const double down = probe.run(work, nullptr);
      work[i].values[j] = orig;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[i].values[j];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.entries_checked;
      if (rel > report.max_rel_error || report.entries_checked == 1) {
        report.max_rel_error = std::max(report.max_rel_error, rel);
        if (rel >= report.max_rel_error) {
          report.worst_input = i < names.size() ? names[i] : "input" + std::to_string(i);
          report.worst_index = j;
          report.worst_analytic = a;
          report.worst_numeric = numeric;
        }
      }
    }
  }
  return report;
}

}  // namespace symse::ad
