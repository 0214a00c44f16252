// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Per-phoneme token histograms, Jensen-Shannon divergences and SVG/CSV output.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace symse::interp {

struct PhonemeHistogram {
  std::int32_t class_id = 0;
  std::string name;
  std::vector<std::uint64_t> counts;  // M bins
  std::vector<double> pdf;            // counts / total
  std::uint64_t total = 0;
};

// tokens[u][t] and classes[u][t] are aligned frame sequences per utterance.
// One histogram per class that occurs, ordered by class id.
std::vector<PhonemeHistogram> token_histograms(const std::vector<std::vector<std::int32_t>>& tokens,
                                               const std::vector<std::vector<std::int32_t>>& classes,
                                               std::size_t book_size, const std::vector<std::string>& class_names,
                                               const std::vector<std::string>& utterance_ids = {});

// Base-2 JSD with 0 log 0 = 0; lies in [0, 1].
double js_divergence(std::span<const double> p, std::span<const double> q);

struct JsMatrix {
  std::vector<std::string> names;
  std::vector<double> values;  // n x n
  std::size_t size() const { return names.size(); }
  double at(std::size_t i, std::size_t j) const { return values[i * names.size() + j]; }
};

JsMatrix js_matrix(const std::vector<PhonemeHistogram>& histograms);

// hist_<name>.csv, hist_<name>.svg, jsd_matrix.csv and jsd_heatmap.svg.
void emit_plots(const std::vector<PhonemeHistogram>& histograms, const JsMatrix& matrix,
                const std::filesystem::path& out_dir);

// File-name safe form of a class name.
std::string file_stem(const std::string& name);

}  // namespace symse::interp
