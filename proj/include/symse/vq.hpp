// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Symbolic book: nearest-prototype quantization with a straight-through
// gradient, EMA prototype re-estimation and usage diagnostics.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "symse/tensor.hpp"

namespace symse::vq {

struct BookConfig {
  std::size_t size = 64;   // M
  std::size_t dim = 64;    // D
  double decay = 0.99;     // gamma
  double commitment = 0.2; // lambda
};

struct SymbolicBook {
  BookConfig config;
  std::vector<double> prototypes;    // M x D
  std::vector<double> ema_counts;    // M
  std::vector<double> ema_sums;      // M x D
  std::vector<std::uint64_t> usage;  // M, reset per epoch

  std::size_t size() const { return config.size; }
  std::size_t dim() const { return config.dim; }
  std::span<const double> row(std::size_t j) const {
    return std::span<const double>(prototypes).subspan(j * config.dim, config.dim);
  }

  void reset_usage();
  void count_usage(std::span<const std::int32_t> indices);
  std::uint64_t frames_counted() const;
};

// Rows drawn from uniform(-1/M, 1/M).
SymbolicBook make_uniform_book(const BookConfig& config, std::uint64_t seed);

// Greedy farthest-point pick of M rows from `vectors` (n x D), starting at a
// seeded random row. Rows beyond the number of distinct vectors fall back to
// uniform init.
SymbolicBook make_book_from_vectors(const BookConfig& config, std::span<const double> vectors,
                                    std::uint64_t seed);

// argmin_j ||x - e_j||^2, lowest index on ties.
std::int32_t nearest(const SymbolicBook& book, std::span<const double> x);

// Fixes indices and replaces the quantized value with h + offset, where
// offset = e_k - h_ref was recorded at a reference point. Used only by finite
// difference checks, where a true quantizer has zero numeric derivative.
struct LinearizeProbe {
  std::vector<std::int32_t> indices;
  std::vector<double> offsets;
};

template <typename Real>
struct Quantized {
  ad::Var<Real> values;               // same shape as h, rows are prototypes
  std::vector<std::int32_t> indices;  // one per row of h
  ad::Var<Real> commitment;           // scalar, sum over D, mean over rows
};

// h has shape [..., D]. The book is read-only here; the caller owns usage
// counting and EMA updates.
template <typename Real>
Quantized<Real> quantize(const ad::Var<Real>& h, const SymbolicBook& book, const LinearizeProbe* probe = nullptr);

// mean over rows of ||h_row - target_row||^2, gradient only to h.
template <typename Real>
ad::Var<Real> commitment_loss(const ad::Var<Real>& h, const ad::Tensor<Real>& targets);

// Builds a probe from a forward pass at the reference point.
template <typename Real>
LinearizeProbe make_probe(std::span<const Real> h_ref, std::span<const std::int32_t> indices, const SymbolicBook& book);

// N_j <- g N_j + (1-g) n_j ; m_j <- g m_j + (1-g) s_j ; e_j <- m_j / N_j.
// Tokens that have never been assigned (N_j == 0 and n_j == 0) are untouched.
template <typename Real>
void ema_update(SymbolicBook& book, std::span<const Real> h, std::span<const std::int32_t> indices);

struct CollapseReport {
  std::vector<double> fractions;       // per token usage / frames
  std::vector<std::size_t> collapsed;  // tokens with fraction < 1e-4
  double perplexity = 0.0;             // exp of usage entropy
  std::uint64_t frames = 0;
};

// frames_seen == 0 means "use the sum of the usage counters".
CollapseReport collapse_report(const SymbolicBook& book, std::uint64_t frames_seen = 0);

}  // namespace symse::vq
