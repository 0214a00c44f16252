// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "symse/vq.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "symse/errors.hpp"
#include "symse/ops.hpp"

namespace symse::vq {

namespace {

void check_config(const BookConfig& c) {
  SYMSE_REQUIRE(c.size >= 1, "vq: book size must be positive");
  SYMSE_REQUIRE(c.dim >= 1, "vq: code dimension must be positive");
  SYMSE_REQUIRE(c.decay >= 0.0 && c.decay < 1.0, "vq: decay must lie in [0, 1)");
  SYMSE_REQUIRE(c.commitment >= 0.0, "vq: commitment weight must be non-negative");
}

SymbolicBook empty_book(const BookConfig& config) {
  check_config(config);
  SymbolicBook b;
  b.config = config;
  b.prototypes.assign(config.size * config.dim, 0.0);
  b.ema_counts.assign(config.size, 0.0);
  b.ema_sums.assign(config.size * config.dim, 0.0);
  b.usage.assign(config.size, 0);
  return b;
}

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    d += t * t;
  }
  return d;
}

}  // namespace

void SymbolicBook::reset_usage() { std::fill(usage.begin(), usage.end(), 0); }

void SymbolicBook::count_usage(std::span<const std::int32_t> indices) {
  for (auto k : indices) {
    SYMSE_REQUIRE(k >= 0 && static_cast<std::size_t>(k) < config.size, "vq: token index out of range");
    ++usage[static_cast<std::size_t>(k)];
  }
}

std::uint64_t SymbolicBook::frames_counted() const {
  return std::accumulate(usage.begin(), usage.end(), std::uint64_t{0});
}

SymbolicBook make_uniform_book(const BookConfig& config, std::uint64_t seed) {
  auto b = empty_book(config);
  std::mt19937_64 rng(seed);
  const double r = 1.0 / static_cast<double>(config.size);
  std::uniform_real_distribution<double> u(-r, r);
  for (auto& v : b.prototypes) v = u(rng);
  return b;
}

SymbolicBook make_book_from_vectors(const BookConfig& config, std::span<const double> vectors,
                                    std::uint64_t seed) {
  auto b = make_uniform_book(config, seed);
  const std::size_t d = config.dim;
  SYMSE_REQUIRE(vectors.size() % d == 0, "vq: init vectors are not a multiple of the code dimension");
  const std::size_t n = vectors.size() / d;
  if (n == 0) return b;
  auto vec = [&](std::size_t i) { return vectors.subspan(i * d, d); };

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::size_t pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  for (std::size_t j = 0; j < config.size; ++j) {
    std::copy_n(vec(pick).begin(), d, b.prototypes.begin() + static_cast<std::ptrdiff_t>(j * d));
    double far = -1.0;
    std::size_t next = 0;
    for (std::size_t i = 0; i < n; ++i) {
      best[i] = std::min(best[i], sq_dist(vec(i), b.row(j)));
      if (best[i] > far) {
        far = best[i];
        next = i;
      }
    }
    if (far <= 0.0) break;
    pick = next;
  }
  return b;
}

std::int32_t nearest(const SymbolicBook& book, std::span<const double> x) {
  SYMSE_REQUIRE(x.size() == book.dim(), "vq: vector has dim " + std::to_string(x.size()) +
                                            ", book expects " + std::to_string(book.dim()));
  std::int32_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < book.size(); ++j) {
    const double dj = sq_dist(x, book.row(j));
    if (dj < best_d) {
      best_d = dj;
      best = static_cast<std::int32_t>(j);
    }
  }
  return best;
}

template <typename Real>
ad::Var<Real> commitment_loss(const ad::Var<Real>& h, const ad::Tensor<Real>& targets) {
  SYMSE_REQUIRE(h.shape() == targets.shape, "commitment_loss: shape mismatch " + ad::to_string(h.shape()) +
                                                 " vs " + ad::to_string(targets.shape));
  const double d = static_cast<double>(h.shape().back());
  auto target = h.tape()->constant(targets);
  return ad::scale(ad::mse(h, target), d);
}

template <typename Real>
Quantized<Real> quantize(const ad::Var<Real>& h, const SymbolicBook& book, const LinearizeProbe* probe) {
  const auto& shape = h.shape();
  SYMSE_REQUIRE(!shape.empty() && shape.back() == book.dim(),
                "quantize: input " + ad::to_string(shape) + " does not end in book dim " + std::to_string(book.dim()));
  const std::size_t d = book.dim();
  const std::size_t rows = h.size() / d;
  auto hv = h.value();

  Quantized<Real> out;
  out.indices.resize(rows);
  ad::Tensor<Real> target(shape);
  std::vector<double> x(d);
  if (probe) {
    SYMSE_REQUIRE(probe->indices.size() == rows && probe->offsets.size() == h.size(), "quantize: probe size mismatch");
    out.indices = probe->indices;
  } else {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t i = 0; i < d; ++i) x[i] = static_cast<double>(hv[r * d + i]);
      out.indices[r] = nearest(book, x);
    }
  }
  for (std::size_t r = 0; r < rows; ++r) {
    auto e = book.row(static_cast<std::size_t>(out.indices[r]));
    for (std::size_t i = 0; i < d; ++i) target.values[r * d + i] = static_cast<Real>(e[i]);
  }

  if (probe) {
    ad::Tensor<Real> off(shape);
    for (std::size_t i = 0; i < off.size(); ++i) off.values[i] = static_cast<Real>(probe->offsets[i]);
    out.values = ad::add(h, h.tape()->constant(std::move(off)));
  } else {
    out.values = ad::straight_through(h, target);
  }
  out.commitment = commitment_loss(h, target);
  return out;
}

template <typename Real>
LinearizeProbe make_probe(std::span<const Real> h_ref, std::span<const std::int32_t> indices, const SymbolicBook& book) {
  const std::size_t d = book.dim();
  SYMSE_REQUIRE(h_ref.size() == indices.size() * d, "make_probe: size mismatch");
  LinearizeProbe p;
  p.indices.assign(indices.begin(), indices.end());
  p.offsets.resize(h_ref.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    auto e = book.row(static_cast<std::size_t>(indices[r]));
    for (std::size_t i = 0; i < d; ++i) p.offsets[r * d + i] = e[i] - static_cast<double>(h_ref[r * d + i]);
  }
  return p;
}

template <typename Real>
void ema_update(SymbolicBook& book, std::span<const Real> h, std::span<const std::int32_t> indices) {
  const std::size_t d = book.dim(), m = book.size();
  SYMSE_REQUIRE(h.size() == indices.size() * d, "ema_update: " + std::to_string(h.size()) + " values for " +
                                                    std::to_string(indices.size()) + " indices of dim " +
                                                    std::to_string(d));
  std::vector<double> n(m, 0.0), s(m * d, 0.0);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto k = static_cast<std::size_t>(indices[r]);
    SYMSE_REQUIRE(k < m, "ema_update: token index out of range");
    n[k] += 1.0;
    for (std::size_t i = 0; i < d; ++i) s[k * d + i] += static_cast<double>(h[r * d + i]);
  }
  const double g = book.config.decay;
  for (std::size_t j = 0; j < m; ++j) {
    if (book.ema_counts[j] == 0.0 && n[j] == 0.0) continue;
    book.ema_counts[j] = g * book.ema_counts[j] + (1.0 - g) * n[j];
    for (std::size_t i = 0; i < d; ++i) {
      double& mj = book.ema_sums[j * d + i];
      mj = g * mj + (1.0 - g) * s[j * d + i];
      book.prototypes[j * d + i] = mj / book.ema_counts[j];
    }
  }
}

CollapseReport collapse_report(const SymbolicBook& book, std::uint64_t frames_seen) {
  CollapseReport r;
  r.frames = frames_seen ? frames_seen : book.frames_counted();
  SYMSE_REQUIRE(r.frames > 0, "collapse_report: no usage accumulated");
  const double total = static_cast<double>(r.frames);
  double entropy = 0.0;
  r.fractions.resize(book.size());
  for (std::size_t j = 0; j < book.size(); ++j) {
    const double p = static_cast<double>(book.usage[j]) / total;
    r.fractions[j] = p;
    if (p < 1e-4) r.collapsed.push_back(j);
    if (p > 0.0) entropy -= p * std::log(p);
  }
  r.perplexity = std::exp(entropy);
  return r;
}

#define SYMSE_INSTANTIATE_VQ(Real)                                                                           \
  template Quantized<Real> quantize(const ad::Var<Real>&, const SymbolicBook&, const LinearizeProbe*);       \
  template ad::Var<Real> commitment_loss(const ad::Var<Real>&, const ad::Tensor<Real>&);                     \
  template LinearizeProbe make_probe(std::span<const Real>, std::span<const std::int32_t>, const SymbolicBook&); \
  template void ema_update(SymbolicBook&, std::span<const Real>, std::span<const std::int32_t>);

SYMSE_INSTANTIATE_VQ(float)
SYMSE_INSTANTIATE_VQ(double)

}  // namespace symse::vq
