// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "symse/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace symse::ad {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace {

// Output positions o in [0, out_len) for which o*stride - pad + k lands in
// [0, in_len). Returned as a half-open range.
struct TapRange {
  std::size_t begin = 0;
  std::size_t end = 0;
};

TapRange tap_range(std::size_t out_len, std::size_t in_len, std::size_t stride, std::size_t pad,
                   std::size_t k) {
  const auto s = static_cast<std::ptrdiff_t>(stride);
  const auto lo_num = static_cast<std::ptrdiff_t>(pad) - static_cast<std::ptrdiff_t>(k);
  const std::ptrdiff_t o_min = lo_num <= 0 ? 0 : (lo_num + s - 1) / s;
  const std::ptrdiff_t hi_num = static_cast<std::ptrdiff_t>(in_len) - 1 + lo_num;
  if (hi_num < 0) return {};
  const std::ptrdiff_t o_max = std::min<std::ptrdiff_t>(hi_num / s, static_cast<std::ptrdiff_t>(out_len) - 1);
  if (o_max < o_min) return {};
  return {static_cast<std::size_t>(o_min), static_cast<std::size_t>(o_max) + 1};
}

void require_rank(const Shape& s, std::size_t rank, const char* op, const char* what) {
  SYMSE_REQUIRE(s.size() == rank, std::string(op) + ": " + what + " must have rank " +
                                      std::to_string(rank) + ", got " + to_string(s));
}

template <typename Real>
void require_same_shape(const Var<Real>& a, const Var<Real>& b, const char* op) {
  SYMSE_REQUIRE(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + to_string(a.shape()) +
                                            " vs " + to_string(b.shape()));
}

}  // namespace

template <typename Real>
Var<Real> conv1d(const Var<Real>& input, const Var<Real>& kernel, const Var<Real>& bias,
                 std::size_t stride) {
  SYMSE_REQUIRE(stride > 0, "conv1d: stride must be positive");
  require_rank(input.shape(), 3, "conv1d", "input");
  require_rank(kernel.shape(), 3, "conv1d", "kernel");
  const std::size_t batch = input.shape()[0], cin = input.shape()[1], len = input.shape()[2];
  const std::size_t cout = kernel.shape()[0], width = kernel.shape()[2];
  SYMSE_REQUIRE(kernel.shape()[1] == cin, "conv1d: kernel expects " + std::to_string(kernel.shape()[1]) +
                                              " input channels, input has " + std::to_string(cin));
  SYMSE_REQUIRE(bias.shape() == Shape{cout}, "conv1d: bias shape " + to_string(bias.shape()));
  SYMSE_REQUIRE(len >= 1, "conv1d: empty input");
  const std::size_t pad = (width - 1) / 2;
  const std::size_t out_len = (len + stride - 1) / stride;

  auto x = input.value();
  auto w = kernel.value();
  auto bv = bias.value();
  std::vector<Real> y(batch * cout * out_len);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t co = 0; co < cout; ++co) {
      Real* yrow = &y[(b * cout + co) * out_len];
      std::fill(yrow, yrow + out_len, bv[co]);
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const Real* xrow = &x[(b * cin + ci) * len];
        const Real* wrow = &w[(co * cin + ci) * width];
        for (std::size_t k = 0; k < width; ++k) {
          const Real wk = wrow[k];
          const TapRange r = tap_range(out_len, len, stride, pad, k);
          if (r.begin == r.end) continue;
          const Real* xs = xrow + (r.begin * stride + k - pad);
          for (std::size_t o = r.begin; o < r.end; ++o, xs += stride) yrow[o] += wk * *xs;
        }
      }
    }
  }

  const std::size_t xi = input.id(), ki = kernel.id(), bi = bias.id();
  return input.tape()->record(
      {batch, cout, out_len}, std::move(y), {input, kernel, bias},
      [=](Tape<Real>& t, std::size_t self) {
        auto dy = t.upstream(self);
        auto x = t.value(xi);
        auto w = t.value(ki);
        Real* dx = t.sink(xi);
        Real* dw = t.sink(ki);
        Real* db = t.sink(bi);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t co = 0; co < cout; ++co) {
            const Real* dyrow = &dy[(b * cout + co) * out_len];
            if (db) {
              Real acc = 0;
              for (std::size_t o = 0; o < out_len; ++o) acc += dyrow[o];
              db[co] += acc;
            }
            for (std::size_t ci = 0; ci < cin; ++ci) {
              const std::size_t xoff = (b * cin + ci) * len;
              const std::size_t woff = (co * cin + ci) * width;
              for (std::size_t k = 0; k < width; ++k) {
                const TapRange r = tap_range(out_len, len, stride, pad, k);
                if (r.begin == r.end) continue;
                const std::size_t base = xoff + r.begin * stride + k - pad;
                if (dx) {
                  const Real wk = w[woff + k];
                  Real* dxs = dx + base;
                  for (std::size_t o = r.begin; o < r.end; ++o, dxs += stride) *dxs += dyrow[o] * wk;
                }
                if (dw) {
                  const Real* xs = &x[base];
                  Real acc = 0;
                  for (std::size_t o = r.begin; o < r.end; ++o, xs += stride) acc += dyrow[o] * *xs;
                  dw[woff + k] += acc;
                }
              }
            }
          }
        }
      });
}

template <typename Real>
Var<Real> deconv1d(const Var<Real>& input, const Var<Real>& kernel, const Var<Real>& bias,
                   std::size_t stride) {
  SYMSE_REQUIRE(stride > 0, "deconv1d: stride must be positive");
  require_rank(input.shape(), 3, "deconv1d", "input");
  require_rank(kernel.shape(), 3, "deconv1d", "kernel");
  const std::size_t batch = input.shape()[0], cin = input.shape()[1], len = input.shape()[2];
  const std::size_t cout = kernel.shape()[1], width = kernel.shape()[2];
  SYMSE_REQUIRE(kernel.shape()[0] == cin, "deconv1d: kernel expects " +
                                              std::to_string(kernel.shape()[0]) +
                                              " input channels, input has " + std::to_string(cin));
  SYMSE_REQUIRE(bias.shape() == Shape{cout}, "deconv1d: bias shape " + to_string(bias.shape()));
  const std::size_t pad = (width - 1) / 2;
  const std::size_t out_len = len * stride;

  auto x = input.value();
  auto w = kernel.value();
  auto bv = bias.value();
  std::vector<Real> y(batch * cout * out_len);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t co = 0; co < cout; ++co) {
      Real* yrow = &y[(b * cout + co) * out_len];
      std::fill(yrow, yrow + out_len, bv[co]);
    }
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const Real* xrow = &x[(b * cin + ci) * len];
      for (std::size_t co = 0; co < cout; ++co) {
        Real* yrow = &y[(b * cout + co) * out_len];
        const Real* wrow = &w[(ci * cout + co) * width];
        for (std::size_t k = 0; k < width; ++k) {
          const Real wk = wrow[k];
          const TapRange r = tap_range(len, out_len, stride, pad, k);
          if (r.begin == r.end) continue;
          Real* ys = yrow + (r.begin * stride + k - pad);
          for (std::size_t o = r.begin; o < r.end; ++o, ys += stride) *ys += wk * xrow[o];
        }
      }
    }
  }

  const std::size_t xi = input.id(), ki = kernel.id(), bi = bias.id();
  return input.tape()->record(
      {batch, cout, out_len}, std::move(y), {input, kernel, bias},
      [=](Tape<Real>& t, std::size_t self) {
        auto dy = t.upstream(self);
        auto x = t.value(xi);
        auto w = t.value(ki);
        Real* dx = t.sink(xi);
        Real* dw = t.sink(ki);
        Real* db = t.sink(bi);
        for (std::size_t b = 0; b < batch; ++b) {
          if (db) {
            for (std::size_t co = 0; co < cout; ++co) {
              const Real* dyrow = &dy[(b * cout + co) * out_len];
              Real acc = 0;
              for (std::size_t p = 0; p < out_len; ++p) acc += dyrow[p];
              db[co] += acc;
            }
          }
          for (std::size_t ci = 0; ci < cin; ++ci) {
            const std::size_t xoff = (b * cin + ci) * len;
            for (std::size_t co = 0; co < cout; ++co) {
              const Real* dyrow = &dy[(b * cout + co) * out_len];
              const std::size_t woff = (ci * cout + co) * width;
              for (std::size_t k = 0; k < width; ++k) {
                const TapRange r = tap_range(len, out_len, stride, pad, k);
                if (r.begin == r.end) continue;
                const Real* dys = dyrow + (r.begin * stride + k - pad);
                if (dx) {
                  const Real wk = w[woff + k];
                  const Real* d = dys;
                  for (std::size_t o = r.begin; o < r.end; ++o, d += stride) dx[xoff + o] += wk * *d;
                }
                if (dw) {
                  const Real* d = dys;
                  Real acc = 0;
                  for (std::size_t o = r.begin; o < r.end; ++o, d += stride) acc += x[xoff + o] * *d;
                  dw[woff + k] += acc;
                }
              }
            }
          }
        }
      });
}

template <typename Real>
Var<Real> affine(const Var<Real>& input, const Var<Real>& weight, const Var<Real>& bias) {
  require_rank(weight.shape(), 2, "affine", "weight");
  SYMSE_REQUIRE(!input.shape().empty(), "affine: scalar input");
  const std::size_t din = weight.shape()[0], dout = weight.shape()[1];
  SYMSE_REQUIRE(input.shape().back() == din, "affine: input last dim " +
                                                 std::to_string(input.shape().back()) +
                                                 " != weight rows " + std::to_string(din));
  SYMSE_REQUIRE(bias.shape() == Shape{dout}, "affine: bias shape " + to_string(bias.shape()));
  const std::size_t rows = input.size() / din;

  auto x = input.value();
  auto w = weight.value();
  auto bv = bias.value();
  std::vector<Real> y(rows * dout);
  for (std::size_t n = 0; n < rows; ++n) {
    Real* yrow = &y[n * dout];
    std::copy(bv.begin(), bv.end(), yrow);
    for (std::size_t i = 0; i < din; ++i) {
      const Real xv = x[n * din + i];
      const Real* wrow = &w[i * dout];
      for (std::size_t j = 0; j < dout; ++j) yrow[j] += xv * wrow[j];
    }
  }
  Shape out_shape = input.shape();
  out_shape.back() = dout;

  const std::size_t xi = input.id(), wi = weight.id(), bi = bias.id();
  return input.tape()->record(
      std::move(out_shape), std::move(y), {input, weight, bias},
      [=](Tape<Real>& t, std::size_t self) {
        auto dy = t.upstream(self);
        auto x = t.value(xi);
        auto w = t.value(wi);
        Real* dx = t.sink(xi);
        Real* dw = t.sink(wi);
        Real* db = t.sink(bi);
        for (std::size_t n = 0; n < rows; ++n) {
          const Real* dyrow = &dy[n * dout];
          if (db)
            for (std::size_t j = 0; j < dout; ++j) db[j] += dyrow[j];
          for (std::size_t i = 0; i < din; ++i) {
            const Real* wrow = &w[i * dout];
            if (dx) {
              Real acc = 0;
              for (std::size_t j = 0; j < dout; ++j) acc += dyrow[j] * wrow[j];
              dx[n * din + i] += acc;
            }
            if (dw) {
              const Real xv = x[n * din + i];
              Real* dwrow = dw + i * dout;
              for (std::size_t j = 0; j < dout; ++j) dwrow[j] += xv * dyrow[j];
            }
          }
        }
      });
}

template <typename Real>
Var<Real> activation(const Var<Real>& input, Activation kind) {
  Real neg = 0;
  if (kind.kind == ActivationKind::kLeakyRelu) {
    SYMSE_REQUIRE(kind.slope > 0.0 && kind.slope < 1.0, "leaky-relu: slope must lie in (0,1)");
    neg = static_cast<Real>(kind.slope);
  }
  auto x = input.value();
  std::vector<Real> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] >= 0 ? x[i] : neg * x[i];
  const std::size_t xi = input.id();
  return input.tape()->record(input.shape(), std::move(y), {input}, [=](Tape<Real>& t, std::size_t self) {
    auto dy = t.upstream(self);
    auto x = t.value(xi);
    Real* dx = t.sink(xi);
    // The derivative at exactly 0 is the positive-side one.
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += x[i] >= 0 ? dy[i] : neg * dy[i];
  });
}

template <typename Real>
Var<Real> softmax(const Var<Real>& input) {
  SYMSE_REQUIRE(!input.shape().empty() && input.shape().back() >= 1, "softmax: empty last axis");
  const std::size_t k = input.shape().back();
  const std::size_t rows = input.size() / k;
  auto x = input.value();
  std::vector<Real> y(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const Real* xr = &x[r * k];
    Real* yr = &y[r * k];
    const Real mx = *std::max_element(xr, xr + k);
    Real z = 0;
    for (std::size_t j = 0; j < k; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      z += yr[j];
    }
    for (std::size_t j = 0; j < k; ++j) yr[j] /= z;
  }
  const std::size_t xi = input.id();
  return input.tape()->record(input.shape(), std::move(y), {input}, [=](Tape<Real>& t, std::size_t self) {
    auto dy = t.upstream(self);
    auto y = t.value(self);
    Real* dx = t.sink(xi);
    for (std::size_t r = 0; r < rows; ++r) {
      Real dot = 0;
      for (std::size_t j = 0; j < k; ++j) dot += dy[r * k + j] * y[r * k + j];
      for (std::size_t j = 0; j < k; ++j) dx[r * k + j] += y[r * k + j] * (dy[r * k + j] - dot);
    }
  });
}

template <typename Real>
Var<Real> dropout(const Var<Real>& input, double rate, bool training, std::mt19937_64& rng) {
  SYMSE_REQUIRE(rate >= 0.0 && rate < 1.0, "dropout: rate must lie in [0,1)");
  if (!training || rate == 0.0) return input;
  auto x = input.value();
  std::vector<Real> mask(x.size());
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const Real keep_scale = static_cast<Real>(1.0 / (1.0 - rate));
  for (auto& m : mask) m = uni(rng) < rate ? Real(0) : keep_scale;
  std::vector<Real> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * mask[i];
  const std::size_t xi = input.id();
  return input.tape()->record(input.shape(), std::move(y), {input},
                              [=, mask = std::move(mask)](Tape<Real>& t, std::size_t self) {
                                auto dy = t.upstream(self);
                                Real* dx = t.sink(xi);
                                for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * mask[i];
                              });
}

template <typename Real>
Var<Real> stop_gradient(const Var<Real>& input) {
  return input.tape()->constant(input.tensor());
}

template <typename Real>
Var<Real> straight_through(const Var<Real>& input, const Tensor<Real>& target) {
  SYMSE_REQUIRE(target.shape == input.shape(), "straight_through: target shape " +
                                                   to_string(target.shape) + " != input shape " +
                                                   to_string(input.shape()));
  const std::size_t xi = input.id();
  return input.tape()->record(target.shape, target.values, {input}, [=](Tape<Real>& t, std::size_t self) {
    auto dy = t.upstream(self);
    Real* dx = t.sink(xi);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
  });
}

template <typename Real>
Var<Real> add(const Var<Real>& a, const Var<Real>& b) {
  require_same_shape(a, b, "add");
  auto av = a.value();
  auto bv = b.value();
  std::vector<Real> y(av.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] + bv[i];
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape()->record(a.shape(), std::move(y), {a, b}, [=](Tape<Real>& t, std::size_t self) {
    auto dy = t.upstream(self);
    for (std::size_t id : {ai, bi}) {
      if (Real* d = t.sink(id))
        for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy[i];
    }
  });
}

template <typename Real>
Var<Real> sub(const Var<Real>& a, const Var<Real>& b) {
  require_same_shape(a, b, "sub");
  auto av = a.value();
  auto bv = b.value();
  std::vector<Real> y(av.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] - bv[i];
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape()->record(a.shape(), std::move(y), {a, b}, [=](Tape<Real>& t, std::size_t self) {
    auto dy = t.upstream(self);
    if (Real* d = t.sink(ai))
      for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy[i];
    if (Real* d = t.sink(bi))
      for (std::size_t i = 0; i < dy.size(); ++i) d[i] -= dy[i];
  });
}

template <typename Real>
Var<Real> mul(const Var<Real>& a, const Var<Real>& b) {
  require_same_shape(a, b, "mul");
  auto av = a.value();
  auto bv = b.value();
  std::vector<Real> y(av.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * bv[i];
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape()->record(a.shape(), std::move(y), {a, b}, [=](Tape<Real>& t, std::size_t self) {
    auto dy = t.upstream(self);
    auto av = t.value(ai);
    auto bv = t.value(bi);
    if (Real* d = t.sink(ai))
      for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy[i] * bv[i];
    if (Real* d = t.sink(bi))
      for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy[i] * av[i];
  });
}

template <typename Real>
Var<Real> scale(const Var<Real>& a, double factor) {
  const Real f = static_cast<Real>(factor);
  auto av = a.value();
  std::vector<Real> y(av.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * f;
  const std::size_t ai = a.id();
  return a.tape()->record(a.shape(), std::move(y), {a}, [=](Tape<Real>& t, std::size_t self) {
    auto dy = t.upstream(self);
    Real* d = t.sink(ai);
    for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy[i] * f;
  });
}

template <typename Real>
Var<Real> add_broadcast(const Var<Real>& a, const Var<Real>& b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  SYMSE_REQUIRE(bs.size() <= as.size() && std::equal(bs.rbegin(), bs.rend(), as.rbegin()),
                "add_broadcast: " + to_string(bs) + " is not a trailing shape of " + to_string(as));
  const std::size_t inner = b.size();
  const std::size_t outer = a.size() / inner;
  auto av = a.value();
  auto bv = b.value();
  std::vector<Real> y(av.size());
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < inner; ++i) y[o * inner + i] = av[o * inner + i] + bv[i];
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape()->record(as, std::move(y), {a, b}, [=](Tape<Real>& t, std::size_t self) {
    auto dy = t.upstream(self);
    if (Real* d = t.sink(ai))
      for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy[i];
    if (Real* d = t.sink(bi))
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i) d[i] += dy[o * inner + i];
  });
}

template <typename Real>
Var<Real> sum(const Var<Real>& a) {
  double acc = 0;
  for (Real v : a.value()) acc += v;
  const std::size_t ai = a.id();
  return a.tape()->record({1}, {static_cast<Real>(acc)}, {a}, [=](Tape<Real>& t, std::size_t self) {
    const Real g = t.upstream(self)[0];
    Real* d = t.sink(ai);
    const std::size_t n = t.value(ai).size();
    for (std::size_t i = 0; i < n; ++i) d[i] += g;
  });
}

template <typename Real>
Var<Real> mean(const Var<Real>& a) {
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

template <typename Real>
Var<Real> mse(const Var<Real>& a, const Var<Real>& b) {
  require_same_shape(a, b, "mse");
  auto av = a.value();
  auto bv = b.value();
  const std::size_t n = av.size();
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(av[i]) - static_cast<double>(bv[i]);
    acc += d * d;
  }
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape()->record({1}, {static_cast<Real>(acc / static_cast<double>(n))}, {a, b},
                          [=](Tape<Real>& t, std::size_t self) {
                            const Real g = t.upstream(self)[0] * Real(2) / static_cast<Real>(n);
                            auto av = t.value(ai);
                            auto bv = t.value(bi);
                            if (Real* d = t.sink(ai))
                              for (std::size_t i = 0; i < n; ++i) d[i] += g * (av[i] - bv[i]);
                            if (Real* d = t.sink(bi))
                              for (std::size_t i = 0; i < n; ++i) d[i] -= g * (av[i] - bv[i]);
                          });
}

template <typename Real>
Var<Real> reshape(const Var<Real>& a, Shape shape) {
  SYMSE_REQUIRE(numel(shape) == a.size(), "reshape: cannot view " + to_string(a.shape()) + " as " +
                                              to_string(shape));
  auto av = a.value();
  const std::size_t ai = a.id();
  return a.tape()->record(std::move(shape), std::vector<Real>(av.begin(), av.end()), {a},
                          [=](Tape<Real>& t, std::size_t self) {
                            auto dy = t.upstream(self);
                            Real* d = t.sink(ai);
                            for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy[i];
                          });
}

template <typename Real>
Var<Real> transpose12(const Var<Real>& a) {
  require_rank(a.shape(), 3, "transpose12", "input");
  const std::size_t nb = a.shape()[0], nx = a.shape()[1], ny = a.shape()[2];
  auto av = a.value();
  std::vector<Real> y(av.size());
  for (std::size_t b = 0; b < nb; ++b)
    for (std::size_t i = 0; i < nx; ++i)
      for (std::size_t j = 0; j < ny; ++j) y[(b * ny + j) * nx + i] = av[(b * nx + i) * ny + j];
  const std::size_t ai = a.id();
  return a.tape()->record({nb, ny, nx}, std::move(y), {a}, [=](Tape<Real>& t, std::size_t self) {
    auto dy = t.upstream(self);
    Real* d = t.sink(ai);
    for (std::size_t b = 0; b < nb; ++b)
      for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t j = 0; j < ny; ++j) d[(b * nx + i) * ny + j] += dy[(b * ny + j) * nx + i];
  });
}

template <typename Real>
Var<Real> concat(std::span<const Var<Real>> parts, std::size_t axis) {
  SYMSE_REQUIRE(!parts.empty(), "concat: no inputs");
  const Shape& first = parts[0].shape();
  SYMSE_REQUIRE(axis < first.size(), "concat: axis out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    SYMSE_REQUIRE(s.size() == first.size(), "concat: rank mismatch");
    for (std::size_t d = 0; d < s.size(); ++d)
      SYMSE_REQUIRE(d == axis || s[d] == first[d], "concat: shape mismatch " + to_string(s) + " vs " +
                                                        to_string(first) + " off axis " +
                                                        std::to_string(axis));
    out_shape[axis] += s[axis];
    widths.push_back(s[axis]);
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];
  const std::size_t total = out_shape[axis];

  std::vector<Real> y(numel(out_shape));
  std::vector<std::size_t> ids;
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    auto v = parts[p].value();
    const std::size_t w = widths[p] * inner;
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(&v[o * w], w, &y[o * total * inner + offset * inner]);
    offset += widths[p];
    ids.push_back(parts[p].id());
  }
  return parts[0].tape()->record(std::move(out_shape), std::move(y), parts, [=](Tape<Real>& t, std::size_t self) {
    auto dy = t.upstream(self);
    std::size_t offset = 0;
    for (std::size_t p = 0; p < ids.size(); ++p) {
      const std::size_t w = widths[p] * inner;
      if (Real* d = t.sink(ids[p]))
        for (std::size_t o = 0; o < outer; ++o) {
          const Real* src = &dy[o * total * inner + offset * inner];
          for (std::size_t i = 0; i < w; ++i) d[o * w + i] += src[i];
        }
      offset += widths[p];
    }
  });
}

template <typename Real>
Var<Real> slice(const Var<Real>& a, std::size_t axis, std::size_t start, std::size_t length) {
  const Shape& s = a.shape();
  SYMSE_REQUIRE(axis < s.size(), "slice: axis out of range");
  SYMSE_REQUIRE(start + length <= s[axis], "slice: [" + std::to_string(start) + "," +
                                               std::to_string(start + length) + ") exceeds axis of " +
                                               std::to_string(s[axis]));
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= s[d];
  for (std::size_t d = axis + 1; d < s.size(); ++d) inner *= s[d];
  const std::size_t full = s[axis];
  Shape out_shape = s;
  out_shape[axis] = length;
  auto av = a.value();
  std::vector<Real> y(outer * length * inner);
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(&av[(o * full + start) * inner], length * inner, &y[o * length * inner]);
  const std::size_t ai = a.id();
  return a.tape()->record(std::move(out_shape), std::move(y), {a}, [=](Tape<Real>& t, std::size_t self) {
    auto dy = t.upstream(self);
    Real* d = t.sink(ai);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < length * inner; ++i) d[(o * full + start) * inner + i] += dy[o * length * inner + i];
  });
}

template <typename Real>
Var<Real> bmm_nt(const Var<Real>& a, const Var<Real>& b) {
  require_rank(a.shape(), 3, "bmm_nt", "lhs");
  require_rank(b.shape(), 3, "bmm_nt", "rhs");
  const std::size_t nb = a.shape()[0], m = a.shape()[1], k = a.shape()[2], n = b.shape()[1];
  SYMSE_REQUIRE(b.shape()[0] == nb && b.shape()[2] == k,
                "bmm_nt: incompatible " + to_string(a.shape()) + " x " + to_string(b.shape()) + "^T");
  auto av = a.value();
  auto bv = b.value();
  std::vector<Real> y(nb * m * n);
  for (std::size_t z = 0; z < nb; ++z)
    for (std::size_t i = 0; i < m; ++i) {
      const Real* ar = &av[(z * m + i) * k];
      for (std::size_t j = 0; j < n; ++j) {
        const Real* br = &bv[(z * n + j) * k];
        Real acc = 0;
        for (std::size_t q = 0; q < k; ++q) acc += ar[q] * br[q];
        y[(z * m + i) * n + j] = acc;
      }
    }
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape()->record({nb, m, n}, std::move(y), {a, b}, [=](Tape<Real>& t, std::size_t self) {
    auto dy = t.upstream(self);
    auto av = t.value(ai);
    auto bv = t.value(bi);
    Real* da = t.sink(ai);
    Real* db = t.sink(bi);
    for (std::size_t z = 0; z < nb; ++z)
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const Real g = dy[(z * m + i) * n + j];
          const std::size_t ao = (z * m + i) * k, bo = (z * n + j) * k;
          if (da)
            for (std::size_t q = 0; q < k; ++q) da[ao + q] += g * bv[bo + q];
          if (db)
            for (std::size_t q = 0; q < k; ++q) db[bo + q] += g * av[ao + q];
        }
  });
}

template <typename Real>
Var<Real> bmm(const Var<Real>& a, const Var<Real>& b) {
  require_rank(a.shape(), 3, "bmm", "lhs");
  require_rank(b.shape(), 3, "bmm", "rhs");
  const std::size_t nb = a.shape()[0], m = a.shape()[1], n = a.shape()[2], p = b.shape()[2];
  SYMSE_REQUIRE(b.shape()[0] == nb && b.shape()[1] == n,
                "bmm: incompatible " + to_string(a.shape()) + " x " + to_string(b.shape()));
  auto av = a.value();
  auto bv = b.value();
  std::vector<Real> y(nb * m * p);
  for (std::size_t z = 0; z < nb; ++z)
    for (std::size_t i = 0; i < m; ++i) {
      Real* yr = &y[(z * m + i) * p];
      for (std::size_t j = 0; j < n; ++j) {
        const Real aij = av[(z * m + i) * n + j];
        const Real* br = &bv[(z * n + j) * p];
        for (std::size_t q = 0; q < p; ++q) yr[q] += aij * br[q];
      }
    }
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape()->record({nb, m, p}, std::move(y), {a, b}, [=](Tape<Real>& t, std::size_t self) {
    auto dy = t.upstream(self);
    auto av = t.value(ai);
    auto bv = t.value(bi);
    Real* da = t.sink(ai);
    Real* db = t.sink(bi);
    for (std::size_t z = 0; z < nb; ++z)
      for (std::size_t i = 0; i < m; ++i) {
        const Real* dyr = &dy[(z * m + i) * p];
        for (std::size_t j = 0; j < n; ++j) {
          const Real* br = &bv[(z * n + j) * p];
          if (da) {
            Real acc = 0;
            for (std::size_t q = 0; q < p; ++q) acc += dyr[q] * br[q];
            da[(z * m + i) * n + j] += acc;
          }
          if (db) {
            const Real aij = av[(z * m + i) * n + j];
            Real* dbr = db + (z * n + j) * p;
            for (std::size_t q = 0; q < p; ++q) dbr[q] += aij * dyr[q];
          }
        }
      }
  });
}

template <typename Real>
Var<Real> embedding(const Var<Real>& table, std::span<const std::int32_t> indices, Shape index_shape) {
  require_rank(table.shape(), 2, "embedding", "table");
  SYMSE_REQUIRE(numel(index_shape) == indices.size(), "embedding: index shape does not match count");
  const std::size_t rows = table.shape()[0], dim = table.shape()[1];
  std::vector<std::int32_t> idx(indices.begin(), indices.end());
  for (auto i : idx)
    SYMSE_REQUIRE(i >= 0 && static_cast<std::size_t>(i) < rows,
                  "embedding: index " + std::to_string(i) + " outside table of " + std::to_string(rows));
  auto tv = table.value();
  std::vector<Real> y(idx.size() * dim);
  for (std::size_t n = 0; n < idx.size(); ++n) std::copy_n(&tv[idx[n] * dim], dim, &y[n * dim]);
  Shape out_shape = std::move(index_shape);
  out_shape.push_back(dim);
  const std::size_t ti = table.id();
  return table.tape()->record(std::move(out_shape), std::move(y), {table},
                              [=, idx = std::move(idx)](Tape<Real>& t, std::size_t self) {
                                auto dy = t.upstream(self);
                                Real* d = t.sink(ti);
                                for (std::size_t n = 0; n < idx.size(); ++n)
                                  for (std::size_t j = 0; j < dim; ++j) d[idx[n] * dim + j] += dy[n * dim + j];
                              });
}

#define SYMSE_INSTANTIATE_OPS(R)                                                                   \
  template Var<R> conv1d(const Var<R>&, const Var<R>&, const Var<R>&, std::size_t);               \
  template Var<R> deconv1d(const Var<R>&, const Var<R>&, const Var<R>&, std::size_t);             \
  template Var<R> affine(const Var<R>&, const Var<R>&, const Var<R>&);                            \
  template Var<R> activation(const Var<R>&, Activation);                                          \
  template Var<R> softmax(const Var<R>&);                                                         \
  template Var<R> dropout(const Var<R>&, double, bool, std::mt19937_64&);                         \
  template Var<R> stop_gradient(const Var<R>&);                                                   \
  template Var<R> straight_through(const Var<R>&, const Tensor<R>&);                              \
  template Var<R> add(const Var<R>&, const Var<R>&);                                              \
  template Var<R> sub(const Var<R>&, const Var<R>&);                                              \
  template Var<R> mul(const Var<R>&, const Var<R>&);                                              \
  template Var<R> scale(const Var<R>&, double);                                                   \
  template Var<R> add_broadcast(const Var<R>&, const Var<R>&);                                    \
  template Var<R> sum(const Var<R>&);                                                             \
  template Var<R> mean(const Var<R>&);                                                            \
  template Var<R> mse(const Var<R>&, const Var<R>&);                                              \
  template Var<R> reshape(const Var<R>&, Shape);                                                  \
  template Var<R> transpose12(const Var<R>&);                                                     \
  template Var<R> concat(std::span<const Var<R>>, std::size_t);                                   \
  template Var<R> slice(const Var<R>&, std::size_t, std::size_t, std::size_t);                    \
  template Var<R> bmm_nt(const Var<R>&, const Var<R>&);                                           \
  template Var<R> bmm(const Var<R>&, const Var<R>&);                                              \
  template Var<R> embedding(const Var<R>&, std::span<const std::int32_t>, Shape);

SYMSE_INSTANTIATE_OPS(float)
SYMSE_INSTANTIATE_OPS(double)

}  // namespace symse::ad
