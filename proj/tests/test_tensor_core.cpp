// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <cstring>
#include <random>

#include "doctest.h"
#include "symse/gradcheck.hpp"
#include "symse/ops.hpp"
#include "symse/optim.hpp"

using namespace symse;
using namespace symse::ad;

namespace {

Tensor<double> random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(lo, hi);
  Tensor<double> t(std::move(shape));
  for (auto& v : t.values) v = uni(rng);
  return t;
}

// Direct nested-loop "same"-padded strided convolution.
std::vector<double> conv_oracle(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b,
                                std::size_t stride) {
  const std::size_t nb = x.dim(0), cin = x.dim(1), len = x.dim(2);
  const std::size_t cout = w.dim(0), width = w.dim(2);
  const long pad = static_cast<long>((width - 1) / 2);
  const std::size_t out_len = (len + stride - 1) / stride;
  std::vector<double> y(nb * cout * out_len);
  for (std::size_t bb = 0; bb < nb; ++bb)
    for (std::size_t co = 0; co < cout; ++co)
      for (std::size_t o = 0; o < out_len; ++o) {
        double acc = b[co];
        for (std::size_t ci = 0; ci < cin; ++ci)
          for (std::size_t k = 0; k < width; ++k) {
            const long idx = static_cast<long>(o * stride) - pad + static_cast<long>(k);
            if (idx < 0 || idx >= static_cast<long>(len)) continue;
            acc += x[(bb * cin + ci) * len + idx] * w[(co * cin + ci) * width + k];
          }
        y[(bb * cout + co) * out_len + o] = acc;
      }
  return y;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_CASE("conv1d: width-1 kernel with stride 2 is a strided scale") {
  Tape<double> t;
  auto x = t.constant(Tensor<double>({1, 1, 4}, {1, 2, 3, 4}));
  auto k = t.constant(Tensor<double>({1, 1, 1}, {2}));
  auto b = t.constant(Tensor<double>({1}, {0}));
  auto y = conv1d(x, k, b, 2);
  CHECK(y.shape() == Shape{1, 1, 2});
  CHECK(y.value()[0] == 2.0);
  CHECK(y.value()[1] == 6.0);
}

TEST_CASE("conv1d: zero kernel gives zero output") {
  Tape<double> t;
  auto x = t.constant(random_tensor({2, 3, 9}, 1));
  auto k = t.constant(Tensor<double>({4, 3, 5}));
  auto b = t.constant(Tensor<double>({4}));
  auto y = conv1d(x, k, b, 2);
  CHECK(y.shape() == Shape{2, 4, 5});
  for (double v : y.value()) CHECK(v == 0.0);
}

TEST_CASE("conv1d: matches nested-loop oracle") {
  for (std::size_t stride : {1u, 2u, 3u}) {
    for (std::size_t width : {1u, 2u, 4u, 5u}) {
      auto xt = random_tensor({2, 3, 8}, 10 + width);
      auto wt = random_tensor({4, 3, width}, 20 + width);
      auto bt = random_tensor({4}, 30);
      Tape<double> t;
      auto y = conv1d(t.constant(xt), t.constant(wt), t.constant(bt), stride);
      auto expect = conv_oracle(xt, wt, bt, stride);
      REQUIRE(y.size() == expect.size());
      for (std::size_t i = 0; i < expect.size(); ++i) CHECK(std::abs(y.value()[i] - expect[i]) < 1e-12);
    }
  }
}

TEST_CASE("conv1d: channel mismatch is a contract violation") {
  Tape<double> t;
  auto x = t.constant(Tensor<double>({1, 2, 8}));
  auto k = t.constant(Tensor<double>({4, 3, 5}));
  auto b = t.constant(Tensor<double>({4}));
  CHECK_THROWS_AS(conv1d(x, k, b, 2), ContractError);
}

TEST_CASE("deconv1d: width-1 kernel scatters to source positions") {
  Tape<double> t;
  auto x = t.constant(Tensor<double>({1, 1, 2}, {1, 1}));
  auto k = t.constant(Tensor<double>({1, 1, 1}, {3}));
  auto b = t.constant(Tensor<double>({1}));
  auto y = deconv1d(x, k, b, 2);
  REQUIRE(y.shape() == Shape{1, 1, 4});
  CHECK(y.value()[0] == 3.0);
  CHECK(y.value()[1] == 0.0);
  CHECK(y.value()[2] == 3.0);
  CHECK(y.value()[3] == 0.0);
}

TEST_CASE("deconv1d: zero input and zero bias give zero output") {
  Tape<double> t;
  auto y = deconv1d(t.constant(Tensor<double>({1, 2, 5})), t.constant(random_tensor({2, 3, 7}, 3)),
                    t.constant(Tensor<double>({3})), 2);
  CHECK(y.shape() == Shape{1, 3, 10});
  for (double v : y.value()) CHECK(v == 0.0);
}

TEST_CASE("deconv1d: non-positive stride is rejected") {
  Tape<double> t;
  CHECK_THROWS_AS(deconv1d(t.constant(Tensor<double>({1, 1, 2})), t.constant(Tensor<double>({1, 1, 1})),
                           t.constant(Tensor<double>({1})), 0),
                  ContractError);
}

TEST_CASE("deconv1d is the adjoint of conv1d") {
  // a: [1,3,12] -> conv -> [1,2,6]; b: [1,2,6] -> deconv -> [1,3,12].
  for (std::size_t width : {1u, 2u, 3u, 4u, 5u, 6u, 7u}) {
    for (std::size_t stride : {1u, 2u, 3u}) {
      const std::size_t long_len = 6 * stride;
      auto a = random_tensor({1, 3, long_len}, 100 + width);
      auto b = random_tensor({1, 2, 6}, 200 + width);
      auto k = random_tensor({2, 3, width}, 300 + width);
      Tape<double> t;
      auto ca = conv1d(t.constant(a), t.constant(k), t.constant(Tensor<double>({2})), stride);
      auto db = deconv1d(t.constant(b), t.constant(k), t.constant(Tensor<double>({3})), stride);
      REQUIRE(ca.shape() == b.shape);
      REQUIRE(db.shape() == a.shape);
      CHECK(std::abs(dot(ca.value(), b.values) - dot(a.values, db.value())) < 1e-10);
    }
  }
}

TEST_CASE("affine: identity weight and hand expansion") {
  Tape<double> t;
  auto x = t.constant(Tensor<double>({2, 2}, {3, -4, 0.5, 7}));
  auto eye = t.constant(Tensor<double>({2, 2}, {1, 0, 0, 1}));
  auto zero = t.constant(Tensor<double>({2}));
  auto y = affine(x, eye, zero);
  for (std::size_t i = 0; i < 4; ++i) CHECK(y.value()[i] == x.value()[i]);

  auto x2 = t.constant(Tensor<double>({1, 2}, {1, 2}));
  auto w2 = t.constant(Tensor<double>({2, 2}, {1, 0, 0, 2}));
  auto b2 = t.constant(Tensor<double>({2}, {1, 1}));
  auto y2 = affine(x2, w2, b2);
  CHECK(y2.value()[0] == 2.0);
  CHECK(y2.value()[1] == 5.0);
}

TEST_CASE("affine: matches nested-loop matmul over leading dims") {
  auto x = random_tensor({2, 3, 5}, 7);
  auto w = random_tensor({5, 4}, 8);
  auto b = random_tensor({4}, 9);
  Tape<double> t;
  auto y = affine(t.constant(x), t.constant(w), t.constant(b));
  CHECK(y.shape() == Shape{2, 3, 4});
  for (std::size_t n = 0; n < 6; ++n)
    for (std::size_t j = 0; j < 4; ++j) {
      double acc = b[j];
      for (std::size_t i = 0; i < 5; ++i) acc += x[n * 5 + i] * w[i * 4 + j];
      CHECK(std::abs(y.value()[n * 4 + j] - acc) < 1e-12);
    }
}

TEST_CASE("affine: dimension mismatch") {
  Tape<double> t;
  CHECK_THROWS_AS(affine(t.constant(Tensor<double>({2, 3})), t.constant(Tensor<double>({2, 2})),
                         t.constant(Tensor<double>({2}))),
                  ContractError);
}

TEST_CASE("activation: forward values") {
  Tape<double> t;
  auto r = relu(t.constant(Tensor<double>({3}, {-1, 0, 2})));
  CHECK(r.value()[0] == 0.0);
  CHECK(r.value()[1] == 0.0);
  CHECK(r.value()[2] == 2.0);
  auto l = leaky_relu(t.constant(Tensor<double>({1}, {-5})), 0.2);
  CHECK(l.value()[0] == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK_THROWS_AS(leaky_relu(t.constant(Tensor<double>({1})), 1.5), ContractError);
}

TEST_CASE("activation: gradient at zero is the positive-side derivative") {
  Tape<double> t;
  auto x = t.parameter(Tensor<double>({2}, {0.0, 0.0}));
  auto y = sum(leaky_relu(x, 0.2));
  t.backward(y);
  CHECK(t.grad(x)[0] == 1.0);
  CHECK(t.grad(x)[1] == 1.0);
}

TEST_CASE("activation: gradients match finite differences away from zero") {
  Tensor<double> x({6}, {-2.0, -0.7, -0.1, 0.2, 0.9, 3.0});
  auto relu_report = grad_check([](Tape<double>&, std::span<const Var<double>> in) { return relu(in[0]); }, {x});
  CHECK(relu_report.max_rel_error < 1e-6);
  auto leaky_report =
      grad_check([](Tape<double>&, std::span<const Var<double>> in) { return leaky_relu(in[0], 0.2); }, {x});
  CHECK(leaky_report.max_rel_error < 1e-6);
}

TEST_CASE("softmax: uniform row, stability, shift invariance") {
  Tape<double> t;
  auto u = softmax(t.constant(Tensor<double>({3}, {0, 0, 0})));
  for (double v : u.value()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  auto big = softmax(t.constant(Tensor<double>({2}, {1000, 0})));
  CHECK(std::isfinite(big.value()[0]));
  CHECK(big.value()[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(big.value()[1] < 1e-300);

  auto x = random_tensor({4, 7}, 11, -5, 5);
  auto shifted = x;
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t j = 0; j < 7; ++j) shifted[r * 7 + j] += 3.0 * static_cast<double>(r) - 1.5;
  auto a = softmax(t.constant(x));
  auto b = softmax(t.constant(shifted));
  for (std::size_t r = 0; r < 4; ++r) {
    double s = 0;
    for (std::size_t j = 0; j < 7; ++j) {
      s += a.value()[r * 7 + j];
      CHECK(std::abs(a.value()[r * 7 + j] - b.value()[r * 7 + j]) < 1e-9);
    }
    CHECK(std::abs(s - 1.0) < 1e-6);
  }
}

TEST_CASE("dropout: inference and zero rate are identity") {
  std::mt19937_64 rng(5);
  Tape<double> t;
  auto x = t.constant(random_tensor({100}, 5));
  auto a = dropout(x, 0.5, false, rng);
  auto b = dropout(x, 0.0, true, rng);
  for (std::size_t i = 0; i < 100; ++i) {
    CHECK(a.value()[i] == x.value()[i]);
    CHECK(b.value()[i] == x.value()[i]);
  }
}

TEST_CASE("dropout: empirical zero fraction and inverted scaling") {
  std::mt19937_64 rng(17);
  Tape<double> t;
  auto x = t.constant(Tensor<double>({1000000}, std::vector<double>(1000000, 1.0)));
  auto y = dropout(x, 0.5, true, rng);
  std::size_t zeros = 0;
  for (double v : y.value()) {
    if (v == 0.0)
      ++zeros;
    else
      CHECK_EQ(v, 2.0);
  }
  CHECK(std::abs(static_cast<double>(zeros) / 1e6 - 0.5) < 0.01);
}

TEST_CASE("stop_gradient: identity forward, zero backward") {
  Tape<double> t;
  auto x = t.parameter(Tensor<double>({3}, {1, 2, 3}));
  auto s = stop_gradient(x);
  for (std::size_t i = 0; i < 3; ++i) CHECK(s.value()[i] == x.value()[i]);
  t.backward(sum(s));
  for (double g : t.grad(x).values) CHECK(g == 0.0);

  Tape<double> t2;
  auto x2 = t2.parameter(Tensor<double>({1}, {2}));
  t2.backward(sum(mul(x2, stop_gradient(x2))));
  CHECK(t2.grad(x2)[0] == 2.0);
}

TEST_CASE("straight_through: forward is the target, gradient is passed unchanged") {
  Tape<double> t;
  auto h = t.parameter(Tensor<double>({2}, {0.1, 0.3}));
  Tensor<double> target({2}, {0.0, 1.0});
  auto q = straight_through(h, target);
  CHECK(q.value()[0] == 0.0);
  CHECK(q.value()[1] == 1.0);
  auto w = t.constant(Tensor<double>({2}, {3.0, -4.0}));
  t.backward(sum(mul(q, w)));
  CHECK(t.grad(h)[0] == 3.0);
  CHECK(t.grad(h)[1] == -4.0);
}

TEST_CASE("backward: basic laws") {
  {
    Tape<double> t;
    auto x = t.parameter(Tensor<double>({3}, {4, 5, 6}));
    t.backward(sum(x));
    for (double g : t.grad(x).values) CHECK(g == 1.0);
  }
  {
    Tape<double> t;
    auto x = t.parameter(random_tensor({5}, 3));
    t.backward(mse(x, x));
    for (double g : t.grad(x).values) CHECK(g == 0.0);
  }
  {
    Tape<double> t;
    auto x = t.parameter(random_tensor({3}, 4));
    auto unused = t.parameter(random_tensor({2}, 5));
    t.backward(sum(x));
    for (double g : t.grad(unused).values) CHECK(g == 0.0);
  }
  {
    Tape<double> t;
    auto x = t.parameter(random_tensor({3}, 4));
    CHECK_THROWS_AS(t.backward(x), ContractError);
  }
}

TEST_CASE("backward: composed conv1d -> activation -> affine -> mse network") {
  std::vector<Tensor<double>> inputs = {random_tensor({2, 3, 8}, 41), random_tensor({4, 3, 5}, 42),
                                        random_tensor({4}, 43), random_tensor({4, 3}, 44),
                                        random_tensor({3}, 45), random_tensor({2, 4, 3}, 46)};
  auto build = [](Tape<double>&, std::span<const Var<double>> in) {
    auto h = leaky_relu(conv1d(in[0], in[1], in[2], 2), 0.2);  // [2,4,4]
    auto ht = transpose12(h);                                   // [2,4,4] (time-major)
    auto y = affine(ht, in[3], in[4]);                          // [2,4,3]
    auto target = slice(concat(std::vector<Var<double>>{in[5], in[5]}, 1), 1, 0, 4);
    return mse(y, target);
  };
  GradCheckOptions opt;
  opt.step = 1e-5;
  auto report = grad_check(build, inputs, {"x", "kernel", "bias", "w", "b", "target"}, opt);
  INFO("worst " << report.worst_input << "[" << report.worst_index << "] a=" << report.worst_analytic
                << " n=" << report.worst_numeric);
  CHECK(report.max_rel_error < 1e-5);
}

TEST_CASE("grad_check: every primitive") {
  struct Case {
    const char* name;
    GraphBuilder build;
    std::vector<Tensor<double>> inputs;
    double tol;
  };
  std::vector<Case> cases = {
      {"affine", [](Tape<double>&, std::span<const Var<double>> in) { return affine(in[0], in[1], in[2]); },
       {random_tensor({3, 4}, 1), random_tensor({4, 5}, 2), random_tensor({5}, 3)}, 1e-6},
      {"softmax", [](Tape<double>&, std::span<const Var<double>> in) { return softmax(in[0]); },
       {random_tensor({3, 6}, 4, -2, 2)}, 1e-6},
      {"conv1d", [](Tape<double>&, std::span<const Var<double>> in) { return conv1d(in[0], in[1], in[2], 2); },
       {random_tensor({2, 3, 9}, 5), random_tensor({4, 3, 5}, 6), random_tensor({4}, 7)}, 1e-6},
      {"deconv1d",
       [](Tape<double>&, std::span<const Var<double>> in) { return deconv1d(in[0], in[1], in[2], 2); },
       {random_tensor({2, 3, 5}, 8), random_tensor({3, 2, 6}, 9), random_tensor({2}, 10)}, 1e-5},
      {"bmm_nt", [](Tape<double>&, std::span<const Var<double>> in) { return bmm_nt(in[0], in[1]); },
       {random_tensor({2, 3, 4}, 11), random_tensor({2, 5, 4}, 12)}, 1e-5},
      {"bmm", [](Tape<double>&, std::span<const Var<double>> in) { return bmm(in[0], in[1]); },
       {random_tensor({2, 3, 4}, 13), random_tensor({2, 4, 5}, 14)}, 1e-5},
      {"transpose12", [](Tape<double>&, std::span<const Var<double>> in) { return transpose12(in[0]); },
       {random_tensor({2, 3, 4}, 15)}, 1e-5},
      {"concat+slice",
       [](Tape<double>&, std::span<const Var<double>> in) {
         auto c = concat(std::vector<Var<double>>{in[0], in[1]}, 2);
         return slice(c, 2, 1, 5);
       },
       {random_tensor({2, 3, 4}, 16), random_tensor({2, 3, 2}, 17)}, 1e-5},
      {"add_broadcast", [](Tape<double>&, std::span<const Var<double>> in) { return add_broadcast(in[0], in[1]); },
       {random_tensor({2, 3, 4}, 18), random_tensor({3, 4}, 19)}, 1e-5},
      {"mul/sub/add/scale",
       [](Tape<double>&, std::span<const Var<double>> in) {
         return scale(add(mul(in[0], in[1]), sub(in[0], in[1])), 0.7);
       },
       {random_tensor({7}, 20), random_tensor({7}, 21)}, 1e-5},
      {"mse/mean", [](Tape<double>&, std::span<const Var<double>> in) { return add(mse(in[0], in[1]), mean(in[0])); },
       {random_tensor({7}, 22), random_tensor({7}, 23)}, 1e-5},
      {"reshape", [](Tape<double>&, std::span<const Var<double>> in) { return reshape(in[0], {6, 2}); },
       {random_tensor({3, 4}, 24)}, 1e-5},
      {"embedding",
       [](Tape<double>&, std::span<const Var<double>> in) {
         std::vector<std::int32_t> idx = {2, 0, 2, 1};
         return embedding(in[0], idx, {2, 2});
       },
       {random_tensor({3, 4}, 25)}, 1e-5},
  };
  for (const auto& c : cases) {
    auto report = grad_check(c.build, c.inputs);
    INFO(c.name << ": worst " << report.worst_input << "[" << report.worst_index << "] rel "
                << report.max_rel_error);
    CHECK(report.max_rel_error < c.tol);
  }
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  ParamStore<double> p;
  p.add("w", random_tensor({4}, 1));
  auto before = p.at("w").values;
  AdamState st;
  adam_step(p, {Tensor<double>({4})}, st);
  CHECK(p.at("w").values == before);
  CHECK(st.step == 1);
}

TEST_CASE("adam: first step magnitude equals the learning rate") {
  ParamStore<double> p;
  p.add("w", Tensor<double>({1}, {0.0}));
  AdamState st;
  st.config.lr = 0.1;
  adam_step(p, {Tensor<double>({1}, {1.0})}, st);
  CHECK(p.at("w")[0] == doctest::Approx(-0.1).epsilon(1e-7));
}

TEST_CASE("adam: shape mismatch") {
  ParamStore<double> p;
  p.add("w", Tensor<double>({2}));
  AdamState st;
  CHECK_THROWS_AS(adam_step(p, {Tensor<double>({3})}, st), ContractError);
}

TEST_CASE("adam: quadratic bowl") {
  ParamStore<double> p;
  p.add("w", Tensor<double>({3}, {1.0, -2.0, 0.5}));
  AdamState st;
  st.config.lr = 0.05;
  auto f = [&] {
    double s = 0;
    for (double v : p.at("w").values) s += v * v;
    return s;
  };
  const double f0 = f();
  for (int i = 0; i < 500; ++i) {
    Tape<double> t;
    auto vars = p.bind(t);
    t.backward(sum(mul(vars[0], vars[0])));
    adam_step(p, p.gradients(t, vars), st);
  }
  CHECK(f() < 0.01 * f0);
  CHECK(st.step == 500);
}

TEST_CASE("determinism: identical training steps give identical losses") {
  auto run = [] {
    ParamStore<float> p;
    std::mt19937_64 init(99);
    std::normal_distribution<float> nd(0.f, 0.3f);
    Tensor<float> k({4, 3, 5}), w({4, 2}), b({4}), b2({2});
    for (auto* t : {&k, &w}) for (auto& v : t->values) v = nd(init);
    p.add("k", k);
    p.add("kb", b);
    p.add("w", w);
    p.add("wb", b2);
    Tensor<float> x({2, 3, 16});
    for (auto& v : x.values) v = nd(init);
    AdamState st;
    std::vector<float> losses;
    std::mt19937_64 rng(7);
    for (int step = 0; step < 5; ++step) {
      Tape<float> t;
      auto vars = p.bind(t);
      auto h = dropout(leaky_relu(conv1d(t.constant(x), vars[0], vars[1], 2), 0.2), 0.2, true, rng);
      auto y = affine(transpose12(h), vars[2], vars[3]);
      auto loss = mean(mul(y, y));
      losses.push_back(loss.item());
      t.backward(loss);
      adam_step(p, p.gradients(t, vars), st);
    }
    return losses;
  };
  auto a = run();
  auto b = run();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::memcmp(&a[i], &b[i], sizeof(float)) == 0);
}
