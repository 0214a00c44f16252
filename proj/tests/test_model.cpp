// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

#include "doctest.h"
#include "symse/errors.hpp"
#include "symse/gradcheck.hpp"
#include "symse/model.hpp"
#include "symse/ops.hpp"

using namespace symse;
using namespace symse::model;
using ad::Shape;
using ad::Tape;
using ad::Tensor;
using ad::Var;

namespace {

ModelConfig mini(Variant v) {
  ModelConfig c;
  c.variant = v;
  c.segment_frames = 8;
  c.enc_channels = {8, 8};
  c.symb_hidden = 8;
  c.book_size = 4;
  c.code_dim = 4;
  c.context_channels = 4;
  c.mha = {2, 8, 8, true};
  return c.resolved();
}

Tensor<double> randn(Shape s, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Tensor<double> t(std::move(s));
  for (auto& v : t.values) v = nd(rng);
  return t;
}

Batch<double> random_batch(const ModelConfig& c, std::size_t B, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Batch<double> b;
  b.noisy_lps = randn({B, c.lps_bins, c.segment_frames}, rng);
  b.clean_lps = randn({B, c.lps_bins, c.segment_frames}, rng);
  b.mfcc = randn({B, c.segment_frames, c.mfcc_dims}, rng);
  b.clean_mfcc = randn({B, c.mfcc_dims, c.segment_frames}, rng);
  std::uniform_int_distribution<int> u(0, 39);
  for (std::size_t i = 0; i < B * c.segment_frames; ++i) b.phonemes.push_back(u(rng));
  return b;
}

vq::SymbolicBook random_book(const ModelConfig& c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  auto book = vq::make_uniform_book(c.book_config(), seed);
  for (auto& v : book.prototypes) v = nd(rng);
  return book;
}

std::vector<double> run(const ModelConfig& c, const ad::ParamStore<double>& params, const vq::SymbolicBook* book,
                        const Batch<double>& batch) {
  Tape<double> tape;
  auto vars = params.bind(tape);
  Bound<double> p(params, vars);
  return forward(tape, p, book, c, batch).enhanced.tensor().values;
}

const Variant kAll[] = {Variant::kUnet, Variant::kUnetMol, Variant::kProposed, Variant::kOracle};

}  // namespace

TEST_CASE("config: defaults, derived lists, validation") {
  auto c = ModelConfig{}.resolved();
  CHECK(c.enc_widths == std::vector<std::size_t>{7, 7, 5, 5});
  CHECK(c.dec_widths == std::vector<std::size_t>{5, 7, 9, 11});
  CHECK(c.dec_channels == std::vector<std::size_t>{256, 128, 64, 64});
  ModelConfig bad;
  bad.segment_frames = 60;
  CHECK_THROWS_AS(bad.resolved(), ContractError);
  ModelConfig bad2;
  bad2.dec_widths = {3};
  CHECK_THROWS_AS(bad2.resolved(), ContractError);
  for (auto v : kAll) CHECK(parse_variant(variant_name(v)) == v);
  CHECK_THROWS_AS(parse_variant("lstm"), ContractError);
}

TEST_CASE("forward: shape law for every variant at full size") {
  for (auto v : kAll) {
    ModelConfig c;
    c.variant = v;
    c = c.resolved();
    auto params = init_params<double>(c, 1);
    auto book = random_book(c, 2);
    auto batch = random_batch(c, 1, 3);
    Tape<double> tape;
    auto vars = params.bind(tape);
    Bound<double> p(params, vars);
    auto out = forward(tape, p, &book, c, batch);
    CHECK(out.enhanced.shape() == (Shape{1, 257, 64}));
    if (v == Variant::kUnetMol) CHECK(out.mfcc_pred.shape() == (Shape{1, 39, 64}));
    if (c.uses_symbols()) CHECK(out.symbolic.sequence.shape() == (Shape{1, 64, 64}));
  }
}

TEST_CASE("unet_encode: stride arithmetic and zero propagation") {
  ModelConfig c = ModelConfig{}.resolved();
  c.variant = Variant::kUnet;
  auto params = init_params<double>(c, 4);
  Tape<double> tape;
  auto vars = params.bind(tape);
  Bound<double> p(params, vars);
  auto enc = unet_encode(p, c, tape.constant(Tensor<double>({1, 257, 64})));
  REQUIRE(enc.skips.size() == 4);
  const std::size_t lengths[] = {32, 16, 8, 4};
  for (std::size_t i = 0; i < 4; ++i) CHECK(enc.skips[i].shape()[2] == lengths[i]);
  CHECK(enc.bottleneck.shape() == (Shape{1, 256, 4}));
  for (double v : enc.bottleneck.value()) CHECK(v == 0.0);
  CHECK_THROWS_AS(unet_encode(p, c, tape.constant(Tensor<double>({1, 200, 64}))), ContractError);
}

TEST_CASE("symbolic encoder: shape, inference determinism, codebook membership") {
  ModelConfig c;
  c = c.resolved();
  auto params = init_params<double>(c, 5);
  auto book = random_book(c, 6);
  auto batch = random_batch(c, 2, 7);
  std::vector<double> first;
  for (int rep = 0; rep < 2; ++rep) {
    Tape<double> tape;
    auto vars = params.bind(tape);
    Bound<double> p(params, vars);
    auto s = symbolic_encode(tape, p, &book, c, batch, {});
    CHECK(s.sequence.shape() == (Shape{2, 64, 64}));
    auto q = s.quantized.value();
    for (std::size_t r = 0; r < s.indices.size(); ++r) {
      auto e = book.row(static_cast<std::size_t>(s.indices[r]));
      CHECK(std::memcmp(q.data() + r * 64, e.data(), 64 * sizeof(double)) == 0);
    }
    auto vals = s.sequence.tensor().values;
    if (rep == 0) first = vals;
    else CHECK(std::memcmp(first.data(), vals.data(), vals.size() * sizeof(double)) == 0);
  }
  auto wrong = vq::make_uniform_book({4, 8, 0.99, 0.2}, 1);
  Tape<double> tape;
  auto vars = params.bind(tape);
  Bound<double> p(params, vars);
  CHECK_THROWS_AS(symbolic_encode(tape, p, &wrong, c, batch, {}), ContractError);
}

TEST_CASE("forward: path absence, path presence, bitwise inference") {
  auto cu = mini(Variant::kUnet);
  auto pu = init_params<double>(cu, 8);
  auto batch = random_batch(cu, 2, 9);
  auto base = run(cu, pu, nullptr, batch);
  auto perturbed = batch;
  for (auto& v : perturbed.mfcc.values) v += 3.0;
  CHECK(run(cu, pu, nullptr, perturbed) == base);

  auto cp = mini(Variant::kProposed);
  auto pp = init_params<double>(cp, 10);
  auto book = random_book(cp, 11);
  auto a = run(cp, pp, &book, batch);
  auto b = run(cp, pp, &book, batch);
  CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
  // Reordering rows cannot change any nearest vector.
  auto rows = book;
  for (std::size_t i = 0; i < cp.code_dim; ++i) std::swap(rows.prototypes[i], rows.prototypes[cp.code_dim + i]);
  CHECK(run(cp, pp, &rows, batch) == a);
  // Permuting coordinates inside each prototype does.
  auto coords = book;
  for (std::size_t j = 0; j < cp.book_size; ++j)
    std::rotate(coords.prototypes.begin() + static_cast<std::ptrdiff_t>(j * cp.code_dim),
                coords.prototypes.begin() + static_cast<std::ptrdiff_t>(j * cp.code_dim + 1),
                coords.prototypes.begin() + static_cast<std::ptrdiff_t>((j + 1) * cp.code_dim));
  auto c = run(cp, pp, &coords, batch);
  double diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::abs(a[i] - c[i]));
  CHECK(diff > 1e-6);
}

TEST_CASE("forward: oracle needs labels") {
  auto c = mini(Variant::kOracle);
  auto params = init_params<double>(c, 12);
  auto batch = random_batch(c, 2, 13);
  batch.phonemes.clear();
  CHECK_THROWS_AS(run(c, params, nullptr, batch), ContractError);
}

TEST_CASE("decode_layer: stride law, constant symbols, length mismatch") {
  auto c = mini(Variant::kProposed);
  auto params = init_params<double>(c, 14);
  std::mt19937_64 rng(15);
  Tape<double> tape;
  auto vars = params.bind(tape);
  Bound<double> p(params, vars);
  auto prev = tape.constant(randn({1, 8, 2}, rng));
  auto skip = tape.constant(randn({1, 8, 2}, rng));
  Tensor<double> rep({1, 8, 4});
  for (std::size_t t = 0; t < 8; ++t)
    for (std::size_t d = 0; d < 4; ++d) rep.values[t * 4 + d] = 0.5 * static_cast<double>(d);
  auto sym = tape.constant(rep);
  auto out = decode_layer(p, c, 1, prev, skip, &sym);
  CHECK(out.shape() == (Shape{1, 8, 4}));
  auto longer = tape.constant(randn({1, 8, 4}, rng));
  CHECK_THROWS_AS(decode_layer(p, c, 1, prev, longer, &sym), ContractError);
}

TEST_CASE("decode_layer: gradients pass finite differences") {
  auto c = mini(Variant::kProposed);
  auto params = init_params<double>(c, 16);
  std::mt19937_64 rng(17);
  std::vector<Tensor<double>> inputs = {randn({2, 8, 2}, rng), randn({2, 8, 2}, rng), randn({2, 8, 4}, rng)};
  std::vector<std::string> names = {"prev", "skip", "symbols"};
  const std::vector<std::string> layer = {"dec1.mha.wq", "dec1.mha.bq", "dec1.mha.wk", "dec1.mha.bk",
                                          "dec1.mha.wv", "dec1.mha.bv", "dec1.w",      "dec1.b"};
  for (const auto& n : layer) {
    auto t = params.at(n);
    for (auto& v : t.values) v += 0.05 * std::normal_distribution<double>()(rng);
    inputs.push_back(t);
    names.push_back(n);
  }
  auto rep = ad::grad_check(
      [&](Tape<double>& tape, std::span<const Var<double>> in) {
        ad::ParamStore<double> sub;
        std::vector<Var<double>> vars;
        for (std::size_t i = 3; i < in.size(); ++i) {
          sub.add(names[i], Tensor<double>(in[i].shape()));
          vars.push_back(in[i]);
        }
        (void)tape;
        Bound<double> p(sub, vars);
        return decode_layer(p, c, 1, in[0], in[1], &in[2]);
      },
      inputs, names);
  CHECK(rep.max_rel_error < 1e-5);
}

TEST_CASE("total_loss: definition pins") {
  auto c = mini(Variant::kUnet);
  Batch<double> batch;
  batch.clean_lps = Tensor<double>({1, 2, 2}, {1, 2, 3, 4});
  Tape<double> tape;
  ForwardResult<double> same;
  same.enhanced = tape.constant(batch.clean_lps);
  CHECK(total_loss(tape, same, batch, c).total.item() == 0.0);
  ForwardResult<double> off;
  off.enhanced = tape.constant(Tensor<double>({1, 2, 2}, {2, 3, 4, 5}));
  CHECK(total_loss(tape, off, batch, c).total.item() == 1.0);

  auto cp = mini(Variant::kProposed);
  Tape<double> t2;
  ForwardResult<double> fr;
  fr.enhanced = t2.parameter(Tensor<double>({1, 2, 2}, {1, 2, 3, 4}));
  fr.symbolic.commitment = t2.parameter(Tensor<double>::scalar(0.7));
  auto l = total_loss(t2, fr, batch, cp);
  CHECK(l.total.item() == doctest::Approx(0.2 * 0.7));
  t2.backward(l.total);
  CHECK(t2.grad(fr.symbolic.commitment).values[0] == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("reachability: every parameter gets a gradient, dropout off") {
  for (auto v : kAll) {
    auto c = mini(v);
    auto params = init_params<double>(c, 18);
    auto book = random_book(c, 19);
    auto batch = random_batch(c, 2, 20);
    Tape<double> tape;
    auto vars = params.bind(tape);
    Bound<double> p(params, vars);
    auto out = forward(tape, p, &book, c, batch);
    auto loss = total_loss(tape, out, batch, c);
    tape.backward(loss.total);
    auto grads = params.gradients(tape, vars);
    for (std::size_t i = 0; i < grads.size(); ++i) {
      double norm = 0;
      for (double g : grads[i].values) norm += g * g;
      INFO(variant_name(v), " ", params.entries()[i].name);
      CHECK(norm > 0.0);
    }
  }
}

TEST_CASE("straight-through inside the model is exact") {
  auto c = mini(Variant::kProposed);
  auto params = init_params<double>(c, 21);
  auto book = random_book(c, 22);
  auto batch = random_batch(c, 3, 23);
  Tape<double> tape;
  auto vars = params.bind(tape);
  Bound<double> p(params, vars);
  auto out = forward(tape, p, &book, c, batch);
  tape.backward(total_loss(tape, out, batch, c).mse);
  auto a = tape.grad(out.symbolic.pre_quant), b = tape.grad(out.symbolic.quantized);
  CHECK(std::memcmp(a.values.data(), b.values.data(), a.size() * sizeof(double)) == 0);
  double norm = 0;
  for (double g : a.values) norm += g * g;
  CHECK(norm > 0.0);
}

TEST_CASE("full miniature model passes finite differences (linearized quantizer)") {
  for (auto v : kAll) {
    auto c = mini(v);
    auto params = init_params<double>(c, 24);
    auto book = random_book(c, 25);
    auto batch = random_batch(c, 2, 26);

    vq::LinearizeProbe probe;
    if (c.quantizes()) {
      Tape<double> tape;
      auto vars = params.bind(tape);
      Bound<double> p(params, vars);
      auto out = forward(tape, p, &book, c, batch);
      probe = vq::make_probe<double>(out.symbolic.pre_quant.value(), out.symbolic.indices, book);
    }
    std::vector<Tensor<double>> inputs;
    std::vector<std::string> names;
    for (const auto& e : params.entries()) {
      inputs.push_back(e.tensor);
      names.push_back(e.name);
    }
    ForwardOptions opts;
    opts.probe = c.quantizes() ? &probe : nullptr;
    ad::GradCheckOptions gopts;
    gopts.max_entries_per_input = 24;
    auto rep = ad::grad_check(
        [&](Tape<double>& tape, std::span<const Var<double>> in) {
          Bound<double> p(params, in);
          auto out = forward(tape, p, &book, c, batch, opts);
          return total_loss(tape, out, batch, c).total;
        },
        inputs, names, gopts);
    INFO(variant_name(v), " worst ", rep.worst_input, "[", rep.worst_index, "]");
    CHECK(rep.max_rel_error < 1e-4);
  }
}
