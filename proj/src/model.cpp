// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "symse/model.hpp"

#include <cmath>

#include "symse/errors.hpp"
#include "symse/ops.hpp"

namespace symse::model {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kUnet:
      return "unet";
    case Variant::kUnetMol:
      return "unet-mol";
    case Variant::kProposed:
      return "proposed";
    case Variant::kOracle:
      return "oracle";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  if (s == "unet") return Variant::kUnet;
  if (s == "unet-mol") return Variant::kUnetMol;
  if (s == "proposed") return Variant::kProposed;
  if (s == "oracle") return Variant::kOracle;
  throw ContractError("model.variant: unknown variant '" + s + "' (expected unet, unet-mol, proposed, oracle)");
}

namespace {

std::vector<std::size_t> take(const std::vector<std::size_t>& seq, std::size_t n) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(i < seq.size() ? seq[i] : seq.back() + 2 * (i - seq.size() + 1));
  return out;
}

void require_positive(const std::vector<std::size_t>& v, const std::string& name) {
  for (auto x : v) SYMSE_REQUIRE(x > 0, name + ": entries must be positive");
}

std::string idx(const std::string& prefix, std::size_t i, const std::string& suffix) {
  return prefix + std::to_string(i) + suffix;
}

}  // namespace

ModelConfig ModelConfig::resolved() const {
  ModelConfig c = *this;
  const std::size_t L = c.layers();
  SYMSE_REQUIRE(L >= 1, "model.enc_channels: at least one encoder layer is required");
  require_positive(c.enc_channels, "model.enc_channels");
  if (c.enc_widths.empty()) c.enc_widths = take({7, 7, 5, 5}, L);
  if (c.dec_widths.empty()) c.dec_widths = take({5, 7, 9, 11}, L);
  if (c.dec_channels.empty()) {
    for (std::size_t l = 0; l + 1 < L; ++l) c.dec_channels.push_back(c.enc_channels[L - 2 - l]);
    c.dec_channels.push_back(c.enc_channels[0]);
  }
  SYMSE_REQUIRE(c.enc_widths.size() == L, "model.enc_widths: expected " + std::to_string(L) + " entries");
  SYMSE_REQUIRE(c.dec_widths.size() == L, "model.dec_widths: expected " + std::to_string(L) + " entries");
  SYMSE_REQUIRE(c.dec_channels.size() == L, "model.dec_channels: expected " + std::to_string(L) + " entries");
  require_positive(c.enc_widths, "model.enc_widths");
  require_positive(c.dec_widths, "model.dec_widths");
  require_positive(c.dec_channels, "model.dec_channels");
  SYMSE_REQUIRE(c.segment_frames >= 1 && c.segment_frames % (std::size_t{1} << L) == 0,
                "model.segment_frames: " + std::to_string(c.segment_frames) + " is not divisible by 2^" +
                    std::to_string(L));
  SYMSE_REQUIRE(c.lps_bins >= 1 && c.mfcc_dims >= 1, "model: feature sizes must be positive");
  SYMSE_REQUIRE(c.leaky_slope > 0.0 && c.leaky_slope < 1.0, "model.leaky_slope: must lie in (0, 1)");
  SYMSE_REQUIRE(c.dropout >= 0.0 && c.dropout < 1.0, "model.dropout: must lie in [0, 1)");
  SYMSE_REQUIRE(c.symb_layers >= 1 && c.symb_hidden >= 1, "model.symb_hidden: must be positive");
  SYMSE_REQUIRE(c.book_size >= 1, "vq.book_size: must be positive");
  SYMSE_REQUIRE(c.code_dim >= 1, "vq.code_dim: must be positive");
  SYMSE_REQUIRE(c.context_width >= 1 && c.context_channels >= 1, "model.context_channels: must be positive");
  SYMSE_REQUIRE(c.commitment >= 0.0, "vq.commitment: must be non-negative");
  SYMSE_REQUIRE(c.ema_decay >= 0.0 && c.ema_decay < 1.0, "vq.decay: must lie in [0, 1)");
  SYMSE_REQUIRE(c.mol_weight >= 0.0, "model.mol_weight: must be non-negative");
  if (c.uses_symbols()) {
    SYMSE_REQUIRE(c.mha.heads >= 1 && c.mha.key_dim % c.mha.heads == 0 && c.mha.value_dim % c.mha.heads == 0,
                  "attention.heads: key and value dims must divide evenly across heads");
    if (c.mha.positional) {
      SYMSE_REQUIRE(c.context_channels % 2 == 0, "model.context_channels: must be even for position codes");
      SYMSE_REQUIRE(c.enc_channels.back() % 2 == 0, "model.enc_channels: bottleneck width must be even");
      for (std::size_t l = 0; l + 1 < L; ++l)
        SYMSE_REQUIRE(c.dec_channels[l] % 2 == 0, "model.dec_channels: widths feeding attention must be even");
    }
  }
  return c;
}

std::vector<std::pair<std::string, ad::Shape>> parameter_layout(const ModelConfig& config) {
  const auto c = config.resolved();
  const std::size_t L = c.layers();
  std::vector<std::pair<std::string, ad::Shape>> out;
  auto add = [&](std::string name, ad::Shape s) { out.emplace_back(std::move(name), std::move(s)); };

  if (c.variant == Variant::kProposed) {
    std::size_t in = c.mfcc_dims;
    for (std::size_t i = 1; i <= c.symb_layers; ++i) {
      add(idx("symb.fc", i, ".w"), {in, c.symb_hidden});
      add(idx("symb.fc", i, ".b"), {c.symb_hidden});
      in = c.symb_hidden;
    }
    add("symb.proj.w", {in, c.code_dim});
    add("symb.proj.b", {c.code_dim});
  }
  if (c.variant == Variant::kOracle) add("symb.embed", {kPhonemeClasses, c.code_dim});
  if (c.uses_symbols()) {
    add("symb.ctx.w", {c.context_channels, c.code_dim, c.context_width});
    add("symb.ctx.b", {c.context_channels});
  }

  std::size_t cin = c.input_channels();
  for (std::size_t l = 1; l <= L; ++l) {
    add(idx("enc", l, ".w"), {c.enc_channels[l - 1], cin, c.enc_widths[l - 1]});
    add(idx("enc", l, ".b"), {c.enc_channels[l - 1]});
    cin = c.enc_channels[l - 1];
  }

  std::size_t q = c.enc_channels[L - 1];
  for (std::size_t l = 1; l <= L; ++l) {
    const std::size_t skip = c.enc_channels[L - l];
    std::size_t din = skip;
    if (c.uses_symbols()) {
      const std::string m = idx("dec", l, ".mha.");
      add(m + "wq", {q, c.mha.key_dim});
      add(m + "bq", {c.mha.key_dim});
      add(m + "wk", {c.context_channels, c.mha.key_dim});
      add(m + "bk", {c.mha.key_dim});
      add(m + "wv", {c.context_channels, c.mha.value_dim});
      add(m + "bv", {c.mha.value_dim});
      din += c.mha.value_dim;
    } else {
      din += q;
    }
    add(idx("dec", l, ".w"), {din, c.dec_channels[l - 1], c.dec_widths[l - 1]});
    add(idx("dec", l, ".b"), {c.dec_channels[l - 1]});
    q = c.dec_channels[l - 1];
  }
  add("out.w", {c.lps_bins, q, 1});
  add("out.b", {c.lps_bins});
  if (c.variant == Variant::kUnetMol) {
    add("mol.w", {c.mfcc_dims, q, 1});
    add("mol.b", {c.mfcc_dims});
  }
  return out;
}

template <typename Real>
ad::ParamStore<Real> init_params(const ModelConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ad::ParamStore<Real> store;
  for (auto& [name, shape] : parameter_layout(config)) {
    ad::Tensor<Real> t(shape);
    const bool is_bias = name.size() >= 2 && (name.ends_with(".b") || name.ends_with(".bq") ||
                                              name.ends_with(".bk") || name.ends_with(".bv"));
    if (!is_bias) {
      double bound = 1.0;
      if (name != "symb.embed") {
        double fan_in = 0, fan_out = 0;
        if (shape.size() == 2) {
          fan_in = static_cast<double>(shape[0]);
          fan_out = static_cast<double>(shape[1]);
        } else if (name.starts_with("dec")) {
          fan_in = static_cast<double>(shape[0] * shape[2]);
          fan_out = static_cast<double>(shape[1] * shape[2]);
        } else {
          fan_in = static_cast<double>(shape[1] * shape[2]);
          fan_out = static_cast<double>(shape[0] * shape[2]);
        }
        bound = std::sqrt(6.0 / (fan_in + fan_out));
      }
      std::uniform_real_distribution<double> u(-bound, bound);
      for (auto& v : t.values) v = static_cast<Real>(u(rng));
    }
    store.add(name, std::move(t));
  }
  return store;
}

template <typename Real>
Bound<Real>::Bound(const ad::ParamStore<Real>& store, std::span<const ad::Var<Real>> vars) {
  SYMSE_REQUIRE(vars.size() == store.size(), "Bound: parameter count mismatch");
  for (std::size_t i = 0; i < vars.size(); ++i) vars_.emplace(store.entries()[i].name, vars[i]);
}

template <typename Real>
const ad::Var<Real>& Bound<Real>::operator[](const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw ContractError("model: missing parameter '" + name + "'");
  return it->second;
}

template <typename Real>
SymbolicOutput<Real> symbolic_encode(ad::Tape<Real>& tape, const Bound<Real>& p, const vq::SymbolicBook* book,
                                     const ModelConfig& c, const Batch<Real>& batch, const ForwardOptions& options) {
  SYMSE_REQUIRE(c.uses_symbols(), "symbolic_encode: variant " + variant_name(c.variant) + " has no symbolic path");
  const std::size_t B = batch.size(), T = c.segment_frames;
  SymbolicOutput<Real> out;
  ad::Var<Real> seq;
  if (c.variant == Variant::kProposed) {
    SYMSE_REQUIRE(book != nullptr, "symbolic_encode: proposed variant needs a symbolic book");
    SYMSE_REQUIRE(book->dim() == c.code_dim, "symbolic_encode: book dim " + std::to_string(book->dim()) +
                                                 " does not match code dim " + std::to_string(c.code_dim));
    SYMSE_REQUIRE(batch.mfcc.shape == (ad::Shape{B, T, c.mfcc_dims}),
                  "symbolic_encode: mfcc input " + ad::to_string(batch.mfcc.shape) + ", expected " +
                      ad::to_string({B, T, c.mfcc_dims}));
    const bool drop = options.training && c.dropout > 0.0;
    SYMSE_REQUIRE(!drop || options.rng != nullptr, "symbolic_encode: training with dropout needs an rng");
    auto x = tape.constant(batch.mfcc);
    for (std::size_t i = 1; i <= c.symb_layers; ++i) {
      x = ad::relu(ad::affine(x, p[idx("symb.fc", i, ".w")], p[idx("symb.fc", i, ".b")]));
      if (drop) x = ad::dropout(x, c.dropout, true, *options.rng);
    }
    out.pre_quant = ad::affine(x, p["symb.proj.w"], p["symb.proj.b"]);
    auto q = vq::quantize(out.pre_quant, *book, options.probe);
    out.quantized = q.values;
    out.indices = std::move(q.indices);
    out.commitment = q.commitment;
    seq = q.values;
  } else {
    SYMSE_REQUIRE(batch.phonemes.size() == B * T, "symbolic_encode: oracle variant needs " + std::to_string(B * T) +
                                                      " phoneme labels, got " +
                                                      std::to_string(batch.phonemes.size()));
    for (auto k : batch.phonemes)
      SYMSE_REQUIRE(k >= 0 && static_cast<std::size_t>(k) < kPhonemeClasses, "symbolic_encode: phoneme id out of range");
    seq = ad::embedding(p["symb.embed"], std::span<const std::int32_t>(batch.phonemes), ad::Shape{B, T});
    out.commitment = tape.constant(ad::Tensor<Real>::scalar(Real(0)));
  }
  out.sequence = ad::transpose12(ad::conv1d(ad::transpose12(seq), p["symb.ctx.w"], p["symb.ctx.b"], 1));
  return out;
}

template <typename Real>
EncoderOutput<Real> unet_encode(const Bound<Real>& p, const ModelConfig& c, const ad::Var<Real>& input) {
  const auto& s = input.shape();
  SYMSE_REQUIRE(s.size() == 3 && s[1] == c.input_channels() && s[2] == c.segment_frames,
                "unet_encode: input " + ad::to_string(s) + ", expected [B," + std::to_string(c.input_channels()) +
                    "," + std::to_string(c.segment_frames) + "]");
  EncoderOutput<Real> out;
  auto x = input;
  for (std::size_t l = 1; l <= c.layers(); ++l) {
    x = ad::leaky_relu(ad::conv1d(x, p[idx("enc", l, ".w")], p[idx("enc", l, ".b")], 2), c.leaky_slope);
    out.skips.push_back(x);
  }
  out.bottleneck = x;
  return out;
}

template <typename Real>
ad::Var<Real> decode_layer(const Bound<Real>& p, const ModelConfig& c, std::size_t l, const ad::Var<Real>& prev,
                           const ad::Var<Real>& skip, const ad::Var<Real>* symbols) {
  SYMSE_REQUIRE(l >= 1 && l <= c.layers(), "decode_layer: layer index out of range");
  SYMSE_REQUIRE(prev.shape().size() == 3 && skip.shape().size() == 3 && prev.shape()[2] == skip.shape()[2],
                "decode_layer: skip " + ad::to_string(skip.shape()) + " and query " + ad::to_string(prev.shape()) +
                    " lengths differ");
  ad::Var<Real> context = prev;
  if (symbols) {
    const std::string m = idx("dec", l, ".mha.");
    attn::MhaWeights<Real> w{p[m + "wq"], p[m + "bq"], p[m + "wk"], p[m + "bk"], p[m + "wv"], p[m + "bv"]};
    context = ad::transpose12(attn::mha(ad::transpose12(prev), *symbols, w, c.mha));
  }
  auto x = ad::concat(std::vector<ad::Var<Real>>{skip, context}, 1);
  return ad::leaky_relu(ad::deconv1d(x, p[idx("dec", l, ".w")], p[idx("dec", l, ".b")], 2), c.leaky_slope);
}

template <typename Real>
ForwardResult<Real> forward(ad::Tape<Real>& tape, const Bound<Real>& p, const vq::SymbolicBook* book,
                            const ModelConfig& c, const Batch<Real>& batch, const ForwardOptions& options) {
  const std::size_t B = batch.size(), T = c.segment_frames, L = c.layers();
  SYMSE_REQUIRE(B >= 1, "forward: empty batch");
  SYMSE_REQUIRE(batch.noisy_lps.shape == (ad::Shape{B, c.lps_bins, T}),
                "forward: noisy input " + ad::to_string(batch.noisy_lps.shape) + ", expected " +
                    ad::to_string({B, c.lps_bins, T}));
  ForwardResult<Real> out;
  auto input = tape.constant(batch.noisy_lps);
  if (c.variant == Variant::kUnetMol) {
    SYMSE_REQUIRE(batch.mfcc.shape == (ad::Shape{B, T, c.mfcc_dims}), "forward: unet-mol needs mfcc [B,T,39]");
    input = ad::concat(std::vector<ad::Var<Real>>{input, ad::transpose12(tape.constant(batch.mfcc))}, 1);
  }
  if (c.uses_symbols()) out.symbolic = symbolic_encode(tape, p, book, c, batch, options);
  auto enc = unet_encode(p, c, input);
  auto d = enc.bottleneck;
  for (std::size_t l = 1; l <= L; ++l)
    d = decode_layer(p, c, l, d, enc.skips[L - l], c.uses_symbols() ? &out.symbolic.sequence : nullptr);
  out.enhanced = ad::conv1d(d, p["out.w"], p["out.b"], 1);
  if (c.variant == Variant::kUnetMol) out.mfcc_pred = ad::conv1d(d, p["mol.w"], p["mol.b"], 1);
  return out;
}

template <typename Real>
Losses<Real> total_loss(ad::Tape<Real>& tape, const ForwardResult<Real>& out, const Batch<Real>& batch,
                        const ModelConfig& c) {
  SYMSE_REQUIRE(out.enhanced.shape() == batch.clean_lps.shape,
                "total_loss: enhanced " + ad::to_string(out.enhanced.shape()) + " vs clean " +
                    ad::to_string(batch.clean_lps.shape));
  Losses<Real> l;
  l.mse = ad::mse(out.enhanced, tape.constant(batch.clean_lps));
  l.commitment = out.symbolic.commitment.valid() ? out.symbolic.commitment
                                                 : tape.constant(ad::Tensor<Real>::scalar(Real(0)));
  l.total = ad::add(l.mse, ad::scale(l.commitment, c.commitment));
  if (c.variant == Variant::kUnetMol) {
    SYMSE_REQUIRE(out.mfcc_pred.valid() && batch.clean_mfcc.shape == out.mfcc_pred.shape(),
                  "total_loss: unet-mol needs a clean mfcc target of shape " +
                      (out.mfcc_pred.valid() ? ad::to_string(out.mfcc_pred.shape()) : std::string("?")));
    l.aux = ad::mse(out.mfcc_pred, tape.constant(batch.clean_mfcc));
    l.total = ad::add(l.total, ad::scale(l.aux, c.mol_weight));
  }
  return l;
}

#define SYMSE_INSTANTIATE_MODEL(Real)                                                                           \
  template ad::ParamStore<Real> init_params<Real>(const ModelConfig&, std::uint64_t);                           \
  template class Bound<Real>;                                                                                   \
  template SymbolicOutput<Real> symbolic_encode(ad::Tape<Real>&, const Bound<Real>&, const vq::SymbolicBook*,    \
                                                const ModelConfig&, const Batch<Real>&, const ForwardOptions&);  \
  template EncoderOutput<Real> unet_encode(const Bound<Real>&, const ModelConfig&, const ad::Var<Real>&);        \
  template ad::Var<Real> decode_layer(const Bound<Real>&, const ModelConfig&, std::size_t, const ad::Var<Real>&, \
                                      const ad::Var<Real>&, const ad::Var<Real>*);                               \
  template ForwardResult<Real> forward(ad::Tape<Real>&, const Bound<Real>&, const vq::SymbolicBook*,             \
                                       const ModelConfig&, const Batch<Real>&, const ForwardOptions&);           \
  template Losses<Real> total_loss(ad::Tape<Real>&, const ForwardResult<Real>&, const Batch<Real>&,              \
                                   const ModelConfig&);

SYMSE_INSTANTIATE_MODEL(float)
SYMSE_INSTANTIATE_MODEL(double)

}  // namespace symse::model
