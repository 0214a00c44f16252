// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// U-Net LPS denoiser with a vector-quantized symbolic encoder bridged in
// through multi-head attention, plus the unet, unet-mol and oracle variants.
// Convolution tensors are [B,C,T]; sequence tensors are [B,T,F].

#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "symse/attention.hpp"
#include "symse/optim.hpp"
#include "symse/tensor.hpp"
#include "symse/vq.hpp"

namespace symse::model {

enum class Variant { kUnet, kUnetMol, kProposed, kOracle };

std::string variant_name(Variant v);
Variant parse_variant(const std::string& s);

inline constexpr std::size_t kPhonemeClasses = 40;  // 39 folded classes + other

struct ModelConfig {
  Variant variant = Variant::kProposed;
  std::size_t segment_frames = 64;
  std::size_t lps_bins = 257;
  std::size_t mfcc_dims = 39;

  // Empty lists are filled by resolve(): widths come from the default
  // sequences, decoder channels mirror the encoder.
  std::vector<std::size_t> enc_channels = {64, 128, 256, 256};
  std::vector<std::size_t> enc_widths;
  std::vector<std::size_t> dec_channels;
  std::vector<std::size_t> dec_widths;
  double leaky_slope = 0.2;

  std::size_t symb_layers = 4;
  std::size_t symb_hidden = 256;
  double dropout = 0.2;
  std::size_t book_size = 64;
  std::size_t code_dim = 64;
  std::size_t context_width = 3;
  std::size_t context_channels = 64;

  attn::MhaConfig mha;

  double commitment = 0.2;
  double ema_decay = 0.99;
  double mol_weight = 1.0;

  std::size_t layers() const { return enc_channels.size(); }
  bool uses_symbols() const { return variant == Variant::kProposed || variant == Variant::kOracle; }
  bool quantizes() const { return variant == Variant::kProposed; }
  std::size_t input_channels() const { return lps_bins + (variant == Variant::kUnetMol ? mfcc_dims : 0); }

  // Fills derived lists and validates; throws ContractError naming the field.
  ModelConfig resolved() const;
  vq::BookConfig book_config() const { return {book_size, code_dim, ema_decay, commitment}; }
};

// Every parameter name and shape for a resolved config, in store order.
std::vector<std::pair<std::string, ad::Shape>> parameter_layout(const ModelConfig& config);

// Glorot-uniform weights, zero biases, seeded.
template <typename Real>
ad::ParamStore<Real> init_params(const ModelConfig& config, std::uint64_t seed);

// Name -> Var lookup over a bound ParamStore.
template <typename Real>
class Bound {
 public:
  Bound(const ad::ParamStore<Real>& store, std::span<const ad::Var<Real>> vars);
  const ad::Var<Real>& operator[](const std::string& name) const;

 private:
  std::map<std::string, ad::Var<Real>> vars_;
};

template <typename Real>
struct Batch {
  ad::Tensor<Real> noisy_lps;          // [B,257,T]
  ad::Tensor<Real> clean_lps;          // [B,257,T]
  ad::Tensor<Real> mfcc;               // [B,T,39], noisy
  ad::Tensor<Real> clean_mfcc;         // [B,39,T], unet-mol target
  std::vector<std::int32_t> phonemes;  // B*T class ids, oracle only

  std::size_t size() const { return noisy_lps.shape.empty() ? 0 : noisy_lps.shape[0]; }
};

struct ForwardOptions {
  bool training = false;
  std::mt19937_64* rng = nullptr;              // required when training with dropout
  const vq::LinearizeProbe* probe = nullptr;  // finite-difference checks only
};

template <typename Real>
struct SymbolicOutput {
  ad::Var<Real> sequence;    // [B,T,context_channels]
  ad::Var<Real> commitment;  // scalar
  ad::Var<Real> pre_quant;   // [B,T,D], proposed only
  ad::Var<Real> quantized;   // [B,T,D], proposed only
  std::vector<std::int32_t> indices;
};

template <typename Real>
struct EncoderOutput {
  ad::Var<Real> bottleneck;            // d^0
  std::vector<ad::Var<Real>> skips;    // s^1 .. s^L
};

template <typename Real>
struct ForwardResult {
  ad::Var<Real> enhanced;  // [B,257,T]
  ad::Var<Real> mfcc_pred; // [B,39,T], unet-mol only
  SymbolicOutput<Real> symbolic;
};

template <typename Real>
SymbolicOutput<Real> symbolic_encode(ad::Tape<Real>& tape, const Bound<Real>& p, const vq::SymbolicBook* book,
                                     const ModelConfig& config, const Batch<Real>& batch,
                                     const ForwardOptions& options);

// input [B,Cin,T] -> bottleneck and per-layer skips.
template <typename Real>
EncoderOutput<Real> unet_encode(const Bound<Real>& p, const ModelConfig& config, const ad::Var<Real>& input);

// d^(l) = LeakyReLU(Deconv(Concat(skip, MHA(d^(l-1), symbols)))), l in 1..L.
// symbols == nullptr drops the attention branch (unet baselines).
template <typename Real>
ad::Var<Real> decode_layer(const Bound<Real>& p, const ModelConfig& config, std::size_t l, const ad::Var<Real>& prev,
                           const ad::Var<Real>& skip, const ad::Var<Real>* symbols);

template <typename Real>
ForwardResult<Real> forward(ad::Tape<Real>& tape, const Bound<Real>& p, const vq::SymbolicBook* book,
                            const ModelConfig& config, const Batch<Real>& batch, const ForwardOptions& options = {});

template <typename Real>
struct Losses {
  ad::Var<Real> total;
  ad::Var<Real> mse;
  ad::Var<Real> commitment;
  ad::Var<Real> aux;  // invalid unless unet-mol
};

// mse(enhanced, clean) + lambda * commitment (+ mol_weight * mse(mfcc_pred, clean_mfcc)).
template <typename Real>
Losses<Real> total_loss(ad::Tape<Real>& tape, const ForwardResult<Real>& out, const Batch<Real>& batch,
                        const ModelConfig& config);

}  // namespace symse::model
