// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "symse/enhance.hpp"

#include <memory>

#include "symse/errors.hpp"

namespace symse::pipeline {

namespace {

// Segment s of the frame classes, padded with other.
std::vector<std::int32_t> segment_classes(const std::vector<std::int32_t>& classes, std::size_t s, std::size_t T) {
  std::vector<std::int32_t> out(T, labels::kOtherClass);
  for (std::size_t t = 0; t < T && s * T + t < classes.size(); ++t) out[t] = classes[s * T + t];
  return out;
}

struct Frozen {
  config::RunConfig config;
  ad::ParamStore<float> params;
  std::optional<vq::SymbolicBook> book;
};

model::Batch<float> single_batch(const model::ModelConfig& mc, const std::vector<double>& lps,
                                 const std::vector<double>& mfcc, const std::vector<std::int32_t>& classes) {
  const std::size_t T = mc.segment_frames, F = mc.lps_bins, M = mc.mfcc_dims;
  SYMSE_REQUIRE(lps.size() == T * F && mfcc.size() == T * M && classes.size() == T,
                "model mapper: segment sizes do not match the model config");
  model::Batch<float> b;
  b.noisy_lps = ad::Tensor<float>({1, F, T});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t f = 0; f < F; ++f) b.noisy_lps.values[f * T + t] = static_cast<float>(lps[t * F + f]);
  b.clean_lps = ad::Tensor<float>({1, F, T});
  b.mfcc = ad::Tensor<float>({1, T, M}, std::vector<float>(mfcc.begin(), mfcc.end()));
  b.clean_mfcc = ad::Tensor<float>({1, M, T});
  b.phonemes = classes;
  return b;
}

}  // namespace

dsp::Waveform enhance_with(const dsp::Waveform& noisy, const FeatureConfig& features, const SegmentMapper& map,
                           const std::vector<std::int32_t>& frame_classes) {
  SYMSE_REQUIRE(noisy.sample_rate == dsp::kSampleRate,
                "enhance: expected 16000 Hz input, got " + std::to_string(noisy.sample_rate));
  SYMSE_REQUIRE(!noisy.samples.empty(), "enhance: empty input");
  const std::size_t T = features.segment_frames, F = dsp::kBins;
  auto nf = noisy_features(noisy, features);
  const std::size_t frames = nf.lps.lps.frames;
  SYMSE_REQUIRE(frame_classes.empty() || frame_classes.size() == frames,
                "enhance: " + std::to_string(frame_classes.size()) + " frame labels for " + std::to_string(frames) +
                    " frames");

  dsp::FeatureMatrix out(frames, F);
  for (std::size_t s = 0; s < nf.lps_segments.segments.size(); ++s) {
    const auto& seg = nf.lps_segments.segments[s];
    auto mapped = map(seg.features.values, nf.mfcc_segments.segments[s].features.values,
                      segment_classes(frame_classes, s, T));
    SYMSE_REQUIRE(mapped.size() == T * F, "enhance: mapper returned " + std::to_string(mapped.size()) + " values");
    dsp::FeatureMatrix m(T, F);
    m.values = std::move(mapped);
    auto denorm = dsp::denormalize(m, nf.lps_segments.stats[s]);
    for (std::size_t t = 0; t < seg.valid_frames; ++t)
      for (std::size_t f = 0; f < F; ++f) out.at(s * T + t, f) = denorm.at(t, f);
  }
  auto spec = dsp::spectrogram_from_lps(out, nf.lps.phase, noisy.samples.size());
  auto wave = dsp::istft_overlap_add(spec);
  wave.samples.resize(noisy.samples.size(), 0.0);
  wave.sample_rate = noisy.sample_rate;
  return wave;
}

SegmentMapper model_mapper(const Checkpoint& checkpoint) {
  auto frozen = std::make_shared<Frozen>();
  frozen->config = checkpoint.config;
  frozen->config.model = frozen->config.model.resolved();
  frozen->params = checkpoint.params;
  frozen->book = checkpoint.book;
  if (frozen->config.model.quantizes() && !frozen->book)
    throw DataError("checkpoint has no symbolic book but the variant quantizes");
  return [frozen](const std::vector<double>& lps, const std::vector<double>& mfcc,
                  const std::vector<std::int32_t>& classes) {
    const auto& mc = frozen->config.model;
    auto batch = single_batch(mc, lps, mfcc, classes);
    ad::Tape<float> tape;
    std::vector<ad::Var<float>> vars;
    for (const auto& e : frozen->params.entries()) vars.push_back(tape.constant(e.tensor));
    model::Bound<float> p(frozen->params, vars);
    auto out = model::forward(tape, p, frozen->book ? &*frozen->book : nullptr, mc, batch, {});
    const std::size_t T = mc.segment_frames, F = mc.lps_bins;
    auto v = out.enhanced.value();
    std::vector<double> res(T * F);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t f = 0; f < F; ++f) res[t * F + f] = v[f * T + t];
    return res;
  };
}

dsp::Waveform enhance_utterance(const dsp::Waveform& noisy, const Checkpoint& checkpoint,
                                const std::vector<std::int32_t>& frame_classes) {
  const auto& mc = checkpoint.config.model;
  if (mc.variant == model::Variant::kOracle && frame_classes.empty())
    throw ContractError("enhance: the oracle variant requires phoneme labels");
  FeatureConfig features = checkpoint.config.features;
  features.segment_frames = mc.segment_frames;
  return enhance_with(noisy, features, model_mapper(checkpoint), frame_classes);
}

std::vector<std::int32_t> token_sequence(const dsp::Waveform& noisy, const Checkpoint& checkpoint) {
  auto mc = checkpoint.config.model.resolved();
  SYMSE_REQUIRE(mc.quantizes(), "token_sequence: the " + model::variant_name(mc.variant) + " variant has no symbols");
  if (!checkpoint.book) throw DataError("checkpoint has no symbolic book");
  SYMSE_REQUIRE(noisy.sample_rate == dsp::kSampleRate, "token_sequence: expected 16000 Hz input");
  FeatureConfig features = checkpoint.config.features;
  features.segment_frames = mc.segment_frames;
  auto nf = noisy_features(noisy, features);
  const std::size_t T = mc.segment_frames;
  std::vector<std::int32_t> tokens;
  for (std::size_t s = 0; s < nf.lps_segments.segments.size(); ++s) {
    auto batch = single_batch(mc, nf.lps_segments.segments[s].features.values,
                              nf.mfcc_segments.segments[s].features.values,
                              std::vector<std::int32_t>(T, labels::kOtherClass));
    ad::Tape<float> tape;
    std::vector<ad::Var<float>> vars;
    for (const auto& e : checkpoint.params.entries()) vars.push_back(tape.constant(e.tensor));
    model::Bound<float> p(checkpoint.params, vars);
    auto sym = model::symbolic_encode(tape, p, &*checkpoint.book, mc, batch, {});
    const std::size_t valid = nf.lps_segments.segments[s].valid_frames;
    tokens.insert(tokens.end(), sym.indices.begin(), sym.indices.begin() + static_cast<std::ptrdiff_t>(valid));
  }
  return tokens;
}

}  // namespace symse::pipeline
