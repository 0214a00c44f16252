// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Full-utterance enhancement: features, per-segment mapping, noisy-phase resynthesis.

#pragma once

#include <functional>

#include "symse/checkpoint.hpp"
#include "symse/dataset.hpp"

namespace symse::pipeline {

// Maps one z-scored noisy segment to an enhanced z-scored LPS segment.
// lps and the result are T x 257 row-major; mfcc is T x 39; classes has T
// entries (other when unlabeled).
using SegmentMapper = std::function<std::vector<double>(const std::vector<double>& lps, const std::vector<double>& mfcc,
                                                        const std::vector<std::int32_t>& classes)>;

// stft -> LPS/MFCC -> segment and normalize -> map -> denormalize ->
// sqrt(exp(lps)) magnitudes with the noisy phase -> overlap-add. The output
// has the input's length and sample rate.
dsp::Waveform enhance_with(const dsp::Waveform& noisy, const FeatureConfig& features, const SegmentMapper& map,
                           const std::vector<std::int32_t>& frame_classes = {});

// Inference-mode model forward per segment. The oracle variant requires frame classes.
SegmentMapper model_mapper(const Checkpoint& checkpoint);

dsp::Waveform enhance_utterance(const dsp::Waveform& noisy, const Checkpoint& checkpoint,
                                const std::vector<std::int32_t>& frame_classes = {});

// Symbol indices per frame for the proposed variant (interpretation).
std::vector<std::int32_t> token_sequence(const dsp::Waveform& noisy, const Checkpoint& checkpoint);

}  // namespace symse::pipeline
