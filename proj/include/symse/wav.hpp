// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <filesystem>
#include <vector>

namespace symse::dsp {

struct Waveform {
  std::vector<double> samples;  // nominally in [-1, 1]
  int sample_rate = 16000;
};

// RIFF/WAVE, PCM signed 16-bit little-endian, mono. Anything else is a DataError.
Waveform read_wav(const std::filesystem::path& path);

// Samples are clipped to [-1, 1] and rounded to 16-bit.
void write_wav(const std::filesystem::path& path, const Waveform& wave);

}  // namespace symse::dsp
