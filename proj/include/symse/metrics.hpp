// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Objective scores: short-time objective intelligibility and segmental SNR.

#pragma once

#include <span>
#include <vector>

#include "symse/wav.hpp"

namespace symse::metrics {

struct StoiConfig {
  int sample_rate = 10000;
  std::size_t bands = 15;
  double min_freq = 150.0;
  std::size_t frame = 256;
  std::size_t fft = 512;
  std::size_t segment = 30;
  double beta_db = -15.0;
  double dyn_range_db = 40.0;
};

// Polyphase rational resampler with a Kaiser-windowed sinc anti-alias filter.
// Output length is ceil(n * up / down).
std::vector<double> resample_poly(std::span<const double> x, int up, int down);

// Silent frames are found on `clean` and removed from both signals.
// Throws DataError when fewer than `segment` frames of speech remain.
double stoi(const dsp::Waveform& clean, const dsp::Waveform& degraded, const StoiConfig& config = {});

struct SsnrConfig {
  std::size_t frame = 512;
  double floor_db = -10.0;
  double ceil_db = 35.0;
  double silence_db = 40.0;  // frames this far below the loudest clean frame are skipped
};

double segmental_snr(const dsp::Waveform& clean, const dsp::Waveform& enhanced, const SsnrConfig& config = {});

}  // namespace symse::metrics
