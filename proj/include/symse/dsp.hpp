// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Analysis/synthesis front end: 512-point STFT with a 32 ms periodic Hamming
// window and 16 ms hop at 16 kHz, log-power spectra, MFCC(+deltas), SNR
// mixing and 64-frame segmentation with z-score normalization.

#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "symse/wav.hpp"

namespace symse::dsp {

inline constexpr int kSampleRate = 16000;
inline constexpr std::size_t kFftSize = 512;
inline constexpr std::size_t kHop = 256;
inline constexpr std::size_t kBins = kFftSize / 2 + 1;
inline constexpr double kPowerFloor = 1e-10;
inline constexpr std::size_t kNumCeps = 13;
inline constexpr std::size_t kNumMel = 40;
inline constexpr std::size_t kMfccDims = 3 * kNumCeps;
inline constexpr double kPreEmphasis = 0.97;
inline constexpr double kStdFloor = 1e-8;

// Row-major frames x dims.
struct FeatureMatrix {
  std::size_t frames = 0;
  std::size_t dims = 0;
  std::vector<double> values;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t t, std::size_t d) : frames(t), dims(d), values(t * d, 0.0) {}
  double& at(std::size_t t, std::size_t d) { return values[t * dims + d]; }
  double at(std::size_t t, std::size_t d) const { return values[t * dims + d]; }
};

struct ComplexSpectrogram {
  std::size_t frames = 0;
  std::vector<std::complex<double>> bins;  // frames x kBins
  std::size_t num_samples = 0;             // source length, for trimming at synthesis

  std::complex<double>& at(std::size_t t, std::size_t k) { return bins[t * kBins + k]; }
  std::complex<double> at(std::size_t t, std::size_t k) const { return bins[t * kBins + k]; }
};

struct LpsMatrix {
  FeatureMatrix lps;          // frames x 257, ln(|X|^2 + floor)
  std::vector<double> phase;  // frames x 257, arg X
  std::size_t num_samples = 0;
};

struct NormStats {
  std::vector<double> mean;
  std::vector<double> std;  // every entry >= kStdFloor
};

// Number of frames for n samples: the tail is zero-padded to a full frame.
std::size_t frame_count(std::size_t num_samples);

// Periodic Hamming window of kFftSize samples.
const std::vector<double>& analysis_window();

ComplexSpectrogram stft(const Waveform& w);
// Weighted overlap-add with the analysis window, normalized by the summed
// squared window. Output is trimmed to spec.num_samples when set.
Waveform istft_overlap_add(const ComplexSpectrogram& spec);

LpsMatrix lps(const ComplexSpectrogram& spec);
// Inverse of lps(): magnitude sqrt(exp(lps) - floor) with the stored phase.
ComplexSpectrogram spectrogram_from_lps(const FeatureMatrix& lps, std::span<const double> phase,
                                        std::size_t num_samples);

// 40 triangular mel filters over 0..8000 Hz, as kNumMel rows of kBins weights.
const std::vector<std::vector<double>>& mel_filterbank();
// Orthonormal DCT-II of x, first `keep` coefficients.
std::vector<double> dct2_orthonormal(std::span<const double> x, std::size_t keep);
// Appends first and second order regression deltas (+/-2 frames, edge
// replication) to a frames x d matrix, returning frames x 3d.
FeatureMatrix append_deltas(const FeatureMatrix& base);
// 13 MFCC + deltas + delta-deltas per frame on the STFT frame grid.
FeatureMatrix mfcc(const Waveform& w);

struct MixResult {
  Waveform noisy;
  double noise_gain = 1.0;
  std::size_t noise_offset = 0;
};

// clean + g * noise_crop with g chosen so that the full-signal mean powers give
// exactly snr_db. The noise is cropped at a seeded random offset, wrapping.
MixResult mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db, std::uint64_t seed);

double mean_power(std::span<const double> x);
double snr_db(std::span<const double> clean, std::span<const double> noise);

// One fixed-length window of a feature matrix. Frames past valid_frames are zero.
struct Segment {
  FeatureMatrix features;  // length x dims
  std::size_t valid_frames = 0;
};

enum class NormScope { kSegment, kUtterance };

// Non-overlapping windows of `length` frames; the last one zero-padded.
std::vector<Segment> segment(const FeatureMatrix& features, std::size_t length = 64);

// Per-dimension mean/std over the first valid_frames rows.
NormStats compute_stats(const FeatureMatrix& m, std::size_t valid_frames);
// (x - mean) / std on the first valid_frames rows; padded rows stay zero.
FeatureMatrix normalize(const FeatureMatrix& m, const NormStats& stats, std::size_t valid_frames);
FeatureMatrix denormalize(const FeatureMatrix& m, const NormStats& stats);

struct NormalizedSegments {
  std::vector<Segment> segments;  // z-scored
  std::vector<NormStats> stats;   // one per segment
};

// segment() followed by normalize() with statistics from each segment
// (kSegment) or from the whole utterance (kUtterance). A partial last segment
// takes its kSegment statistics from the utterance's last `length` frames.
NormalizedSegments segment_normalized(const FeatureMatrix& features, std::size_t length, NormScope scope);

}  // namespace symse::dsp
