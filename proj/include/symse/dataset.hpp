// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Manifest parsing, utterance mixing and 64-frame training segments.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "symse/dsp.hpp"
#include "symse/labels.hpp"
#include "symse/model.hpp"

namespace symse::pipeline {

enum class Split { kTrain, kValid, kTest };
std::string split_name(Split s);
Split parse_split(const std::string& s);

struct ManifestEntry {
  Split split = Split::kTrain;
  std::filesystem::path clean;
  std::filesystem::path noise;   // empty: draw from the manifest's noise pool
  std::filesystem::path labels;  // empty: unlabeled
};

// split<TAB>clean.wav<TAB>noise.wav|-<TAB>labels.phn|-. Relative paths are
// resolved against the manifest's directory. Missing files and a clean file
// listed under two splits are data errors.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
// Paths under the manifest directory are written relative to it.
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> select_split(const std::vector<ManifestEntry>& entries, Split split);
// Distinct noise files named anywhere in the manifest, in first-seen order.
std::vector<std::filesystem::path> noise_pool(const std::vector<ManifestEntry>& entries);

struct MixConfig {
  std::vector<double> snr_levels = {20, 15, 10, 5, 0, -5};
  bool exhaustive = false;  // every utterance at every level instead of one sampled level
};

struct FeatureConfig {
  std::size_t segment_frames = 64;
  dsp::NormScope scope = dsp::NormScope::kSegment;
  bool norm_mfcc = true;
};

using Warn = std::function<void(const std::string&)>;

struct MixedUtterance {
  std::string id;
  std::filesystem::path clean_path;
  std::filesystem::path noise_path;
  std::filesystem::path labels_path;
  double snr_db = 0.0;
  dsp::Waveform clean;
  dsp::Waveform noisy;
  std::size_t noise_offset = 0;
  double noise_gain = 1.0;
};

// Mixes every entry (or every entry x level when exhaustive). Undecodable
// audio is skipped through `warn`. Deterministic for a fixed seed.
std::vector<MixedUtterance> mix_entries(const std::vector<ManifestEntry>& entries,
                                        const std::vector<std::filesystem::path>& pool, const MixConfig& mix,
                                        std::uint64_t seed, const Warn& warn = {});

struct SegmentPair {
  std::size_t utterance = 0;
  std::size_t valid_frames = 0;
  std::vector<float> noisy_lps;  // T x 257, z-scored
  std::vector<float> clean_lps;  // T x 257, z-scored with the noisy stats
  std::vector<float> mfcc;       // T x 39, noisy
  std::vector<float> clean_mfcc; // T x 39, normalized with the noisy mfcc stats
  std::vector<std::int32_t> labels;  // T class ids
};

struct UtteranceInfo {
  std::string id;
  double snr_db = 0.0;
  double measured_snr_db = 0.0;
  std::string noise;
  std::size_t num_samples = 0;
  std::size_t num_frames = 0;
  bool labeled = false;
};

struct Dataset {
  FeatureConfig features;
  std::vector<SegmentPair> segments;
  std::vector<UtteranceInfo> utterances;
};

// Noisy LPS / MFCC features of one waveform, segmented and normalized.
struct NoisyFeatures {
  dsp::LpsMatrix lps;
  dsp::NormalizedSegments lps_segments;
  dsp::NormalizedSegments mfcc_segments;
};
NoisyFeatures noisy_features(const dsp::Waveform& noisy, const FeatureConfig& features);

// Segment pairs of one mixed utterance. `frame_classes` may be empty.
std::vector<SegmentPair> segment_pairs(const dsp::Waveform& clean, const dsp::Waveform& noisy,
                                       const std::vector<std::int32_t>& frame_classes, const FeatureConfig& features);

Dataset build_dataset(const std::vector<MixedUtterance>& mixed, const FeatureConfig& features,
                      const labels::PhoneFolding& folding = {}, const Warn& warn = {});

// Gathers segments into model layout: LPS [B,257,T], MFCC [B,T,39],
// clean MFCC [B,39,T], phonemes B*T.
template <typename Real>
model::Batch<Real> make_batch(const Dataset& data, std::span<const std::size_t> indices);

}  // namespace symse::pipeline
