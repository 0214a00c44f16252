// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "symse/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>

#include "symse/errors.hpp"

namespace symse::pipeline {

namespace fs = std::filesystem;

std::string split_name(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kValid:
      return "valid";
    case Split::kTest:
      return "test";
  }
  return "?";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "valid") return Split::kValid;
  if (s == "test") return Split::kTest;
  throw DataError("unknown split '" + s + "' (expected train, valid, test)");
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == '\t') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

fs::path resolve(const fs::path& base, const std::string& field) {
  if (field.empty() || field == "-") return {};
  fs::path p(field);
  return p.is_absolute() ? p : base / p;
}

std::uint64_t mix_seed(std::uint64_t seed, std::size_t a, std::size_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

std::string snr_tag(double snr) {
  std::ostringstream s;
  s << std::noshowpoint << snr << "dB";
  return s.str();
}

void to_float(const dsp::FeatureMatrix& m, std::vector<float>& out) {
  out.resize(m.values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(m.values[i]);
}

}  // namespace

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  const fs::path base = path.parent_path();
  std::vector<ManifestEntry> out;
  std::map<std::string, Split> seen;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line[0] == '#' || line == "\r") continue;
    const std::string where = path.string() + ":" + std::to_string(n) + ": ";
    auto f = split_tabs(line);
    if (f.size() != 4) throw DataError(where + "expected 4 tab-separated fields, got " + std::to_string(f.size()));
    ManifestEntry e;
    e.split = parse_split(f[0]);
    e.clean = resolve(base, f[1]);
    e.noise = resolve(base, f[2]);
    e.labels = resolve(base, f[3]);
    if (e.clean.empty()) throw DataError(where + "clean path is required");
    for (const auto* p : {&e.clean, &e.noise, &e.labels})
      if (!p->empty() && !fs::exists(*p)) throw DataError(where + "missing file " + p->string());
    const auto key = fs::weakly_canonical(e.clean).string();
    auto [it, fresh] = seen.emplace(key, e.split);
    if (!fresh && it->second != e.split)
      throw DataError(where + e.clean.string() + " appears in both " + split_name(it->second) + " and " +
                      split_name(e.split));
    out.push_back(std::move(e));
  }
  return out;
}

void write_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << "# split\tclean\tnoise\tlabels\n";
  const fs::path base = fs::absolute(path).parent_path().lexically_normal();
  auto field = [&](const fs::path& p) {
    if (p.empty()) return std::string("-");
    const auto rel = fs::absolute(p).lexically_normal().lexically_relative(base);
    if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
    return fs::absolute(p).lexically_normal().generic_string();
  };
  for (const auto& e : entries)
    out << split_name(e.split) << '\t' << field(e.clean) << '\t' << field(e.noise) << '\t' << field(e.labels) << '\n';
}

std::vector<ManifestEntry> select_split(const std::vector<ManifestEntry>& entries, Split split) {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries)
    if (e.split == split) out.push_back(e);
  return out;
}

std::vector<fs::path> noise_pool(const std::vector<ManifestEntry>& entries) {
  std::vector<fs::path> out;
  for (const auto& e : entries)
    if (!e.noise.empty() && std::find(out.begin(), out.end(), e.noise) == out.end()) out.push_back(e.noise);
  return out;
}

std::vector<MixedUtterance> mix_entries(const std::vector<ManifestEntry>& entries, const std::vector<fs::path>& pool,
                                        const MixConfig& mix, std::uint64_t seed, const Warn& warn) {
  SYMSE_REQUIRE(!mix.snr_levels.empty(), "mix.snr_levels: at least one level is required");
  std::map<fs::path, dsp::Waveform> noise_cache;
  auto load_noise = [&](const fs::path& p) -> const dsp::Waveform& {
    auto it = noise_cache.find(p);
    if (it == noise_cache.end()) it = noise_cache.emplace(p, dsp::read_wav(p)).first;
    return it->second;
  };

  std::vector<MixedUtterance> out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    std::mt19937_64 rng(mix_seed(seed, i, 0));
    dsp::Waveform clean;
    try {
      clean = dsp::read_wav(e.clean);
      SYMSE_REQUIRE(clean.sample_rate == dsp::kSampleRate,
                    "sample rate " + std::to_string(clean.sample_rate) + " is not 16000");
    } catch (const std::exception& ex) {
      if (warn) warn("skipping " + e.clean.string() + ": " + ex.what());
      continue;
    }
    fs::path noise_path = e.noise;
    if (noise_path.empty()) {
      if (pool.empty()) throw DataError(e.clean.string() + ": no noise file and the manifest has no noise pool");
      noise_path = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
    }
    const dsp::Waveform* noise = nullptr;
    try {
      noise = &load_noise(noise_path);
      SYMSE_REQUIRE(noise->sample_rate == dsp::kSampleRate, "noise sample rate is not 16000");
    } catch (const std::exception& ex) {
      if (warn) warn("skipping " + e.clean.string() + ": noise " + noise_path.string() + ": " + ex.what());
      continue;
    }

    std::vector<double> levels;
    if (mix.exhaustive) {
      levels = mix.snr_levels;
    } else {
      levels.push_back(mix.snr_levels[std::uniform_int_distribution<std::size_t>(0, mix.snr_levels.size() - 1)(rng)]);
    }
    for (std::size_t k = 0; k < levels.size(); ++k) {
      MixedUtterance m;
      m.clean_path = e.clean;
      m.noise_path = noise_path;
      m.labels_path = e.labels;
      m.snr_db = levels[k];
      m.id = e.clean.stem().string() + "_" + noise_path.stem().string() + "_" + snr_tag(levels[k]);
      try {
        auto r = dsp::mix_at_snr(clean, *noise, levels[k], mix_seed(seed, i, k + 1));
        m.noisy = std::move(r.noisy);
        m.noise_offset = r.noise_offset;
        m.noise_gain = r.noise_gain;
      } catch (const ContractError& ex) {
        if (warn) warn("skipping " + m.id + ": " + ex.what());
        continue;
      }
      m.clean = clean;
      out.push_back(std::move(m));
    }
  }
  return out;
}

NoisyFeatures noisy_features(const dsp::Waveform& noisy, const FeatureConfig& features) {
  NoisyFeatures f;
  f.lps = dsp::lps(dsp::stft(noisy));
  f.lps_segments = dsp::segment_normalized(f.lps.lps, features.segment_frames, features.scope);
  auto mf = dsp::mfcc(noisy);
  if (features.norm_mfcc) {
    f.mfcc_segments = dsp::segment_normalized(mf, features.segment_frames, features.scope);
  } else {
    f.mfcc_segments.segments = dsp::segment(mf, features.segment_frames);
    for (const auto& s : f.mfcc_segments.segments) {
      dsp::NormStats id{std::vector<double>(mf.dims, 0.0), std::vector<double>(mf.dims, 1.0)};
      f.mfcc_segments.stats.push_back(id);
      (void)s;
    }
  }
  return f;
}

std::vector<SegmentPair> segment_pairs(const dsp::Waveform& clean, const dsp::Waveform& noisy,
                                       const std::vector<std::int32_t>& frame_classes, const FeatureConfig& features) {
  SYMSE_REQUIRE(clean.samples.size() == noisy.samples.size(), "segment_pairs: clean and noisy lengths differ");
  const std::size_t T = features.segment_frames;
  auto nf = noisy_features(noisy, features);
  auto clean_lps = dsp::segment(dsp::lps(dsp::stft(clean)).lps, T);
  auto clean_mfcc = dsp::segment(dsp::mfcc(clean), T);
  SYMSE_REQUIRE(clean_lps.size() == nf.lps_segments.segments.size(), "segment_pairs: frame grids differ");
  const std::size_t frames = nf.lps.lps.frames;
  SYMSE_REQUIRE(frame_classes.empty() || frame_classes.size() == frames,
                "segment_pairs: " + std::to_string(frame_classes.size()) + " frame labels for " +
                    std::to_string(frames) + " frames");

  std::vector<SegmentPair> out;
  for (std::size_t s = 0; s < clean_lps.size(); ++s) {
    const auto& noisy_seg = nf.lps_segments.segments[s];
    SegmentPair p;
    p.valid_frames = noisy_seg.valid_frames;
    to_float(noisy_seg.features, p.noisy_lps);
    to_float(dsp::normalize(clean_lps[s].features, nf.lps_segments.stats[s], p.valid_frames), p.clean_lps);
    to_float(nf.mfcc_segments.segments[s].features, p.mfcc);
    to_float(dsp::normalize(clean_mfcc[s].features, nf.mfcc_segments.stats[s], p.valid_frames), p.clean_mfcc);
    p.labels.assign(T, labels::kOtherClass);
    if (!frame_classes.empty())
      for (std::size_t t = 0; t < p.valid_frames; ++t) p.labels[t] = frame_classes[s * T + t];
    out.push_back(std::move(p));
  }
  return out;
}

Dataset build_dataset(const std::vector<MixedUtterance>& mixed, const FeatureConfig& features,
                      const labels::PhoneFolding& folding, const Warn& warn) {
  Dataset d;
  d.features = features;
  for (const auto& m : mixed) {
    UtteranceInfo info;
    info.id = m.id;
    info.snr_db = m.snr_db;
    info.noise = m.noise_path.stem().string();
    info.num_samples = m.clean.samples.size();
    info.num_frames = dsp::frame_count(info.num_samples);
    std::vector<double> resid(m.noisy.samples.size());
    for (std::size_t i = 0; i < resid.size(); ++i) resid[i] = m.noisy.samples[i] - m.clean.samples[i];
    info.measured_snr_db = dsp::snr_db(m.clean.samples, resid);

    std::vector<std::int32_t> classes;
    if (!m.labels_path.empty()) {
      try {
        classes = labels::frame_labels(labels::read_phn(m.labels_path), info.num_frames, folding);
        info.labeled = true;
      } catch (const std::exception& ex) {
        if (warn) warn("ignoring labels for " + m.id + ": " + ex.what());
      }
    }
    auto pairs = segment_pairs(m.clean, m.noisy, classes, features);
    for (auto& p : pairs) {
      p.utterance = d.utterances.size();
      d.segments.push_back(std::move(p));
    }
    d.utterances.push_back(std::move(info));
  }
  if (d.segments.empty()) throw DataError("dataset is empty: no utterance could be mixed and segmented");
  return d;
}

template <typename Real>
model::Batch<Real> make_batch(const Dataset& data, std::span<const std::size_t> indices) {
  const std::size_t B = indices.size(), T = data.features.segment_frames;
  SYMSE_REQUIRE(B >= 1, "make_batch: empty batch");
  const std::size_t F = dsp::kBins, M = dsp::kMfccDims;
  model::Batch<Real> b;
  b.noisy_lps = ad::Tensor<Real>({B, F, T});
  b.clean_lps = ad::Tensor<Real>({B, F, T});
  b.mfcc = ad::Tensor<Real>({B, T, M});
  b.clean_mfcc = ad::Tensor<Real>({B, M, T});
  b.phonemes.resize(B * T);
  for (std::size_t i = 0; i < B; ++i) {
    const auto& s = data.segments.at(indices[i]);
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t f = 0; f < F; ++f) {
        b.noisy_lps.values[(i * F + f) * T + t] = static_cast<Real>(s.noisy_lps[t * F + f]);
        b.clean_lps.values[(i * F + f) * T + t] = static_cast<Real>(s.clean_lps[t * F + f]);
      }
      for (std::size_t m = 0; m < M; ++m) {
        b.mfcc.values[(i * T + t) * M + m] = static_cast<Real>(s.mfcc[t * M + m]);
        b.clean_mfcc.values[(i * M + m) * T + t] = static_cast<Real>(s.clean_mfcc[t * M + m]);
      }
      b.phonemes[i * T + t] = s.labels[t];
    }
  }
  return b;
}

template model::Batch<float> make_batch<float>(const Dataset&, std::span<const std::size_t>);
template model::Batch<double> make_batch<double>(const Dataset&, std::span<const std::size_t>);

}  // namespace symse::pipeline
