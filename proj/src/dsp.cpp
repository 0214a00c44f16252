// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "symse/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "symse/errors.hpp"
#include "symse/fft.hpp"

namespace symse::dsp {

namespace {

void require_rate(const Waveform& w, const char* op) {
  SYMSE_REQUIRE(w.sample_rate == kSampleRate, std::string(op) + ": expected " + std::to_string(kSampleRate) +
                                                  " Hz input, got " + std::to_string(w.sample_rate));
}

void require_finite(const Waveform& w, const char* op) {
  for (double s : w.samples) SYMSE_REQUIRE(std::isfinite(s), std::string(op) + ": non-finite sample");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Windowed frame t of x (zero beyond the end) transformed to kBins values.
void analyze_frame(std::span<const double> x, std::size_t t, const RealFft& fft,
                   std::span<std::complex<double>> out) {
  const auto& win = analysis_window();
  std::vector<double> frame(kFftSize, 0.0);
  const std::size_t start = t * kHop;
  for (std::size_t n = 0; n < kFftSize && start + n < x.size(); ++n) frame[n] = x[start + n] * win[n];
  fft.forward(frame, out);
}

}  // namespace

std::size_t frame_count(std::size_t num_samples) {
  if (num_samples <= kFftSize) return 1;
  return 1 + (num_samples - kFftSize + kHop - 1) / kHop;
}

const std::vector<double>& analysis_window() {
  static const std::vector<double> win = [] {
    std::vector<double> w(kFftSize);
    for (std::size_t n = 0; n < kFftSize; ++n)
      w[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(kFftSize));
    return w;
  }();
  return win;
}

ComplexSpectrogram stft(const Waveform& w) {
  require_rate(w, "stft");
  require_finite(w, "stft");
  ComplexSpectrogram spec;
  spec.num_samples = w.samples.size();
  spec.frames = frame_count(w.samples.size());
  spec.bins.resize(spec.frames * kBins);
  RealFft fft(kFftSize);
  for (std::size_t t = 0; t < spec.frames; ++t)
    analyze_frame(w.samples, t, fft, std::span(spec.bins).subspan(t * kBins, kBins));
  return spec;
}

Waveform istft_overlap_add(const ComplexSpectrogram& spec) {
  SYMSE_REQUIRE(spec.bins.size() == spec.frames * kBins, "istft: bin count does not match frame count");
  const std::size_t full_len = spec.frames == 0 ? 0 : (spec.frames - 1) * kHop + kFftSize;
  std::vector<double> acc(full_len, 0.0), norm(full_len, 0.0);
  const auto& win = analysis_window();
  RealFft fft(kFftSize);
  std::vector<double> frame(kFftSize);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    fft.inverse(std::span(spec.bins).subspan(t * kBins, kBins), frame);
    const std::size_t start = t * kHop;
    for (std::size_t n = 0; n < kFftSize; ++n) {
      acc[start + n] += win[n] * frame[n];
      norm[start + n] += win[n] * win[n];
    }
  }
  const std::size_t out_len = spec.num_samples > 0 ? std::min(spec.num_samples, full_len) : full_len;
  Waveform out;
  out.sample_rate = kSampleRate;
  out.samples.resize(out_len);
  for (std::size_t i = 0; i < out_len; ++i) {
    const bool interior = i >= kHop && i + kHop < full_len;
    if (norm[i] < 1e-12) {
      if (interior) throw NumericError("istft: vanishing window normalization at sample " + std::to_string(i));
      out.samples[i] = 0.0;
    } else {
      out.samples[i] = acc[i] / norm[i];
    }
  }
  return out;
}

LpsMatrix lps(const ComplexSpectrogram& spec) {
  LpsMatrix out;
  out.lps = FeatureMatrix(spec.frames, kBins);
  out.phase.resize(spec.frames * kBins);
  out.num_samples = spec.num_samples;
  for (std::size_t i = 0; i < spec.bins.size(); ++i) {
    out.lps.values[i] = std::log(std::norm(spec.bins[i]) + kPowerFloor);
    out.phase[i] = std::arg(spec.bins[i]);
  }
  return out;
}

ComplexSpectrogram spectrogram_from_lps(const FeatureMatrix& lps, std::span<const double> phase,
                                        std::size_t num_samples) {
  SYMSE_REQUIRE(lps.dims == kBins, "spectrogram_from_lps: expected 257 bins per frame");
  SYMSE_REQUIRE(phase.size() == lps.values.size(), "spectrogram_from_lps: phase size mismatch");
  ComplexSpectrogram spec;
  spec.frames = lps.frames;
  spec.num_samples = num_samples;
  spec.bins.resize(lps.values.size());
  for (std::size_t i = 0; i < spec.bins.size(); ++i) {
    const double power = std::max(std::exp(lps.values[i]) - kPowerFloor, 0.0);
    spec.bins[i] = std::polar(std::sqrt(power), phase[i]);
  }
  return spec;
}

const std::vector<std::vector<double>>& mel_filterbank() {
  static const std::vector<std::vector<double>> bank = [] {
    const double lo = hz_to_mel(0.0), hi = hz_to_mel(kSampleRate / 2.0);
    std::vector<double> edges(kNumMel + 2);
    for (std::size_t i = 0; i < edges.size(); ++i)
      edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(kNumMel + 1));
    std::vector<std::vector<double>> b(kNumMel, std::vector<double>(kBins, 0.0));
    for (std::size_t m = 0; m < kNumMel; ++m) {
      const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
      for (std::size_t k = 0; k < kBins; ++k) {
        const double f = static_cast<double>(k) * kSampleRate / static_cast<double>(kFftSize);
        if (f > left && f <= center)
          b[m][k] = (f - left) / (center - left);
        else if (f > center && f < right)
          b[m][k] = (right - f) / (right - center);
      }
    }
    return b;
  }();
  return bank;
}

std::vector<double> dct2_orthonormal(std::span<const double> x, std::size_t keep) {
  const std::size_t n = x.size();
  SYMSE_REQUIRE(n > 0 && keep <= n, "dct2: invalid sizes");
  std::vector<double> c(keep);
  for (std::size_t k = 0; k < keep; ++k) {
    double acc = 0;
    for (std::size_t i = 0; i < n; ++i)
      acc += x[i] * std::cos(std::numbers::pi * static_cast<double>(k) * (2.0 * static_cast<double>(i) + 1.0) /
                             (2.0 * static_cast<double>(n)));
    const double s = k == 0 ? std::sqrt(1.0 / static_cast<double>(n)) : std::sqrt(2.0 / static_cast<double>(n));
    c[k] = s * acc;
  }
  return c;
}

FeatureMatrix append_deltas(const FeatureMatrix& base) {
  const std::size_t t_count = base.frames, d = base.dims;
  auto regress = [&](const FeatureMatrix& src) {
    FeatureMatrix out(t_count, d);
    if (t_count == 0) return out;
    const auto last = static_cast<long>(t_count) - 1;
    auto clampt = [&](long t) { return static_cast<std::size_t>(std::clamp(t, 0L, last)); };
    for (std::size_t t = 0; t < t_count; ++t)
      for (std::size_t j = 0; j < d; ++j) {
        double acc = 0;
        for (long n = 1; n <= 2; ++n)
          acc += static_cast<double>(n) *
                 (src.at(clampt(static_cast<long>(t) + n), j) - src.at(clampt(static_cast<long>(t) - n), j));
        out.at(t, j) = acc / 10.0;  // 2 * (1^2 + 2^2)
      }
    return out;
  };
  const FeatureMatrix delta = regress(base);
  const FeatureMatrix delta2 = regress(delta);
  FeatureMatrix out(t_count, 3 * d);
  for (std::size_t t = 0; t < t_count; ++t)
    for (std::size_t j = 0; j < d; ++j) {
      out.at(t, j) = base.at(t, j);
      out.at(t, d + j) = delta.at(t, j);
      out.at(t, 2 * d + j) = delta2.at(t, j);
    }
  return out;
}

FeatureMatrix mfcc(const Waveform& w) {
  require_rate(w, "mfcc");
  require_finite(w, "mfcc");
  std::vector<double> emph(w.samples.size());
  for (std::size_t i = 0; i < emph.size(); ++i)
    emph[i] = w.samples[i] - (i > 0 ? kPreEmphasis * w.samples[i - 1] : 0.0);
  const std::size_t frames = frame_count(w.samples.size());
  const auto& bank = mel_filterbank();
  RealFft fft(kFftSize);
  std::vector<std::complex<double>> spec(kBins);
  std::vector<double> logmel(kNumMel);
  FeatureMatrix ceps(frames, kNumCeps);
  for (std::size_t t = 0; t < frames; ++t) {
    analyze_frame(emph, t, fft, spec);
    for (std::size_t m = 0; m < kNumMel; ++m) {
      double e = 0;
      for (std::size_t k = 0; k < kBins; ++k) e += bank[m][k] * std::norm(spec[k]);
      logmel[m] = std::log(std::max(e, kPowerFloor));
    }
    auto c = dct2_orthonormal(logmel, kNumCeps);
    std::copy(c.begin(), c.end(), ceps.values.begin() + static_cast<std::ptrdiff_t>(t * kNumCeps));
  }
  return append_deltas(ceps);
}

double mean_power(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double acc = 0;
  for (double v : x) acc += v * v;
  return acc / static_cast<double>(x.size());
}

double snr_db(std::span<const double> clean, std::span<const double> noise) {
  return 10.0 * std::log10(mean_power(clean) / mean_power(noise));
}

MixResult mix_at_snr(const Waveform& clean, const Waveform& noise, double snr, std::uint64_t seed) {
  SYMSE_REQUIRE(std::isfinite(snr), "mix_at_snr: SNR must be finite");
  SYMSE_REQUIRE(clean.sample_rate == noise.sample_rate, "mix_at_snr: sample rates differ");
  SYMSE_REQUIRE(!clean.samples.empty() && !noise.samples.empty(), "mix_at_snr: empty signal");
  const double pc = mean_power(clean.samples);
  SYMSE_REQUIRE(pc > 0.0, "mix_at_snr: clean signal is silent");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, noise.samples.size() - 1);
  MixResult r;
  r.noise_offset = pick(rng);
  std::vector<double> crop(clean.samples.size());
  for (std::size_t i = 0; i < crop.size(); ++i)
    crop[i] = noise.samples[(r.noise_offset + i) % noise.samples.size()];
  const double pn = mean_power(crop);
  SYMSE_REQUIRE(pn > 0.0, "mix_at_snr: noise segment is silent");
  r.noise_gain = std::sqrt(pc / (pn * std::pow(10.0, snr / 10.0)));
  r.noisy.sample_rate = clean.sample_rate;
  r.noisy.samples.resize(crop.size());
  for (std::size_t i = 0; i < crop.size(); ++i) r.noisy.samples[i] = clean.samples[i] + r.noise_gain * crop[i];
  return r;
}

std::vector<Segment> segment(const FeatureMatrix& features, std::size_t length) {
  SYMSE_REQUIRE(features.frames > 0, "segment: empty feature matrix");
  SYMSE_REQUIRE(length > 0, "segment: length must be positive");
  const std::size_t count = (features.frames + length - 1) / length;
  std::vector<Segment> out(count);
  for (std::size_t s = 0; s < count; ++s) {
    const std::size_t start = s * length;
    out[s].valid_frames = std::min(length, features.frames - start);
    out[s].features = FeatureMatrix(length, features.dims);
    std::copy_n(features.values.begin() + static_cast<std::ptrdiff_t>(start * features.dims),
                out[s].valid_frames * features.dims, out[s].features.values.begin());
  }
  return out;
}

NormStats compute_stats(const FeatureMatrix& m, std::size_t valid_frames) {
  SYMSE_REQUIRE(valid_frames > 0 && valid_frames <= m.frames, "compute_stats: invalid frame count");
  NormStats s;
  s.mean.assign(m.dims, 0.0);
  s.std.assign(m.dims, 0.0);
  const double n = static_cast<double>(valid_frames);
  for (std::size_t t = 0; t < valid_frames; ++t)
    for (std::size_t d = 0; d < m.dims; ++d) s.mean[d] += m.at(t, d);
  for (double& v : s.mean) v /= n;
  for (std::size_t t = 0; t < valid_frames; ++t)
    for (std::size_t d = 0; d < m.dims; ++d) {
      const double c = m.at(t, d) - s.mean[d];
      s.std[d] += c * c;
    }
  for (double& v : s.std) v = std::max(std::sqrt(v / n), kStdFloor);
  return s;
}

FeatureMatrix normalize(const FeatureMatrix& m, const NormStats& stats, std::size_t valid_frames) {
  SYMSE_REQUIRE(stats.mean.size() == m.dims && stats.std.size() == m.dims, "normalize: stats dimension mismatch");
  FeatureMatrix out(m.frames, m.dims);
  for (std::size_t t = 0; t < std::min(valid_frames, m.frames); ++t)
    for (std::size_t d = 0; d < m.dims; ++d) out.at(t, d) = (m.at(t, d) - stats.mean[d]) / stats.std[d];
  return out;
}

FeatureMatrix denormalize(const FeatureMatrix& m, const NormStats& stats) {
  SYMSE_REQUIRE(stats.mean.size() == m.dims && stats.std.size() == m.dims, "denormalize: stats dimension mismatch");
  FeatureMatrix out(m.frames, m.dims);
  for (std::size_t t = 0; t < m.frames; ++t)
    for (std::size_t d = 0; d < m.dims; ++d) out.at(t, d) = m.at(t, d) * stats.std[d] + stats.mean[d];
  return out;
}

NormalizedSegments segment_normalized(const FeatureMatrix& features, std::size_t length, NormScope scope) {
  NormalizedSegments out;
  out.segments = segment(features, length);
  NormStats utterance;
  if (scope == NormScope::kUtterance) utterance = compute_stats(features, features.frames);
  for (auto& s : out.segments) {
    NormStats st;
    if (scope == NormScope::kUtterance) {
      st = utterance;
    } else if (s.valid_frames < length && features.frames > s.valid_frames) {
      // Short tail: stats over the utterance's last full window.
      const std::size_t n = std::min(length, features.frames);
      FeatureMatrix tail(n, features.dims);
      std::copy(features.values.end() - static_cast<std::ptrdiff_t>(n * features.dims), features.values.end(),
                tail.values.begin());
      st = compute_stats(tail, n);
    } else {
      st = compute_stats(s.features, s.valid_frames);
    }
    s.features = normalize(s.features, st, s.valid_frames);
    out.stats.push_back(std::move(st));
  }
  return out;
}

}  // namespace symse::dsp
