// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "symse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <numeric>

#include "symse/errors.hpp"
#include "symse/fft.hpp"

namespace symse::metrics {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  for (int k = 1; k < 64; ++k) {
    term *= (x / (2.0 * k)) * (x / (2.0 * k));
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

// Hann window of n points without its zero end points.
std::vector<double> hann_open(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i + 1) / static_cast<double>(n + 1));
  return w;
}

double norm2(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

// Keeps frames whose clean energy is within dyn_range of the loudest one and
// rebuilds both signals by overlap-add of the kept windowed frames.
void remove_silent_frames(std::vector<double>& x, std::vector<double>& y, double dyn_range, std::size_t frame,
                          std::size_t hop) {
  const auto w = hann_open(frame);
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + frame < x.size(); s += hop) starts.push_back(s);
  std::vector<double> energy(starts.size());
  std::vector<double> buf(frame);
  for (std::size_t i = 0; i < starts.size(); ++i) {
    for (std::size_t k = 0; k < frame; ++k) buf[k] = w[k] * x[starts[i] + k];
    energy[i] = 20.0 * std::log10(norm2(buf) + kEps);
  }
  const double top = energy.empty() ? 0.0 : *std::max_element(energy.begin(), energy.end());
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < starts.size(); ++i)
    if (top - dyn_range < energy[i]) kept.push_back(starts[i]);
  if (kept.empty()) {
    x.clear();
    y.clear();
    return;
  }
  const std::size_t len = (kept.size() - 1) * hop + frame;
  std::vector<double> xo(len, 0.0), yo(len, 0.0);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    for (std::size_t k = 0; k < frame; ++k) {
      xo[i * hop + k] += w[k] * x[kept[i] + k];
      yo[i * hop + k] += w[k] * y[kept[i] + k];
    }
  }
  x = std::move(xo);
  y = std::move(yo);
}

// bands x frames one-third octave envelopes.
std::vector<std::vector<double>> band_envelopes(const std::vector<double>& x, const StoiConfig& c) {
  const std::size_t hop = c.frame / 2, bins = c.fft / 2 + 1;
  const auto w = hann_open(c.frame);
  std::vector<std::size_t> lo(c.bands), hi(c.bands);
  for (std::size_t b = 0; b < c.bands; ++b) {
    const double k = static_cast<double>(b);
    const double fl = c.min_freq * std::pow(2.0, (2.0 * k - 1.0) / 6.0);
    const double fh = c.min_freq * std::pow(2.0, (2.0 * k + 1.0) / 6.0);
    auto nearest_bin = [&](double f) {
      std::size_t best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < bins; ++i) {
        const double fi = static_cast<double>(i) * c.sample_rate / static_cast<double>(c.fft);
        if ((fi - f) * (fi - f) < bd) {
          bd = (fi - f) * (fi - f);
          best = i;
        }
      }
      return best;
    };
    lo[b] = nearest_bin(fl);
    hi[b] = nearest_bin(fh);
  }

  dsp::RealFft fft(c.fft);
  std::vector<double> buf(c.fft);
  std::vector<std::complex<double>> spec(bins);
  std::vector<std::vector<double>> env(c.bands);
  for (std::size_t s = 0; s + c.frame < x.size(); s += hop) {
    std::fill(buf.begin(), buf.end(), 0.0);
    for (std::size_t k = 0; k < c.frame; ++k) buf[k] = w[k] * x[s + k];
    fft.forward(buf, spec);
    for (std::size_t b = 0; b < c.bands; ++b) {
      double e = 0.0;
      for (std::size_t i = lo[b]; i < hi[b]; ++i) e += std::norm(spec[i]);
      env[b].push_back(std::sqrt(e));
    }
  }
  return env;
}

}  // namespace

std::vector<double> resample_poly(std::span<const double> x, int up, int down) {
  SYMSE_REQUIRE(up >= 1 && down >= 1, "resample_poly: factors must be positive");
  const int g = std::gcd(up, down);
  up /= g;
  down /= g;
  if (up == 1 && down == 1) return std::vector<double>(x.begin(), x.end());
  const int mx = std::max(up, down);
  // Kaiser design for 60 dB rejection with a transition of a tenth of the cutoff.
  const double cutoff = 1.0 / (2.0 * mx);  // cycles per up-sampled sample
  const double rejection_db = 60.0;
  const double beta = 0.1102 * (rejection_db - 8.7);
  const int half = static_cast<int>(std::ceil((rejection_db - 8.0) / (28.714 * cutoff / 10.0)));
  const std::size_t taps = static_cast<std::size_t>(2 * half + 1);
  std::vector<double> h(taps);
  const double i0b = bessel_i0(beta);
  for (std::size_t i = 0; i < taps; ++i) {
    const double m = static_cast<double>(i) - half;
    const double r = m / half;
    const double win = bessel_i0(beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0b;
    const double arg = 2.0 * std::numbers::pi * cutoff * m;
    const double sinc = m == 0.0 ? 1.0 : std::sin(arg) / arg;
    h[i] = sinc * win;
  }
  const double gain = std::accumulate(h.begin(), h.end(), 0.0);
  for (auto& v : h) v *= up / gain;
  const std::size_t n = x.size();
  const std::size_t out_len = (n * static_cast<std::size_t>(up) + static_cast<std::size_t>(down) - 1) /
                              static_cast<std::size_t>(down);
  std::vector<double> y(out_len, 0.0);
  for (std::size_t o = 0; o < out_len; ++o) {
    // Up-sampled index of this output, centred on the filter.
    const long long u = static_cast<long long>(o) * down;
    double acc = 0.0;
    // x[j] sits at up-sampled position j*up; tap index = u - j*up + half.
    long long jmin = (u - half + up - 1) / up;
    if (u - half < 0) jmin = 0;
    const long long jmax = std::min<long long>(static_cast<long long>(n) - 1, (u + half) / up);
    for (long long j = std::max(0LL, jmin); j <= jmax; ++j) {
      const long long t = u - j * up + half;
      if (t >= 0 && t < static_cast<long long>(taps)) acc += h[static_cast<std::size_t>(t)] * x[static_cast<std::size_t>(j)];
    }
    y[o] = acc;
  }
  return y;
}

double stoi(const dsp::Waveform& clean, const dsp::Waveform& degraded, const StoiConfig& c) {
  SYMSE_REQUIRE(clean.samples.size() == degraded.samples.size(),
                "stoi: length mismatch " + std::to_string(clean.samples.size()) + " vs " +
                    std::to_string(degraded.samples.size()));
  SYMSE_REQUIRE(clean.sample_rate == degraded.sample_rate, "stoi: sample rates differ");
  SYMSE_REQUIRE(c.frame >= 2 && c.fft >= c.frame && c.bands >= 1 && c.segment >= 1, "stoi: invalid configuration");
  auto x = resample_poly(clean.samples, c.sample_rate, clean.sample_rate);
  auto y = resample_poly(degraded.samples, c.sample_rate, degraded.sample_rate);
  remove_silent_frames(x, y, c.dyn_range_db, c.frame, c.frame / 2);

  auto xe = band_envelopes(x, c);
  auto ye = band_envelopes(y, c);
  const std::size_t frames = xe.empty() ? 0 : xe[0].size();
  if (frames < c.segment)
    throw DataError("stoi: only " + std::to_string(frames) + " active frames, need " + std::to_string(c.segment) +
                    " (about 384 ms of speech)");

  const double clip = std::pow(10.0, -c.beta_db / 20.0);
  const std::size_t N = c.segment;
  double total = 0.0;
  std::size_t count = 0;
  std::vector<double> xs(N), ys(N);
  for (std::size_t m = N; m <= frames; ++m) {
    for (std::size_t b = 0; b < c.bands; ++b) {
      for (std::size_t k = 0; k < N; ++k) {
        xs[k] = xe[b][m - N + k];
        ys[k] = ye[b][m - N + k];
      }
      const double alpha = norm2(xs) / (norm2(ys) + kEps);
      for (std::size_t k = 0; k < N; ++k) ys[k] = std::min(ys[k] * alpha, xs[k] * (1.0 + clip));
      const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(N);
      const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(N);
      for (std::size_t k = 0; k < N; ++k) {
        xs[k] -= mx;
        ys[k] -= my;
      }
      const double nx = norm2(xs) + kEps, ny = norm2(ys) + kEps;
      double corr = 0.0;
      for (std::size_t k = 0; k < N; ++k) corr += (xs[k] / nx) * (ys[k] / ny);
      total += corr;
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

double segmental_snr(const dsp::Waveform& clean, const dsp::Waveform& enhanced, const SsnrConfig& c) {
  SYMSE_REQUIRE(clean.samples.size() == enhanced.samples.size(),
                "segmental_snr: length mismatch " + std::to_string(clean.samples.size()) + " vs " +
                    std::to_string(enhanced.samples.size()));
  SYMSE_REQUIRE(c.frame >= 1 && c.floor_db < c.ceil_db, "segmental_snr: invalid configuration");
  const std::size_t n = clean.samples.size();
  const std::size_t frames = std::max<std::size_t>(1, n / c.frame);
  std::vector<double> sig(frames, 0.0), err(frames, 0.0);
  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t end = std::min(n, (f + 1) * c.frame);
    for (std::size_t i = f * c.frame; i < end; ++i) {
      const double d = clean.samples[i] - enhanced.samples[i];
      sig[f] += clean.samples[i] * clean.samples[i];
      err[f] += d * d;
    }
  }
  const double top = *std::max_element(sig.begin(), sig.end());
  if (!(top > 0.0)) throw DataError("segmental_snr: clean signal is silent");
  const double gate = top * std::pow(10.0, -c.silence_db / 10.0);
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t f = 0; f < frames; ++f) {
    if (sig[f] <= gate) continue;
    const double v = err[f] > 0.0 ? 10.0 * std::log10(sig[f] / err[f]) : c.ceil_db;
    total += std::clamp(v, c.floor_db, c.ceil_db);
    ++used;
  }
  return total / static_cast<double>(used);
}

}  // namespace symse::metrics
