// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "symse/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>

#include "symse/dataset.hpp"
#include "symse/errors.hpp"

namespace symse::synth {

namespace fs = std::filesystem;

namespace {

constexpr double kRate = 16000.0;
constexpr double kTau = 2.0 * std::numbers::pi;

struct PhoneSpec {
  enum Kind { kVowel, kNasal, kFricative, kSilence } kind;
  double f1, f2, f3;        // formants, or band centre / width for fricatives
  double min_ms, max_ms;
};

const std::map<std::string, PhoneSpec>& specs() {
  static const std::map<std::string, PhoneSpec> s = {
      {"iy", {PhoneSpec::kVowel, 270, 2290, 3010, 90, 180}},
      {"aa", {PhoneSpec::kVowel, 730, 1090, 2440, 90, 180}},
      {"uw", {PhoneSpec::kVowel, 300, 870, 2240, 90, 180}},
      {"ae", {PhoneSpec::kVowel, 660, 1720, 2410, 90, 180}},
      {"er", {PhoneSpec::kVowel, 490, 1350, 1690, 90, 180}},
      {"m", {PhoneSpec::kNasal, 250, 1100, 2300, 50, 100}},
      {"s", {PhoneSpec::kFricative, 6000, 2500, 0, 70, 150}},
      {"sh", {PhoneSpec::kFricative, 3200, 1200, 0, 70, 150}},
      {"pau", {PhoneSpec::kSilence, 0, 0, 0, 40, 100}},
  };
  return s;
}

// RBJ band-pass biquad, constant peak gain.
std::vector<double> bandpass(const std::vector<double>& x, double centre, double width) {
  const double w0 = kTau * centre / kRate;
  const double q = centre / width;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  const double b0 = alpha / a0, b2 = -alpha / a0;
  const double a1 = -2.0 * std::cos(w0) / a0, a2 = (1.0 - alpha) / a0;
  std::vector<double> y(x.size());
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = b0 * x[i] + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = x[i];
    y2 = y1;
    y1 = y[i];
  }
  return y;
}

double rms(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return v.empty() ? 0.0 : std::sqrt(s / static_cast<double>(v.size()));
}

void scale_to_rms(std::vector<double>& v, double target) {
  const double r = rms(v);
  if (r > 0)
    for (auto& x : v) x *= target / r;
}

std::vector<double> gaussian(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

double formant_gain(double f, double f1, double f2, double f3) {
  auto peak = [](double f, double c, double bw) { return 1.0 / std::sqrt(1.0 + ((f - c) / bw) * ((f - c) / bw)); };
  return peak(f, f1, 90) + 0.6 * peak(f, f2, 120) + 0.3 * peak(f, f3, 160);
}

}  // namespace

const std::vector<std::string>& inventory() {
  static const std::vector<std::string> v = [] {
    std::vector<std::string> out;
    for (const auto& [k, s] : specs()) out.push_back(k);
    return out;
  }();
  return v;
}

std::vector<double> render_phone(const std::string& phone, std::size_t n, double f0, std::mt19937_64& rng) {
  auto it = specs().find(phone);
  if (it == specs().end()) throw ContractError("synth: unknown phone '" + phone + "'");
  const auto& s = it->second;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> y(n, 0.0);
  switch (s.kind) {
    case PhoneSpec::kVowel:
    case PhoneSpec::kNasal: {
      const double glide = 1.0 + 0.08 * (u(rng) - 0.5);
      const int harmonics = static_cast<int>(7500.0 / f0);
      std::vector<double> phase(static_cast<std::size_t>(harmonics) + 1);
      for (auto& p : phase) p = kTau * u(rng);
      double acc = 0.0;  // integrated f0 phase
      for (std::size_t i = 0; i < n; ++i) {
        const double frac = static_cast<double>(i) / static_cast<double>(n);
        const double f = f0 * (1.0 + (glide - 1.0) * frac);
        acc += kTau * f / kRate;
        double v = 0.0;
        for (int h = 1; h <= harmonics; ++h) {
          const double fh = f * h;
          v += formant_gain(fh, s.f1, s.f2, s.f3) / std::sqrt(static_cast<double>(h)) *
               std::sin(acc * h + phase[static_cast<std::size_t>(h)]);
        }
        y[i] = v;
      }
      scale_to_rms(y, s.kind == PhoneSpec::kNasal ? 0.05 : 0.1);
      break;
    }
    case PhoneSpec::kFricative:
      y = bandpass(gaussian(n, rng), s.f1, s.f2);
      scale_to_rms(y, 0.04);
      break;
    case PhoneSpec::kSilence:
      y = gaussian(n, rng);
      scale_to_rms(y, 1e-4);
      break;
  }
  // 8 ms raised-cosine ramps.
  const std::size_t ramp = std::min<std::size_t>(n / 2, 128);
  for (std::size_t i = 0; i < ramp; ++i) {
    const double g = 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(i) / static_cast<double>(ramp));
    y[i] *= g;
    y[n - 1 - i] *= g;
  }
  return y;
}

Utterance utterance(std::mt19937_64& rng, double seconds, const std::vector<std::string>& phones) {
  const auto& pool = phones.empty() ? inventory() : phones;
  SYMSE_REQUIRE(!pool.empty(), "synth: empty phone set");
  SYMSE_REQUIRE(seconds > 0.3, "synth: utterances must be longer than 0.3 s");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t total = static_cast<std::size_t>(seconds * kRate);
  const std::size_t edge = 1600;  // 100 ms of h# at each end
  const double f0 = 100.0 + 110.0 * u(rng);

  Utterance out;
  out.wave.sample_rate = static_cast<int>(kRate);
  out.wave.samples.assign(total, 0.0);
  auto quiet = gaussian(total, rng);
  scale_to_rms(quiet, 1e-3);
  out.wave.samples = quiet;
  out.phones.push_back({0, static_cast<std::int64_t>(edge), "h#"});

  std::size_t pos = edge;
  std::string last;
  while (pos + edge < total) {
    std::string ph;
    do {
      ph = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
    } while (pool.size() > 1 && ph == last);
    last = ph;
    const auto& s = specs().at(ph);
    std::size_t len = static_cast<std::size_t>((s.min_ms + (s.max_ms - s.min_ms) * u(rng)) * kRate / 1000.0);
    len = std::min(len, total - edge - pos);
    if (len < 320) break;
    auto y = render_phone(ph, len, f0 * (1.0 + 0.1 * (u(rng) - 0.5)), rng);
    for (std::size_t i = 0; i < len; ++i) out.wave.samples[pos + i] += y[i];
    out.phones.push_back({static_cast<std::int64_t>(pos), static_cast<std::int64_t>(pos + len), ph});
    pos += len;
  }
  out.phones.push_back({static_cast<std::int64_t>(pos), static_cast<std::int64_t>(total), "h#"});
  return out;
}

const std::vector<std::string>& noise_kinds() {
  static const std::vector<std::string> k = {"white", "pink", "brown", "hum", "babble"};
  return k;
}

dsp::Waveform noise(const std::string& kind, std::size_t n, std::mt19937_64& rng) {
  dsp::Waveform w;
  w.sample_rate = static_cast<int>(kRate);
  if (kind == "white") {
    w.samples = gaussian(n, rng);
  } else if (kind == "pink") {
    // Paul Kellet's refined pink filter.
    auto x = gaussian(n, rng);
    double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double v = x[i];
      b0 = 0.99886 * b0 + v * 0.0555179;
      b1 = 0.99332 * b1 + v * 0.0750759;
      b2 = 0.96900 * b2 + v * 0.1538520;
      b3 = 0.86650 * b3 + v * 0.3104856;
      b4 = 0.55000 * b4 + v * 0.5329522;
      b5 = -0.7616 * b5 - v * 0.0168980;
      w.samples[i] = b0 + b1 + b2 + b3 + b4 + b5 + b6 + v * 0.5362;
      b6 = v * 0.115926;
    }
  } else if (kind == "brown") {
    auto x = gaussian(n, rng);
    w.samples.resize(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) w.samples[i] = acc = 0.995 * acc + x[i];
  } else if (kind == "hum") {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double base = 50.0 + 10.0 * u(rng);
    w.samples = gaussian(n, rng);
    scale_to_rms(w.samples, 0.05);
    for (int h = 1; h <= 20; ++h) {
      const double ph = kTau * u(rng);
      for (std::size_t i = 0; i < n; ++i)
        w.samples[i] += std::sin(kTau * base * h * static_cast<double>(i) / kRate + ph) / h;
    }
  } else if (kind == "babble") {
    w.samples.assign(n, 0.0);
    for (int talker = 0; talker < 5; ++talker) {
      auto utt = utterance(rng, static_cast<double>(n) / kRate + 0.01);
      for (std::size_t i = 0; i < n; ++i) w.samples[i] += utt.wave.samples[i];
    }
  } else {
    throw ContractError("synth: unknown noise kind '" + kind + "'");
  }
  scale_to_rms(w.samples, 0.1);
  return w;
}

// Pure hum is left out: its bins barely vary, so clean targets scaled by the
// noisy statistics explode there.
const std::vector<std::string>& corpus_noise_kinds() {
  static const std::vector<std::string> k = {"white", "pink", "brown", "babble"};
  return k;
}

fs::path write_corpus(const fs::path& dir, const CorpusConfig& c) {
  SYMSE_REQUIRE(c.utterances >= 1, "synth-corpus: --n must be positive");
  SYMSE_REQUIRE(c.min_seconds > 0.3 && c.max_seconds >= c.min_seconds, "synth-corpus: invalid utterance lengths");
  SYMSE_REQUIRE(c.valid_fraction >= 0 && c.test_fraction >= 0 && c.valid_fraction + c.test_fraction < 1.0,
                "synth-corpus: split fractions must leave a training set");
  std::error_code ec;
  for (const char* sub : {"clean", "labels", "noise"}) fs::create_directories(dir / sub, ec);
  if (ec) throw IoError("cannot create corpus directory " + dir.string());

  std::mt19937_64 rng(c.seed);
  std::vector<fs::path> noise_files;
  for (const auto& kind : corpus_noise_kinds()) {
    auto w = noise(kind, static_cast<std::size_t>(c.noise_seconds * kRate), rng);
    const auto p = dir / "noise" / (kind + ".wav");
    dsp::write_wav(p, w);
    noise_files.push_back(p);
  }

  const std::size_t n_test = static_cast<std::size_t>(std::round(c.test_fraction * static_cast<double>(c.utterances)));
  const std::size_t n_valid =
      static_cast<std::size_t>(std::round(c.valid_fraction * static_cast<double>(c.utterances)));
  std::vector<pipeline::ManifestEntry> entries;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < c.utterances; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "utt_%04zu", i);
    const double seconds = c.min_seconds + (c.max_seconds - c.min_seconds) * u(rng);
    auto utt = utterance(rng, seconds, c.phones);
    // Leave headroom for 16-bit output.
    double peak = 0;
    for (double v : utt.wave.samples) peak = std::max(peak, std::abs(v));
    const double gain = (0.3 + 0.3 * u(rng)) / peak;
    for (auto& v : utt.wave.samples) v *= gain;

    pipeline::ManifestEntry e;
    e.clean = dir / "clean" / (std::string(name) + ".wav");
    e.labels = dir / "labels" / (std::string(name) + ".phn");
    e.noise = noise_files[std::uniform_int_distribution<std::size_t>(0, noise_files.size() - 1)(rng)];
    e.split = i >= c.utterances - n_test               ? pipeline::Split::kTest
              : i >= c.utterances - n_test - n_valid ? pipeline::Split::kValid
                                                       : pipeline::Split::kTrain;
    dsp::write_wav(e.clean, utt.wave);
    labels::write_phn(e.labels, utt.phones);
    entries.push_back(std::move(e));
  }
  const auto manifest = dir / "manifest.tsv";
  pipeline::write_manifest(manifest, entries);
  return manifest;
}

}  // namespace symse::synth
