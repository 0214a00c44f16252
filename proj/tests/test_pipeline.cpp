// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "doctest.h"
#include "symse/dataset.hpp"
#include "symse/errors.hpp"
#include "symse/labels.hpp"

using namespace symse;
using namespace symse::pipeline;
namespace fs = std::filesystem;

namespace {

dsp::Waveform tone(std::size_t n, double f, double amp) {
  dsp::Waveform w;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) w.samples[i] = amp * std::sin(2.0 * std::numbers::pi * f * static_cast<double>(i) / 16000.0);
  return w;
}

dsp::Waveform noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.1);
  dsp::Waveform w;
  w.samples.resize(n);
  for (auto& s : w.samples) s = g(rng);
  return w;
}

struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name) : dir(fs::temp_directory_path() / name) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
};

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream f(p);
  f << s;
}

constexpr std::size_t k128Frames = 512 + 127 * 256;

}  // namespace

TEST_CASE("phone folding table") {
  labels::PhoneFolding f;
  CHECK(f.class_names().size() == labels::kNumClasses);
  CHECK(f.class_names().back() == "other");
  CHECK(f.fold("ao") == "aa");
  CHECK(f.fold("ax-h") == "ah");
  CHECK(f.fold("pcl") == "sil");
  CHECK(f.fold("q") == "other");
  CHECK(f.fold("not-a-phone") == "other");
  CHECK(f.class_id("q") == labels::kOtherClass);
  CHECK(f.class_id("aa") == f.class_id("ao"));
  CHECK(f.class_id("iy") != f.class_id("ih"));
}

TEST_CASE("shipped folding file matches the built-in table") {
  const fs::path data = fs::path(SYMSE_SOURCE_DIR) / "data" / "phone_fold_61_39.txt";
  auto file = labels::PhoneFolding::from_file(data);
  labels::PhoneFolding builtin;
  CHECK(file.class_names() == builtin.class_names());
  for (const char* p : {"aa", "ao", "ix", "zh", "epi", "h#", "q", "dx", "nx"}) CHECK(file.fold(p) == builtin.fold(p));
}

TEST_CASE("frame labels use the centre sample") {
  labels::PhoneFolding f;
  // Frame t covers [256 t, 256 t + 512), centre 256 t + 256.
  std::vector<labels::PhoneSegment> segs = {{0, 500, "h#"}, {500, 1000, "iy"}, {1000, 5000, "s"}};
  auto lab = frame_labels(segs, 6, f);
  CHECK(lab[0] == f.class_id("h#"));   // centre 256
  CHECK(lab[1] == f.class_id("iy"));   // centre 512
  CHECK(lab[2] == f.class_id("iy"));   // centre 768
  CHECK(lab[3] == f.class_id("s"));    // centre 1024
  auto beyond = frame_labels(segs, 25, f);
  CHECK(beyond[24] == labels::kOtherClass);  // centre 6400 is uncovered
}

TEST_CASE("phn round trip and malformed lines") {
  Scratch s("symse_phn");
  std::vector<labels::PhoneSegment> segs = {{0, 100, "h#"}, {100, 900, "aa"}};
  labels::write_phn(s.dir / "a.phn", segs);
  auto back = labels::read_phn(s.dir / "a.phn");
  REQUIRE(back.size() == 2);
  CHECK(back[1].start == 100);
  CHECK(back[1].end == 900);
  CHECK(back[1].phone == "aa");
  write_text(s.dir / "bad.phn", "0 100 h#\nzero 1\n");
  CHECK_THROWS_AS(labels::read_phn(s.dir / "bad.phn"), DataError);
}

TEST_CASE("manifest parsing resolves paths and rejects bad input") {
  Scratch s("symse_manifest");
  dsp::write_wav(s.dir / "a.wav", tone(8000, 300, 0.3));
  dsp::write_wav(s.dir / "b.wav", tone(8000, 500, 0.3));
  dsp::write_wav(s.dir / "n.wav", noise(8000, 1));
  write_text(s.dir / "m.tsv", "# comment\ntrain\ta.wav\tn.wav\t-\nvalid\tb.wav\t-\t-\n");
  auto m = read_manifest(s.dir / "m.tsv");
  REQUIRE(m.size() == 2);
  CHECK(m[0].split == Split::kTrain);
  CHECK(m[0].clean == s.dir / "a.wav");
  CHECK(m[1].noise.empty());
  CHECK(noise_pool(m).size() == 1);
  CHECK(select_split(m, Split::kValid).size() == 1);

  write_manifest(s.dir / "m2.tsv", m);
  auto m2 = read_manifest(s.dir / "m2.tsv");
  CHECK(m2.size() == 2);
  CHECK(m2[1].clean == m[1].clean);

  write_text(s.dir / "dup.tsv", "train\ta.wav\t-\t-\ntest\ta.wav\t-\t-\n");
  CHECK_THROWS_AS(read_manifest(s.dir / "dup.tsv"), DataError);
  write_text(s.dir / "missing.tsv", "train\tnope.wav\t-\t-\n");
  CHECK_THROWS_AS(read_manifest(s.dir / "missing.tsv"), DataError);
  write_text(s.dir / "fields.tsv", "train\ta.wav\n");
  CHECK_THROWS_AS(read_manifest(s.dir / "fields.tsv"), DataError);
  write_text(s.dir / "split.tsv", "dev\ta.wav\t-\t-\n");
  CHECK_THROWS_AS(read_manifest(s.dir / "split.tsv"), DataError);
}

TEST_CASE("128 frame utterance gives two segment pairs") {
  auto clean = tone(k128Frames, 440, 0.3);
  auto noisy = clean;
  for (std::size_t i = 0; i < noisy.samples.size(); ++i) noisy.samples[i] += 0.01 * std::sin(0.37 * static_cast<double>(i));
  CHECK(dsp::frame_count(k128Frames) == 128);
  auto pairs = segment_pairs(clean, noisy, {}, {});
  REQUIRE(pairs.size() == 2);
  for (const auto& p : pairs) {
    CHECK(p.valid_frames == 64);
    CHECK(p.noisy_lps.size() == 64 * 257);
    CHECK(p.mfcc.size() == 64 * 39);
    CHECK(p.labels.size() == 64);
  }
}

TEST_CASE("clean target is normalized with the noisy statistics") {
  auto clean = tone(k128Frames, 440, 0.3);
  auto pairs = segment_pairs(clean, clean, {}, {});
  REQUIRE(pairs.size() == 2);
  for (std::size_t i = 0; i < pairs[0].noisy_lps.size(); ++i) CHECK(pairs[0].noisy_lps[i] == pairs[0].clean_lps[i]);
}

TEST_CASE("mixing, determinism and snr re-measurement") {
  Scratch s("symse_mix");
  dsp::write_wav(s.dir / "a.wav", tone(20000, 300, 0.3));
  dsp::write_wav(s.dir / "b.wav", tone(k128Frames, 700, 0.2));
  dsp::write_wav(s.dir / "n1.wav", noise(30000, 1));
  dsp::write_wav(s.dir / "n2.wav", noise(9000, 2));
  write_text(s.dir / "m.tsv", "train\ta.wav\tn1.wav\t-\ntrain\tb.wav\tn2.wav\t-\n");
  auto entries = read_manifest(s.dir / "m.tsv");
  MixConfig mix;
  mix.snr_levels = {-5, 0, 5, 20};
  mix.exhaustive = true;
  auto mixed = mix_entries(entries, noise_pool(entries), mix, 42);
  REQUIRE(mixed.size() == 8);
  CHECK(mixed[0].id == "a_n1_-5dB");
  auto d1 = build_dataset(mixed, {});
  for (const auto& u : d1.utterances) CHECK(std::abs(u.measured_snr_db - u.snr_db) < 1e-6);

  auto d2 = build_dataset(mix_entries(entries, noise_pool(entries), mix, 42), {});
  REQUIRE(d1.segments.size() == d2.segments.size());
  for (std::size_t i = 0; i < d1.segments.size(); ++i) {
    CHECK(std::memcmp(d1.segments[i].noisy_lps.data(), d2.segments[i].noisy_lps.data(),
                      d1.segments[i].noisy_lps.size() * sizeof(float)) == 0);
    CHECK(std::memcmp(d1.segments[i].mfcc.data(), d2.segments[i].mfcc.data(),
                      d1.segments[i].mfcc.size() * sizeof(float)) == 0);
  }

  mix.exhaustive = false;
  auto sampled = mix_entries(entries, noise_pool(entries), mix, 42);
  CHECK(sampled.size() == 2);
}

TEST_CASE("undecodable audio is skipped with a warning, empty result is an error") {
  Scratch s("symse_skip");
  dsp::write_wav(s.dir / "a.wav", tone(20000, 300, 0.3));
  write_text(s.dir / "broken.wav", "RIFF????WAVEjunk");
  dsp::Waveform slow = tone(8000, 300, 0.3);
  slow.sample_rate = 8000;
  dsp::write_wav(s.dir / "slow.wav", slow);
  dsp::write_wav(s.dir / "n.wav", noise(30000, 3));
  write_text(s.dir / "m.tsv", "train\ta.wav\tn.wav\t-\ntrain\tbroken.wav\tn.wav\t-\ntrain\tslow.wav\tn.wav\t-\n");
  auto entries = read_manifest(s.dir / "m.tsv");
  std::vector<std::string> warnings;
  auto mixed = mix_entries(entries, noise_pool(entries), {}, 1, [&](const std::string& w) { warnings.push_back(w); });
  CHECK(mixed.size() == 1);
  CHECK(warnings.size() == 2);
  CHECK(warnings[0].find("broken.wav") != std::string::npos);
  CHECK_THROWS_AS(build_dataset({}, {}), DataError);
}

TEST_CASE("labels flow into segments and batches") {
  Scratch s("symse_lab");
  dsp::write_wav(s.dir / "a.wav", tone(k128Frames, 300, 0.3));
  dsp::write_wav(s.dir / "n.wav", noise(k128Frames, 4));
  labels::write_phn(s.dir / "a.phn", {{0, 16000, "aa"}, {16000, static_cast<std::int64_t>(k128Frames), "s"}});
  write_text(s.dir / "m.tsv", "train\ta.wav\tn.wav\ta.phn\n");
  auto entries = read_manifest(s.dir / "m.tsv");
  auto d = build_dataset(mix_entries(entries, noise_pool(entries), {}, 3), {});
  REQUIRE(d.segments.size() == 2);
  CHECK(d.utterances[0].labeled);
  labels::PhoneFolding f;
  CHECK(d.segments[0].labels[0] == f.class_id("aa"));
  CHECK(d.segments[1].labels[63] == f.class_id("s"));

  std::vector<std::size_t> idx = {1, 0};
  auto b = make_batch<double>(d, idx);
  CHECK(b.noisy_lps.shape == ad::Shape{2, 257, 64});
  CHECK(b.mfcc.shape == ad::Shape{2, 64, 39});
  CHECK(b.clean_mfcc.shape == ad::Shape{2, 39, 64});
  REQUIRE(b.phonemes.size() == 128);
  CHECK(b.phonemes[0] == d.segments[1].labels[0]);
  // LPS [B,257,T] element (0, f, t) is segment 1's frame t bin f.
  CHECK(b.noisy_lps.values[5 * 64 + 7] == static_cast<double>(d.segments[1].noisy_lps[7 * 257 + 5]));
}
