// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Desk-scale synthetic corpus: formant-shaped harmonic "phones", fricative
// bursts and pauses with TIMIT-style labels, plus several noise types.

#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "symse/labels.hpp"
#include "symse/wav.hpp"

namespace symse::synth {

struct Utterance {
  dsp::Waveform wave;
  std::vector<labels::PhoneSegment> phones;
};

// Phones the generator can render, by TIMIT symbol.
const std::vector<std::string>& inventory();

// Random phone string drawn from `phones` (default: the whole inventory),
// framed by h# silence.
Utterance utterance(std::mt19937_64& rng, double seconds, const std::vector<std::string>& phones = {});

// One phone of the given length rendered at pitch f0.
std::vector<double> render_phone(const std::string& phone, std::size_t n, double f0, std::mt19937_64& rng);

const std::vector<std::string>& noise_kinds();         // white, pink, brown, hum, babble
const std::vector<std::string>& corpus_noise_kinds();  // the kinds write_corpus emits
dsp::Waveform noise(const std::string& kind, std::size_t n, std::mt19937_64& rng);

struct CorpusConfig {
  std::size_t utterances = 20;
  std::uint64_t seed = 0;
  double min_seconds = 1.2;
  double max_seconds = 2.0;
  double noise_seconds = 6.0;
  double valid_fraction = 0.1;
  double test_fraction = 0.1;
  std::vector<std::string> phones;  // empty: whole inventory
};

// Writes clean/*.wav, labels/*.phn, noise/*.wav and manifest.tsv under dir.
// Returns the manifest path. Identical seeds give identical bytes.
std::filesystem::path write_corpus(const std::filesystem::path& dir, const CorpusConfig& config);

}  // namespace symse::synth
