// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "symse/cli.hpp"
#include "symse/wav.hpp"

namespace fs = std::filesystem;
using symse::cli::run;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result call(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> row;
    std::stringstream s(line);
    std::string f;
    while (std::getline(s, f, ',')) row.push_back(f);
    rows.push_back(row);
  }
  return rows;
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("symse_cli_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

constexpr char kTinyConfig[] = R"([model]
segment_frames = 16
enc_channels = 8,8
symb_hidden = 16
context_channels = 8
[mha]
heads = 2
key_dim = 8
value_dim = 8
[vq]
book_size = 8
code_dim = 8
[mix]
snr_levels = 5,0
[train]
max_epochs = 2
batch_size = 8
)";

std::string corpus(const TempDir& t, const std::string& name, int n = 8, int seed = 7) {
  const auto dir = (t.path / name).string();
  auto r = call({"synth-corpus", "--out", dir, "--n", std::to_string(n), "--seed", std::to_string(seed),
                 "--min-seconds", "1.0", "--max-seconds", "1.2", "--valid", "0.25", "--test", "0.25"});
  REQUIRE(r.code == 0);
  return dir + "/manifest.tsv";
}

}  // namespace

TEST_CASE("cli: usage errors exit 1 with usage text") {
  auto r = call({});
  CHECK(r.code == 1);
  CHECK(r.err.find("Usage") != std::string::npos);

  r = call({"train"});
  CHECK(r.code == 1);
  CHECK(r.err.find("--manifest") != std::string::npos);
  CHECK(r.err.find("Usage") != std::string::npos);

  r = call({"frobnicate"});
  CHECK(r.code == 1);

  r = call({"mix", "--manifest", "m", "--out", "o", "--split", "bogus"});
  CHECK(r.code == 1);

  r = call({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("synth-corpus") != std::string::npos);
}

TEST_CASE("cli: missing inputs are data errors") {
  TempDir t;
  CHECK(call({"train", "--manifest", (t.path / "nope.tsv").string(), "--out", (t.path / "m.ckpt").string()}).code ==
        2);
  CHECK(call({"inspect-book", "--ckpt", (t.path / "nope.ckpt").string()}).code == 2);
  CHECK(call({"eval", "--clean", (t.path / "a").string(), "--degraded", (t.path / "b").string(), "--out",
              (t.path / "s.csv").string()})
            .code == 2);
}

TEST_CASE("cli: config errors exit 1 naming the key") {
  TempDir t;
  const auto manifest = corpus(t, "c");
  auto r = call({"train", "--manifest", manifest, "--out", (t.path / "m.ckpt").string(), "--set", "vq.book_size=-1"});
  CHECK(r.code == 1);
  CHECK(r.err.find("vq.book_size") != std::string::npos);

  std::ofstream(t.path / "bad.ini") << "[train]\nbatch_size = 4\nbogus_key = 1\n";
  r = call({"train", "--manifest", manifest, "--config", (t.path / "bad.ini").string(), "--out",
            (t.path / "m.ckpt").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("bad.ini:3") != std::string::npos);
  CHECK(r.err.find("train.bogus_key") != std::string::npos);
}

TEST_CASE("cli: synth-corpus is deterministic") {
  TempDir t;
  corpus(t, "a", 6, 7);
  corpus(t, "b", 6, 7);
  std::size_t wavs = 0;
  for (const auto& e : fs::recursive_directory_iterator(t.path / "a")) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), t.path / "a");
    CHECK(slurp(e.path()) == slurp(t.path / "b" / rel));
    wavs += e.path().extension() == ".wav";
  }
  CHECK(wavs == 6 + 4);  // utterances + noise kinds
  corpus(t, "c", 6, 8);
  CHECK(slurp(t.path / "a/clean/utt_0000.wav") != slurp(t.path / "c/clean/utt_0000.wav"));
}

TEST_CASE("cli: eval on identical directories scores stoi 1 and ssnr at the ceiling") {
  TempDir t;
  const auto manifest = corpus(t, "c");
  REQUIRE(call({"mix", "--manifest", manifest, "--out", (t.path / "mix").string(), "--snr", "0"}).code == 0);
  const auto clean = (t.path / "mix/clean").string();
  const auto scores = t.path / "scores.csv";
  auto r = call({"eval", "--clean", clean, "--degraded", clean, "--mixed", (t.path / "mix/mixed.tsv").string(),
                 "--out", scores.string()});
  REQUIRE(r.code == 0);
  auto rows = read_csv(scores);
  REQUIRE(rows.size() == 9);
  CHECK(rows[0] == std::vector<std::string>{"utterance", "snr_db", "noise", "stoi_noisy", "stoi_enhanced",
                                            "ssnr_noisy", "ssnr_enhanced"});
  for (std::size_t i = 1; i < rows.size(); ++i) {
    REQUIRE(rows[i].size() == 7);
    CHECK(rows[i][1] == "0");
    CHECK(std::abs(std::stod(rows[i][3]) - 1.0) < 1e-9);
    CHECK(std::abs(std::stod(rows[i][4]) - 1.0) < 1e-9);
    CHECK(std::stod(rows[i][5]) == 35.0);
  }
}

TEST_CASE("cli: mix writes re-measurable mixtures and a result manifest") {
  TempDir t;
  const auto manifest = corpus(t, "c");
  REQUIRE(call({"mix", "--manifest", manifest, "--out", (t.path / "mix").string(), "--snr", "5,-5", "--exhaustive"})
              .code == 0);
  std::ifstream in(t.path / "mix/mixed.tsv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "id\tsplit\tsnr_db\tmeasured_snr_db\tnoise\tclean\tnoisy\tlabels");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream s(line);
    std::string x;
    while (std::getline(s, x, '\t')) f.push_back(x);
    REQUIRE(f.size() == 8);
    CHECK(std::abs(std::stod(f[3]) - std::stod(f[2])) < 1e-6);
    CHECK(fs::exists(t.path / "mix" / f[6]));
    ++rows;
  }
  CHECK(rows == 16);
}

TEST_CASE("cli: train, inspect-book, enhance and interpret") {
  TempDir t;
  const auto manifest = corpus(t, "c");
  std::ofstream(t.path / "tiny.ini") << kTinyConfig;
  const auto ckpt = (t.path / "run/model.ckpt").string();
  auto r = call({"train", "--manifest", manifest, "--config", (t.path / "tiny.ini").string(), "--out", ckpt});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(ckpt));
  CHECK(fs::exists(t.path / "run/model.ini"));
  auto log = read_csv(t.path / "run/model.log.csv");
  REQUIRE(log.size() == 3);
  CHECK(log[0][0] == "epoch");

  // The echoed config reproduces the run.
  REQUIRE(call({"train", "--manifest", manifest, "--config", (t.path / "run/model.ini").string(), "--out",
                (t.path / "again/model.ckpt").string(), "--quiet"})
              .code == 0);
  CHECK(slurp(ckpt) == slurp(t.path / "again/model.ckpt"));
  CHECK(slurp(t.path / "run/model.log.csv") == slurp(t.path / "again/model.log.csv"));

  r = call({"inspect-book", "--ckpt", ckpt});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("book size   8") != std::string::npos);
  CHECK(r.out.find("perplexity") != std::string::npos);
  CHECK(r.out.find("collapsed") != std::string::npos);

  REQUIRE(call({"mix", "--manifest", manifest, "--out", (t.path / "mix").string(), "--snr", "0", "--split", "test"})
              .code == 0);
  r = call({"enhance", "--ckpt", ckpt, "--in", (t.path / "mix/noisy").string(), "--out", (t.path / "enh").string()});
  REQUIRE(r.code == 0);
  for (const auto& e : fs::directory_iterator(t.path / "mix/noisy")) {
    auto a = symse::dsp::read_wav(e.path());
    auto b = symse::dsp::read_wav(t.path / "enh" / e.path().filename());
    CHECK(a.samples.size() == b.samples.size());
  }

  r = call({"interpret", "--ckpt", ckpt, "--manifest", manifest, "--out", (t.path / "fig").string(), "--split",
            "all"});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(t.path / "fig/jsd_matrix.csv"));
  CHECK(fs::exists(t.path / "fig/jsd_heatmap.svg"));
}

TEST_CASE("cli: variant mismatches and numeric failures map to their exit codes") {
  TempDir t;
  const auto manifest = corpus(t, "c");
  std::ofstream(t.path / "tiny.ini") << kTinyConfig;
  const auto ckpt = (t.path / "unet.ckpt").string();
  REQUIRE(call({"train", "--manifest", manifest, "--config", (t.path / "tiny.ini").string(), "--out", ckpt, "--set",
                "model.variant=unet", "--quiet"})
              .code == 0);
  CHECK(call({"inspect-book", "--ckpt", ckpt}).code == 2);
  CHECK(call({"interpret", "--ckpt", ckpt, "--manifest", manifest, "--out", (t.path / "fig").string()}).code == 1);

  auto r = call({"train", "--manifest", manifest, "--config", (t.path / "tiny.ini").string(), "--out",
                 (t.path / "nan.ckpt").string(), "--set", "train.lr=1e300", "--quiet"});
  CHECK(r.code == 3);
  CHECK(r.err.find("batch") != std::string::npos);
}
