// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stack>

#include "doctest.h"
#include "symse/errors.hpp"
#include "symse/interp.hpp"

using namespace symse;
using namespace symse::interp;
namespace fs = std::filesystem;

namespace {

std::vector<double> random_pdf(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(n);
  double s = 0;
  for (auto& v : p) s += (v = u(rng));
  for (auto& v : p) v /= s;
  return p;
}

// Minimal XML check: balanced tags, quoted attributes, known entities.
bool well_formed(const std::string& text) {
  std::stack<std::string> open;
  std::size_t i = 0;
  bool root_seen = false;
  while (i < text.size()) {
    if (text[i] == '&') {
      const auto semi = text.find(';', i);
      if (semi == std::string::npos) return false;
      const auto ent = text.substr(i, semi - i + 1);
      if (ent != "&amp;" && ent != "&lt;" && ent != "&gt;" && ent != "&quot;" && ent != "&apos;") return false;
      i = semi + 1;
      continue;
    }
    if (text[i] != '<') {
      if (open.empty() && !std::isspace(static_cast<unsigned char>(text[i]))) return false;
      ++i;
      continue;
    }
    const auto close = text.find('>', i);
    if (close == std::string::npos) return false;
    std::string tag = text.substr(i + 1, close - i - 1);
    i = close + 1;
    if (tag.starts_with("?")) {
      if (!tag.ends_with("?")) return false;
      continue;
    }
    std::size_t quotes = 0;
    for (char c : tag) quotes += c == '"';
    if (quotes % 2) return false;
    if (tag.starts_with("/")) {
      if (open.empty() || open.top() != tag.substr(1)) return false;
      open.pop();
      continue;
    }
    const bool self = tag.ends_with("/");
    const auto name = tag.substr(0, tag.find_first_of(" /"));
    if (open.empty()) {
      if (root_seen) return false;
      root_seen = true;
    }
    if (!self) open.push(name);
  }
  return root_seen && open.empty();
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("one-hot histogram for a single-token class") {
  std::vector<std::vector<std::int32_t>> tok = {{3, 3, 3, 3}};
  std::vector<std::vector<std::int32_t>> cls = {{0, 0, 0, 0}};
  auto h = token_histograms(tok, cls, 8, {"aa", "b"});
  REQUIRE(h.size() == 1);
  CHECK(h[0].name == "aa");
  CHECK(h[0].total == 4);
  for (std::size_t j = 0; j < 8; ++j) CHECK(h[0].pdf[j] == (j == 3 ? 1.0 : 0.0));
}

TEST_CASE("histogram pdfs sum to one") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> tk(0, 15), cl(0, 5);
  std::vector<std::vector<std::int32_t>> tok(4), cls(4);
  for (int u = 0; u < 4; ++u) {
    for (int t = 0; t < 300; ++t) {
      tok[u].push_back(tk(rng));
      cls[u].push_back(cl(rng));
    }
  }
  auto hs = token_histograms(tok, cls, 16, {});
  CHECK(hs.size() == 6);
  for (const auto& h : hs) {
    double s = 0;
    for (double v : h.pdf) s += v;
    CHECK(std::abs(s - 1.0) < 1e-9);
  }
}

TEST_CASE("length mismatch names the utterance") {
  std::vector<std::vector<std::int32_t>> tok = {{1, 2}, {1}};
  std::vector<std::vector<std::int32_t>> cls = {{0, 0}, {0, 0}};
  try {
    token_histograms(tok, cls, 4, {}, {"u0", "sa1_babble"});
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("sa1_babble") != std::string::npos);
  }
}

TEST_CASE("two clusters give near-disjoint pdfs") {
  std::mt19937_64 rng(4);
  std::bernoulli_distribution stray(0.02);
  std::uniform_int_distribution<int> lo(0, 3), hi(4, 7);
  std::vector<std::vector<std::int32_t>> tok(1), cls(1);
  for (int t = 0; t < 2000; ++t) {
    const int c = t % 2;
    const bool s = stray(rng);
    tok[0].push_back((c == 0) != s ? lo(rng) : hi(rng));
    cls[0].push_back(c);
  }
  auto hs = token_histograms(tok, cls, 8, {"x", "y"});
  REQUIRE(hs.size() == 2);
  double overlap = 0;
  for (std::size_t j = 0; j < 8; ++j) overlap += std::min(hs[0].pdf[j], hs[1].pdf[j]);
  CHECK(overlap < 0.05);
  CHECK(js_divergence(hs[0].pdf, hs[1].pdf) > 0.8);
}

TEST_CASE("js divergence identities") {
  std::vector<double> p = {0.25, 0.25, 0.5, 0.0};
  CHECK(js_divergence(p, p) == 0.0);
  std::vector<double> a = {0.5, 0.5, 0, 0}, b = {0, 0, 0.3, 0.7};
  CHECK(js_divergence(a, b) == 1.0);
  // Hand value: p=(1,0), q=(1/2,1/2) -> 1.5 - 0.75 log2 3.
  std::vector<double> p1 = {1.0, 0.0}, q1 = {0.5, 0.5};
  CHECK(std::abs(js_divergence(p1, q1) - (1.5 - 0.75 * std::log2(3.0))) < 1e-15);
}

TEST_CASE("js divergence is symmetric on random pdfs") {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 200; ++k) {
    auto p = random_pdf(rng, 32), q = random_pdf(rng, 32);
    const double d = js_divergence(p, q);
    CHECK(std::abs(d - js_divergence(q, p)) < 1e-12);
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
  }
}

TEST_CASE("matrix of one-hot pdfs") {
  std::vector<PhonemeHistogram> hs(3);
  for (std::size_t i = 0; i < 3; ++i) {
    hs[i].name = "c" + std::to_string(i);
    hs[i].pdf.assign(5, 0.0);
    hs[i].pdf[i] = 1.0;
  }
  auto m = js_matrix(hs);
  REQUIRE(m.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(m.at(i, j) == m.at(j, i));
      CHECK(m.at(i, j) == (i == j ? 0.0 : 1.0));
    }
  }
  CHECK_THROWS_AS(js_matrix({hs[0]}), ContractError);
}

TEST_CASE("emitted files exist and svg is well formed") {
  std::vector<std::vector<std::int32_t>> tok = {{0, 1, 1, 2, 3, 3}};
  std::vector<std::vector<std::int32_t>> cls = {{0, 0, 1, 1, 2, 2}};
  auto hs = token_histograms(tok, cls, 4, {"h#", "a&b", "<x>"});
  auto m = js_matrix(hs);
  const auto dir = fs::temp_directory_path() / "symse_interp_test";
  fs::remove_all(dir);
  emit_plots(hs, m, dir);
  for (const auto* f : {"jsd_matrix.csv", "jsd_heatmap.svg", "hist_h_.csv", "hist_a_b.svg", "hist__x_.svg"})
    CHECK_MESSAGE(fs::exists(dir / f), f);
  CHECK(well_formed(slurp(dir / "jsd_heatmap.svg")));
  CHECK(well_formed(slurp(dir / "hist_a_b.svg")));
  CHECK_FALSE(well_formed("<svg><rect></svg>"));
  fs::remove_all(dir);
}

TEST_CASE("unwritable output directory is an io error") {
  std::vector<PhonemeHistogram> hs(2);
  for (auto& h : hs) h.pdf = {1.0};
  hs[0].name = "a";
  hs[1].name = "b";
  CHECK_THROWS_AS(emit_plots(hs, js_matrix(hs), "/proc/symse_no_such_dir"), IoError);
}
