// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "symse/labels.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "symse/errors.hpp"

namespace symse::labels {

namespace {

const std::vector<std::pair<std::string, std::string>>& builtin_table() {
  static const std::vector<std::pair<std::string, std::string>> t = {
      {"aa", "aa"},   {"ae", "ae"},  {"ah", "ah"},  {"ao", "aa"},   {"aw", "aw"},   {"ax", "ah"},  {"ax-h", "ah"},
      {"axr", "er"},  {"ay", "ay"},  {"b", "b"},    {"bcl", "sil"}, {"ch", "ch"},   {"d", "d"},    {"dcl", "sil"},
      {"dh", "dh"},   {"dx", "dx"},  {"eh", "eh"},  {"el", "l"},    {"em", "m"},    {"en", "n"},   {"eng", "ng"},
      {"epi", "sil"}, {"er", "er"},  {"ey", "ey"},  {"f", "f"},     {"g", "g"},     {"gcl", "sil"}, {"h#", "sil"},
      {"hh", "hh"},   {"hv", "hh"},  {"ih", "ih"},  {"ix", "ih"},   {"iy", "iy"},   {"jh", "jh"},  {"k", "k"},
      {"kcl", "sil"}, {"l", "l"},    {"m", "m"},    {"n", "n"},     {"ng", "ng"},   {"nx", "n"},   {"ow", "ow"},
      {"oy", "oy"},   {"p", "p"},    {"pau", "sil"}, {"pcl", "sil"}, {"q", "-"},    {"r", "r"},    {"s", "s"},
      {"sh", "sh"},   {"t", "t"},    {"tcl", "sil"}, {"th", "th"},  {"uh", "uh"},   {"uw", "uw"},  {"ux", "uw"},
      {"v", "v"},     {"w", "w"},    {"y", "y"},    {"z", "z"},     {"zh", "sh"},
  };
  return t;
}

}  // namespace

std::vector<PhoneSegment> read_phn(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open label file " + path.string());
  std::vector<PhoneSegment> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line[0] == '#' || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    PhoneSegment s;
    if (!(ss >> s.start >> s.end >> s.phone) || s.start < 0 || s.end < s.start)
      throw DataError(path.string() + ":" + std::to_string(n) + ": expected 'start end phone'");
    out.push_back(std::move(s));
  }
  return out;
}

void write_phn(const std::filesystem::path& path, const std::vector<PhoneSegment>& segments) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& s : segments) out << s.start << ' ' << s.end << ' ' << s.phone << '\n';
}

PhoneFolding::PhoneFolding() { build(builtin_table()); }

PhoneFolding PhoneFolding::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open folding table " + path.string());
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string a, b;
    if (!(ss >> a)) continue;
    if (!(ss >> b)) throw DataError(path.string() + ":" + std::to_string(n) + ": expected 'phone class'");
    pairs.emplace_back(a, b);
  }
  PhoneFolding f;
  f.build(pairs);
  return f;
}

void PhoneFolding::build(const std::vector<std::pair<std::string, std::string>>& pairs) {
  table_.clear();
  std::set<std::string> classes;
  for (const auto& [src, dst] : pairs) {
    table_[src] = dst;
    if (dst != "-") classes.insert(dst);
  }
  if (classes.size() > kNumClasses - 1)
    throw DataError("folding table defines " + std::to_string(classes.size()) + " classes, at most 39 allowed");
  names_.assign(classes.begin(), classes.end());
  while (names_.size() < kNumClasses - 1) names_.push_back("unused" + std::to_string(names_.size()));
  names_.push_back("other");
  ids_.clear();
  for (std::size_t i = 0; i < names_.size(); ++i) ids_[names_[i]] = static_cast<std::int32_t>(i);
}

std::string PhoneFolding::fold(const std::string& phone) const {
  auto it = table_.find(phone);
  if (it == table_.end() || it->second == "-") return "other";
  return it->second;
}

std::int32_t PhoneFolding::class_id(const std::string& phone) const {
  auto it = ids_.find(fold(phone));
  return it == ids_.end() ? kOtherClass : it->second;
}

std::vector<std::int32_t> frame_labels(const std::vector<PhoneSegment>& segments, std::size_t num_frames,
                                       const PhoneFolding& folding, std::size_t hop, std::size_t frame) {
  std::vector<std::int32_t> out(num_frames, kOtherClass);
  for (std::size_t t = 0; t < num_frames; ++t) {
    const auto centre = static_cast<std::int64_t>(t * hop + frame / 2);
    for (const auto& s : segments) {
      if (centre >= s.start && centre < s.end) {
        out[t] = folding.class_id(s.phone);
        break;
      }
    }
  }
  return out;
}

}  // namespace symse::labels
