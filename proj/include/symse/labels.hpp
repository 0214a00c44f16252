// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// TIMIT-style phoneme segmentations and the 61 -> 39 class folding.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace symse::labels {

inline constexpr std::int32_t kOtherClass = 39;
inline constexpr std::size_t kNumClasses = 40;

struct PhoneSegment {
  std::int64_t start = 0;  // first sample
  std::int64_t end = 0;    // one past the last sample
  std::string phone;
};

// Lines "start end phone"; blank lines and '#' comments are skipped.
std::vector<PhoneSegment> read_phn(const std::filesystem::path& path);
void write_phn(const std::filesystem::path& path, const std::vector<PhoneSegment>& segments);

class PhoneFolding {
 public:
  // The built-in standard table.
  PhoneFolding();
  // "source folded" lines; a folded value of "-" drops the phone.
  static PhoneFolding from_file(const std::filesystem::path& path);

  // Folded class name for a raw phone; "other" when dropped or unknown.
  std::string fold(const std::string& phone) const;
  // Class id in [0, 40): the 39 folded classes in sorted order, then other.
  std::int32_t class_id(const std::string& phone) const;
  const std::vector<std::string>& class_names() const { return names_; }  // 40 entries

 private:
  void build(const std::vector<std::pair<std::string, std::string>>& pairs);

  std::map<std::string, std::string> table_;
  std::vector<std::string> names_;
  std::map<std::string, std::int32_t> ids_;
};

// One class id per analysis frame: the phone covering the frame's centre
// sample t*hop + frame/2, or other when nothing covers it.
std::vector<std::int32_t> frame_labels(const std::vector<PhoneSegment>& segments, std::size_t num_frames,
                                       const PhoneFolding& folding, std::size_t hop = 256, std::size_t frame = 512);

}  // namespace symse::labels
