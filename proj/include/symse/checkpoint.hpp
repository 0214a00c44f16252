// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Checkpoint container: "SYMSE001", u64 LE header length, JSON header, f32 payload.

#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>

#include "symse/config.hpp"
#include "symse/optim.hpp"
#include "symse/vq.hpp"

namespace symse::pipeline {

inline constexpr char kCheckpointMagic[] = "SYMSE001";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  config::RunConfig config;
  ad::ParamStore<float> params;
  std::optional<vq::SymbolicBook> book;  // quantizing variants
  ad::AdamState adam;
  std::size_t epoch = 0;
  double best_valid = std::numeric_limits<double>::infinity();
};

// Book arrays and Adam moments are stored as f32 like the parameters.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);

// Shapes are checked against the layout of the stored config.
Checkpoint load_checkpoint(const std::filesystem::path& path);
// As above, and every parameter must also match `expected`'s layout.
Checkpoint load_checkpoint(const std::filesystem::path& path, const model::ModelConfig& expected);

}  // namespace symse::pipeline
