// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Run configuration: `key = value` lines under `[section]` headers.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "symse/dataset.hpp"
#include "symse/metrics.hpp"
#include "symse/model.hpp"
#include "symse/optim.hpp"

namespace symse::config {

enum class BookInit { kUniform, kFirstBatch };

struct TrainConfig {
  std::size_t batch_size = 32;
  ad::AdamConfig adam;
  std::size_t max_epochs = 50;
  std::size_t patience = 5;
  std::uint64_t seed = 1;
  std::size_t max_steps = 0;  // 0: no cap
  BookInit book_init = BookInit::kUniform;
  bool double_precision = false;
};

struct InterpConfig {
  double snr_db = 5.0;  // mixing level for the token statistics
};

struct RunConfig {
  model::ModelConfig model;
  TrainConfig train;
  pipeline::MixConfig mix;
  pipeline::FeatureConfig features;
  metrics::StoiConfig stoi;
  metrics::SsnrConfig ssnr;
  InterpConfig interp;
};

struct KeyInfo {
  std::string key;
  std::string type;
  std::string doc;
};

// Every accepted key in file order.
const std::vector<KeyInfo>& schema();

// Overrides are "key=value" strings applied after the text. Errors are
// ContractErrors of the form "<source>:<line>: <key>: <reason>".
RunConfig parse_config_text(const std::string& text, const std::string& source = "<config>",
                            const std::vector<std::string>& overrides = {});
RunConfig parse_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

// Fully resolved config in the input format; parsing it reproduces the value.
std::string render(const RunConfig& config);
void write_config(const std::filesystem::path& path, const RunConfig& config);

std::map<std::string, std::string> flatten(const RunConfig& config);
RunConfig unflatten(const std::map<std::string, std::string>& values);

}  // namespace symse::config
