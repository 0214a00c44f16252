// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Minibatch Adam training with EMA book updates and early stopping.

#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <random>

#include "symse/checkpoint.hpp"
#include "symse/dataset.hpp"

namespace symse::pipeline {

// Independent seed for one stream of a run: 0 params, 1 book, 2 training rng,
// 3 + split for mixing.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

struct StepStats {
  std::size_t step = 0;
  double total = 0.0;
  double mse = 0.0;
  double commitment = 0.0;
  double aux = 0.0;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_total = 0.0;
  double train_mse = 0.0;
  double train_commit = 0.0;
  double valid_mse = 0.0;
  double book_perplexity = 0.0;
};

inline constexpr char kEpochLogHeader[] = "epoch,train_total,train_mse,train_commit,valid_mse,book_perplexity";
std::string format_epoch(const EpochLog& e);

template <typename Real>
class Trainer {
 public:
  explicit Trainer(const config::RunConfig& config);
  // Resumes parameters, book and optimizer state.
  Trainer(const config::RunConfig& config, const Checkpoint& from);

  // One Adam step on the batch; EMA book update for quantizing variants.
  // A non-finite loss throws NumericError naming the batch and parameter norms.
  StepStats step(const model::Batch<Real>& batch, std::size_t batch_id = 0);

  // Mean reconstruction MSE in inference mode over every segment.
  double evaluate_mse(const Dataset& data, std::size_t batch_size) const;

  Checkpoint snapshot(std::size_t epoch, double best_valid) const;

  const config::RunConfig& config() const { return config_; }
  const ad::ParamStore<Real>& params() const { return params_; }
  ad::ParamStore<Real>& params() { return params_; }
  const std::optional<vq::SymbolicBook>& book() const { return book_; }
  std::optional<vq::SymbolicBook>& book() { return book_; }
  const ad::AdamState& adam() const { return adam_; }
  std::mt19937_64& rng() { return rng_; }

 private:
  config::RunConfig config_;
  ad::ParamStore<Real> params_;
  std::optional<vq::SymbolicBook> book_;
  bool book_ready_ = true;
  ad::AdamState adam_;
  std::mt19937_64 rng_;
};

struct TrainHooks {
  // Replaces the measured validation loss of an epoch (testing early stopping).
  std::function<double(std::size_t epoch, double measured)> valid_override;
  std::function<void(const EpochLog&)> on_epoch;
  std::function<void(const StepStats&)> on_step;
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochLog> log;
  std::size_t steps = 0;
  std::size_t valid_evaluations = 0;
  bool early_stopped = false;
};

// Epoch loop: shuffle, minibatches, validation MSE, early stopping on
// train.patience. Returns the best-validation checkpoint.
TrainResult train(const Dataset& train_set, const Dataset& valid_set, const config::RunConfig& config,
                  const TrainHooks& hooks = {});

void write_epoch_log(std::ostream& out, const std::vector<EpochLog>& log);

}  // namespace symse::pipeline
