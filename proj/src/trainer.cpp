// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "symse/trainer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "symse/errors.hpp"

namespace symse::pipeline {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

namespace {

template <typename Real>
std::string norms(const ad::ParamStore<Real>& params) {
  std::ostringstream s;
  s.precision(6);
  bool first = true;
  for (const auto& e : params.entries()) {
    double n = 0.0;
    for (Real v : e.tensor.values) n += static_cast<double>(v) * static_cast<double>(v);
    s << (first ? "" : ", ") << e.name << '=' << std::sqrt(n);
    first = false;
  }
  return s.str();
}

template <typename Real>
bool all_finite(const std::vector<ad::Tensor<Real>>& ts) {
  for (const auto& t : ts)
    for (Real v : t.values)
      if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace

std::string format_epoch(const EpochLog& e) {
  std::ostringstream s;
  s.precision(17);
  s << e.epoch << ',' << e.train_total << ',' << e.train_mse << ',' << e.train_commit << ',' << e.valid_mse << ','
    << e.book_perplexity;
  return s.str();
}

void write_epoch_log(std::ostream& out, const std::vector<EpochLog>& log) {
  out << kEpochLogHeader << '\n';
  for (const auto& e : log) out << format_epoch(e) << '\n';
}

template <typename Real>
Trainer<Real>::Trainer(const config::RunConfig& config)
    : config_(config), rng_(derive_seed(config.train.seed, 2)) {
  config_.model = config_.model.resolved();
  params_ = model::init_params<Real>(config_.model, derive_seed(config_.train.seed, 0));
  if (config_.model.quantizes()) {
    book_ = vq::make_uniform_book(config_.model.book_config(), derive_seed(config_.train.seed, 1));
    book_ready_ = config_.train.book_init == config::BookInit::kUniform;
  }
  adam_.config = config_.train.adam;
}

template <typename Real>
Trainer<Real>::Trainer(const config::RunConfig& config, const Checkpoint& from)
    : config_(config), rng_(derive_seed(config.train.seed, 2 + from.adam.step)) {
  config_.model = config_.model.resolved();
  params_ = from.params.template cast<Real>();
  book_ = from.book;
  if (config_.model.quantizes() && !book_)
    throw DataError("checkpoint has no symbolic book but the variant quantizes");
  adam_ = from.adam;
  adam_.config = config_.train.adam;
}

template <typename Real>
StepStats Trainer<Real>::step(const model::Batch<Real>& batch, std::size_t batch_id) {
  const auto& mc = config_.model;
  if (book_ && !book_ready_) {
    ad::Tape<Real> probe;
    auto vars = params_.bind(probe);
    model::Bound<Real> p(params_, vars);
    auto rng_copy = rng_;
    model::ForwardOptions o{true, &rng_copy, nullptr};
    auto s = model::symbolic_encode(probe, p, &*book_, mc, batch, o);
    auto h = s.pre_quant.value();
    std::vector<double> hv(h.begin(), h.end());
    book_ = vq::make_book_from_vectors(mc.book_config(), hv, derive_seed(config_.train.seed, 1));
    book_ready_ = true;
  }

  ad::Tape<Real> tape;
  auto vars = params_.bind(tape);
  model::Bound<Real> p(params_, vars);
  model::ForwardOptions opt{true, &rng_, nullptr};
  auto out = model::forward(tape, p, book_ ? &*book_ : nullptr, mc, batch, opt);
  auto losses = model::total_loss(tape, out, batch, mc);

  StepStats st;
  st.step = adam_.step + 1;
  st.total = static_cast<double>(losses.total.item());
  st.mse = static_cast<double>(losses.mse.item());
  st.commitment = losses.commitment.valid() ? static_cast<double>(losses.commitment.item()) : 0.0;
  st.aux = losses.aux.valid() ? static_cast<double>(losses.aux.item()) : 0.0;
  if (!std::isfinite(st.total))
    throw NumericError("non-finite loss at step " + std::to_string(st.step) + " (batch " + std::to_string(batch_id) +
                       "): total=" + std::to_string(st.total) + "; parameter norms: " + norms(params_));

  tape.backward(losses.total);
  auto grads = params_.gradients(tape, vars);
  if (!all_finite(grads))
    throw NumericError("non-finite gradient at step " + std::to_string(st.step) + " (batch " +
                       std::to_string(batch_id) + "); parameter norms: " + norms(params_));
  ad::adam_step(params_, grads, adam_);

  if (book_) {
    vq::ema_update<Real>(*book_, out.symbolic.pre_quant.value(), out.symbolic.indices);
    book_->count_usage(out.symbolic.indices);
  }
  return st;
}

template <typename Real>
double Trainer<Real>::evaluate_mse(const Dataset& data, std::size_t batch_size) const {
  SYMSE_REQUIRE(batch_size >= 1, "evaluate_mse: batch size must be positive");
  const std::size_t n = data.segments.size();
  if (n == 0) throw DataError("validation set is empty");
  double sum = 0.0;
  std::vector<std::size_t> idx;
  for (std::size_t b = 0; b < n; b += batch_size) {
    idx.resize(std::min(batch_size, n - b));
    std::iota(idx.begin(), idx.end(), b);
    auto batch = make_batch<Real>(data, idx);
    ad::Tape<Real> tape;
    auto vars = params_.bind(tape);
    model::Bound<Real> p(params_, vars);
    auto out = model::forward(tape, p, book_ ? &*book_ : nullptr, config_.model, batch, {});
    auto l = model::total_loss(tape, out, batch, config_.model);
    sum += static_cast<double>(l.mse.item()) * static_cast<double>(idx.size());
  }
  return sum / static_cast<double>(n);
}

template <typename Real>
Checkpoint Trainer<Real>::snapshot(std::size_t epoch, double best_valid) const {
  Checkpoint c;
  c.config = config_;
  c.params = params_.template cast<float>();
  c.book = book_;
  c.adam = adam_;
  c.epoch = epoch;
  c.best_valid = best_valid;
  return c;
}

template class Trainer<float>;
template class Trainer<double>;

namespace {

template <typename Real>
TrainResult run(const Dataset& train_set, const Dataset& valid_set, const config::RunConfig& config,
                const TrainHooks& hooks) {
  if (train_set.segments.empty()) throw DataError("training set is empty");
  if (valid_set.segments.empty()) throw DataError("validation set is empty");
  const auto& tc = config.train;
  SYMSE_REQUIRE(tc.batch_size >= 1, "train.batch_size: must be positive");
  SYMSE_REQUIRE(tc.patience >= 1, "train.patience: must be positive");

  Trainer<Real> tr(config);
  TrainResult result;
  result.best = tr.snapshot(0, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> order(train_set.segments.size());
  std::iota(order.begin(), order.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  std::size_t bad = 0;
  bool capped = false;

  for (std::size_t epoch = 1; epoch <= tc.max_epochs && !capped; ++epoch) {
    // Fisher-Yates with an explicit draw so the order does not depend on std::shuffle.
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(tr.rng()() % i);
      std::swap(order[i - 1], order[j]);
    }
    if (tr.book()) tr.book()->reset_usage();

    EpochLog e;
    e.epoch = epoch;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size(); b += tc.batch_size) {
      if (tc.max_steps && result.steps >= tc.max_steps) {
        capped = true;
        break;
      }
      std::span<const std::size_t> idx(order.data() + b, std::min(tc.batch_size, order.size() - b));
      auto st = tr.step(make_batch<Real>(train_set, idx), b / tc.batch_size);
      ++result.steps;
      ++batches;
      e.train_total += st.total;
      e.train_mse += st.mse;
      e.train_commit += st.commitment;
      if (hooks.on_step) hooks.on_step(st);
    }
    if (batches == 0) break;
    if (tc.max_steps && result.steps >= tc.max_steps) capped = true;
    e.train_total /= static_cast<double>(batches);
    e.train_mse /= static_cast<double>(batches);
    e.train_commit /= static_cast<double>(batches);
    e.valid_mse = tr.evaluate_mse(valid_set, tc.batch_size);
    if (hooks.valid_override) e.valid_mse = hooks.valid_override(epoch, e.valid_mse);
    ++result.valid_evaluations;
    e.book_perplexity = tr.book() ? vq::collapse_report(*tr.book()).perplexity : 0.0;
    result.log.push_back(e);
    if (hooks.on_epoch) hooks.on_epoch(e);

    if (e.valid_mse < best) {
      best = e.valid_mse;
      result.best = tr.snapshot(epoch, best);
      bad = 0;
    } else if (++bad >= tc.patience) {
      result.early_stopped = true;
      break;
    }
  }
  return result;
}

}  // namespace

TrainResult train(const Dataset& train_set, const Dataset& valid_set, const config::RunConfig& config,
                  const TrainHooks& hooks) {
  return config.train.double_precision ? run<double>(train_set, valid_set, config, hooks)
                                       : run<float>(train_set, valid_set, config, hooks);
}

}  // namespace symse::pipeline
