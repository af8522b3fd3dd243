// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <vector>

#include "gacoop/config.hpp"
#include "gacoop/feature_bank.hpp"
#include "gacoop/grad_align.hpp"
#include "gacoop/objectives.hpp"
#include "gacoop/surrogate.hpp"

namespace gacoop {

inline FrozenTextEncoder make_encoder(const TrainConfig& cfg, std::size_t n_classes, std::size_t embed_dim) {
  return FrozenTextEncoder::random(n_classes, embed_dim, cfg.context_length, cfg.token_dim, cfg.tau,
                                   derive_seed(cfg.seed, streams::kEncoder));
}

inline PromptParams initial_prompt(const TrainConfig& cfg) {
  return init_prompt(cfg.context_length, cfg.token_dim, cfg.prompt_init_zeros ? PromptInit::Zeros : PromptInit::Gaussian,
                     cfg.prompt_init_std, derive_seed(cfg.seed, streams::kPromptInit));
}

using Batch = std::vector<std::size_t>;

/// Deterministic shuffle keyed by (seed, epoch), cut into batches in order;
/// the last batch may be short.
inline std::vector<Batch> make_batches(std::size_t n_samples, std::size_t batch_size, std::uint64_t seed,
                                       std::size_t epoch) {
  require(n_samples > 0, ErrorKind::ContractViolation, "cannot batch an empty bank");
  require(batch_size > 0, ErrorKind::ContractViolation, "batch size must be positive");
  std::vector<std::size_t> order(n_samples);
  std::iota(order.begin(), order.end(), std::size_t{0});
  SeededRng rng(derive_seed(derive_seed(seed, streams::kShuffle), epoch));
  shuffle(order, rng);
  std::vector<Batch> batches;
  for (std::size_t i = 0; i < n_samples; i += batch_size)
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n_samples, i + batch_size)));
  return batches;
}

/// Learning rate at global step t of total_steps.
/// Cosine: lr·(1 + cos(π·t/T))/2, so step 0 uses the full rate.
inline double learning_rate(const TrainConfig& cfg, std::size_t t, std::size_t total_steps) {
  if (cfg.lr_schedule == LrSchedule::Constant || total_steps == 0) return cfg.lr;
  const double frac = static_cast<double>(t) / static_cast<double>(total_steps);
  return cfg.lr * (1.0 + std::cos(std::numbers::pi * frac)) / 2.0;
}

struct StepReport {
  double l_coop = 0.0;
  double l_ood = 0.0;
  std::size_t n_correct = 0;
  std::size_t n_selected = 0;
  bool conflicting = false;
};

/// Update direction for one strategy given the two objective gradients.
inline FlatGradient update_direction(const TrainConfig& cfg, const FlatGradient& id_grad, const FlatGradient& ood_grad) {
  switch (cfg.strategy) {
    case Strategy::CoOp: return id_grad;
    case Strategy::LoCoOp: return id_grad + ood_grad;
    case Strategy::GaCoOp: {
      FlatGradient g = align(id_grad, ood_grad);
      if (cfg.add_ood_gradient) g = g + ood_grad;
      return g;
    }
  }
  return id_grad;
}

/// One SGD step: p ← p − lr·G with G chosen by the strategy.
inline StepReport step(PromptParams& p, std::span<const Sample> batch, const TrainConfig& cfg,
                       const FrozenTextEncoder& enc, double lr, ConflictStats* stats = nullptr) {
  const TextFeatures g = encode_text(p, enc);
  OodOptions opt;
  opt.lambda = cfg.lambda;
  opt.k_rank = cfg.effective_k_rank(enc.n_classes());
  opt.scale_ood_by_lambda = cfg.scale_ood_by_lambda;
  const BatchObjectives obj = batch_objectives(batch, g, enc, opt);
  check_finite(obj.id_grad.values, "ID classification gradient");
  check_finite(obj.ood_grad.values, "OOD regularization gradient");

  const FlatGradient direction = update_direction(cfg, obj.id_grad, obj.ood_grad);
  check_finite(direction.values, "update direction");
  p.apply_update(direction, lr);

  if (stats) record_conflict(*stats, obj.id_grad, obj.ood_grad);
  StepReport r;
  r.l_coop = obj.l_coop;
  r.l_ood = obj.l_ood;
  r.n_correct = obj.n_correct;
  r.n_selected = obj.n_selected;
  r.conflicting = dot(obj.id_grad, obj.ood_grad) < 0.0 && obj.ood_grad.norm() >= kAlignEpsilon;
  return r;
}

struct EpochLog {
  std::size_t epoch = 0;
  double l_coop = 0.0;  // sample-weighted means of the pre-step batch losses
  double l_ood = 0.0;
  double train_accuracy = 0.0;
  double conflict_ratio = 0.0;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  std::uint64_t final_checksum = 0;
};

struct TrainResult {
  PromptParams params;
  TrainLog log;
  ConflictStats conflicts;
};

inline TrainResult train(const TrainConfig& cfg, const FeatureBank& bank, const FrozenTextEncoder& enc) {
  validate(Config{cfg, SynthConfig{}});
  require(bank.split != Split::Ood, ErrorKind::ContractViolation, "training needs an ID bank");
  require(bank.n_samples > 0, ErrorKind::ContractViolation, "training bank is empty");
  check_same_size(bank.n_classes, enc.n_classes(), "bank vs encoder class count");
  check_same_size(bank.embed_dim, enc.embed_dim(), "bank vs encoder embed dim");

  const std::vector<Sample> samples = bank.samples();
  const std::size_t batches_per_epoch = (samples.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = batches_per_epoch * cfg.epochs;

  TrainResult out{initial_prompt(cfg), {}, {}};
  std::size_t t = 0;
  std::vector<Sample> batch;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochLog entry;
    entry.epoch = epoch;
    ConflictStats epoch_stats;
    std::size_t correct = 0;
    for (const Batch& idx : make_batches(samples.size(), cfg.batch_size, cfg.seed, epoch)) {
      batch.clear();
      for (std::size_t i : idx) batch.push_back(samples[i]);
      const StepReport r = step(out.params, batch, cfg, enc, learning_rate(cfg, t++, total_steps), &epoch_stats);
      const auto w = static_cast<double>(idx.size()) / static_cast<double>(samples.size());
      entry.l_coop += r.l_coop * w;
      entry.l_ood += r.l_ood * w;
      correct += r.n_correct;
    }
    entry.train_accuracy = static_cast<double>(correct) / static_cast<double>(samples.size());
    entry.conflict_ratio = epoch_stats.conflict_ratio();
    out.conflicts += epoch_stats;
    out.log.epochs.push_back(entry);
  }
  out.log.final_checksum = checksum(out.params);
  return out;
}

}  // namespace gacoop
