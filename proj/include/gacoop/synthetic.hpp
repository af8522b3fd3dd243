// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gacoop/config.hpp"
#include "gacoop/feature_bank.hpp"
#include "gacoop/numerics.hpp"
#include "gacoop/surrogate.hpp"

namespace gacoop {

struct SyntheticBenchmark {
  FeatureBank train;
  FeatureBank id_test;
  FeatureBank ood;
  Mat64 id_prototypes;   // n_classes × embed_dim
  Mat64 ood_prototypes;  // n_ood_classes × embed_dim
  Mat64 backgrounds;     // n_background × embed_dim
};

namespace detail {

inline constexpr std::size_t kOodPlacementAttempts = 10000;

inline Vec64 mix(std::span<const double> a, double wa, std::span<const double> b, double wb) {
  Vec64 out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = wa * a[k] + wb * b[k];
  return out;
}

/// normalize(α·direction + (1−α)·ε), ε ~ N(0, I/d) so that noise and signal
/// both have roughly unit scale.
inline Vec64 noisy_feature(std::span<const double> direction, double alpha, SeededRng& rng) {
  const double stddev = 1.0 / std::sqrt(static_cast<double>(direction.size()));
  const Vec64 noise = rng.normal_vector(direction.size(), stddev);
  return l2_normalize(mix(direction, alpha, noise, 1.0 - alpha));
}

class BankBuilder {
 public:
  BankBuilder(const SynthConfig& cfg, Split split) {
    bank_.n_regions = static_cast<std::uint32_t>(cfg.n_regions);
    bank_.embed_dim = static_cast<std::uint32_t>(cfg.embed_dim);
    bank_.n_classes = static_cast<std::uint32_t>(cfg.n_classes);
    bank_.split = split;
  }

  /// One image of an object with prototype `proto`: a noisy global view and
  /// regions that each show the object (ρ), possibly corrupted toward a
  /// background (β), or just background.
  void add(std::span<const double> proto, int label, const SynthConfig& cfg, const Mat64& backgrounds,
           SeededRng& rng) {
    append_row(bank_.globals, noisy_feature(proto, cfg.alpha, rng));
    for (std::size_t j = 0; j < cfg.n_regions; ++j) {
      const bool object = rng.bernoulli(cfg.rho);
      const auto bg = backgrounds.row(static_cast<std::size_t>(rng.below(backgrounds.rows())));
      if (object) {
        if (rng.bernoulli(cfg.beta))
          append_row(bank_.regions, l2_normalize(mix(proto, 0.5, bg, 0.5)));
        else
          append_row(bank_.regions, noisy_feature(proto, cfg.alpha, rng));
      } else {
        append_row(bank_.regions, noisy_feature(bg, cfg.alpha, rng));
      }
    }
    bank_.labels.push_back(label);
    ++bank_.n_samples;
  }

  FeatureBank take() { return std::move(bank_); }

 private:
  FeatureBank bank_;
};

}  // namespace detail

/// Seeded desk-scale benchmark.
///
/// ID prototypes are the text features the frozen encoder produces for a
/// hidden teacher prompt drawn with `teacher_ctx_std`, so a prompt exists
/// that aligns every class perfectly. OOD prototypes are random unit vectors
/// whose cosine to every ID prototype stays below `ood_margin`.
inline SyntheticBenchmark generate_synthetic(const SynthConfig& cfg, const FrozenTextEncoder& enc) {
  validate(Config{TrainConfig{}, cfg});
  check_same_size(enc.n_classes(), cfg.n_classes, "encoder vs synthetic class count");
  check_same_size(enc.embed_dim(), cfg.embed_dim, "encoder vs synthetic embed dim");

  SeededRng rng(derive_seed(cfg.seed, streams::kData));
  const std::size_t d = cfg.embed_dim;

  PromptParams teacher(enc.context_length(), enc.token_dim());
  for (double& x : teacher.ctx) x = rng.normal(0.0, cfg.teacher_ctx_std);
  SyntheticBenchmark out;
  out.id_prototypes = encode_text(teacher, enc).features;

  out.backgrounds = Mat64(cfg.n_background, d);
  for (std::size_t b = 0; b < cfg.n_background; ++b) {
    const Vec64 u = rng.unit_vector(d);
    std::copy(u.begin(), u.end(), out.backgrounds.row(b).begin());
  }

  out.ood_prototypes = Mat64(cfg.n_ood_classes, d);
  for (std::size_t o = 0; o < cfg.n_ood_classes; ++o) {
    bool placed = false;
    for (std::size_t attempt = 0; attempt < detail::kOodPlacementAttempts && !placed; ++attempt) {
      const Vec64 u = rng.unit_vector(d);
      double max_cos = -1.0;
      for (std::size_t n = 0; n < cfg.n_classes; ++n) max_cos = std::max(max_cos, dot(u, out.id_prototypes.row(n)));
      if (max_cos < cfg.ood_margin) {
        std::copy(u.begin(), u.end(), out.ood_prototypes.row(o).begin());
        placed = true;
      }
    }
    if (!placed)
      throw Error(ErrorKind::Config, "ood_margin " + std::to_string(cfg.ood_margin) + " is infeasible: OOD prototype " +
                                         std::to_string(o) + " could not be placed");
  }

  detail::BankBuilder train(cfg, Split::Train);
  for (std::size_t n = 0; n < cfg.n_classes; ++n)
    for (std::size_t s = 0; s < cfg.train_shots; ++s)
      train.add(out.id_prototypes.row(n), static_cast<int>(n), cfg, out.backgrounds, rng);

  detail::BankBuilder test(cfg, Split::IdTest);
  for (std::size_t n = 0; n < cfg.n_classes; ++n)
    for (std::size_t s = 0; s < cfg.test_per_class; ++s)
      test.add(out.id_prototypes.row(n), static_cast<int>(n), cfg, out.backgrounds, rng);

  detail::BankBuilder ood(cfg, Split::Ood);
  for (std::size_t i = 0; i < cfg.n_ood_samples; ++i)
    ood.add(out.ood_prototypes.row(i % cfg.n_ood_classes), kOodLabel, cfg, out.backgrounds, rng);

  out.train = train.take();
  out.id_test = test.take();
  out.ood = ood.take();
  return out;
}

}  // namespace gacoop
