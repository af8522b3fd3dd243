// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "gacoop/grad_align.hpp"
#include "gacoop/numerics.hpp"
#include "gacoop/surrogate.hpp"

namespace gacoop {

inline constexpr int kOodLabel = -1;

/// One image: unit global feature, R unit region features, class label
/// (kOodLabel for OOD data).
struct Sample {
  Vec64 global;
  Mat64 regions;  // R × embed_dim, R may be 0
  int label = kOodLabel;

  std::size_t n_regions() const noexcept { return regions.rows(); }
  bool is_id() const noexcept { return label >= 0; }
};

struct RegionSelection {
  std::vector<std::size_t> selected;  // ascending region indices
  std::vector<std::size_t> ranks;     // 1-based rank of the label per region
};

struct LossBreakdown {
  double l_coop = 0.0;
  double l_ood = 0.0;
  double l_total = 0.0;
  std::size_t n_selected = 0;
};

inline Vec64 id_probability(std::span<const double> f, const TextFeatures& g, double tau) {
  return softmax(class_logits(f, g, tau));
}

/// Cross-entropy −ln p[label], taken from the log-softmax of the logits.
inline double ce_loss(std::span<const double> logits, int label) {
  require(label >= 0 && static_cast<std::size_t>(label) < logits.size(), ErrorKind::ContractViolation,
          "label out of range");
  return -log_softmax(logits)[static_cast<std::size_t>(label)];
}

inline std::vector<Vec64> region_probabilities(const Sample& s, const TextFeatures& g, double tau) {
  std::vector<Vec64> probs;
  probs.reserve(s.n_regions());
  for (std::size_t j = 0; j < s.n_regions(); ++j) probs.push_back(id_probability(s.regions.row(j), g, tau));
  return probs;
}

/// 1-based rank of `label` under descending probability; ties go to the
/// lower class index.
inline std::size_t label_rank(std::span<const double> p, int label) {
  const auto y = static_cast<std::size_t>(label);
  std::size_t rank = 1;
  for (std::size_t c = 0; c < p.size(); ++c) {
    if (p[c] > p[y] || (p[c] == p[y] && c < y)) ++rank;
  }
  return rank;
}

/// A region is ID-irrelevant when the label ranks strictly below k_rank.
inline RegionSelection select_ood_regions(const std::vector<Vec64>& region_probs, int label, std::size_t k_rank) {
  RegionSelection sel;
  sel.ranks.reserve(region_probs.size());
  for (std::size_t j = 0; j < region_probs.size(); ++j) {
    require(label >= 0 && static_cast<std::size_t>(label) < region_probs[j].size(), ErrorKind::ContractViolation,
            "selection needs a valid ID label");
    sel.ranks.push_back(label_rank(region_probs[j], label));
    if (sel.ranks.back() > k_rank) sel.selected.push_back(j);
  }
  return sel;
}

/// Mean of −H(p_j) over the selected regions; 0 when nothing is selected.
inline double ood_reg_loss(const std::vector<Vec64>& region_probs, const RegionSelection& sel) {
  if (sel.selected.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t j : sel.selected) acc -= entropy(region_probs[j]);
  return acc / static_cast<double>(sel.selected.size());
}

inline LossBreakdown combined_loss(const Sample& s, const TextFeatures& g, double tau, double lambda,
                                   std::size_t k_rank) {
  require(s.is_id(), ErrorKind::ContractViolation, "training loss needs an ID sample");
  LossBreakdown out;
  out.l_coop = ce_loss(class_logits(s.global, g, tau), s.label);
  const auto probs = region_probabilities(s, g, tau);
  const auto sel = select_ood_regions(probs, s.label, k_rank);
  out.l_ood = ood_reg_loss(probs, sel);
  out.n_selected = sel.selected.size();
  out.l_total = out.l_coop + lambda * out.l_ood;
  return out;
}

// ---------------------------------------------------------------------------
// Batch gradients
// ---------------------------------------------------------------------------

/// Everything one training step needs from a single forward pass.
struct BatchObjectives {
  FlatGradient id_grad;   // ∇ mean L_coop
  FlatGradient ood_grad;  // λ·∇ mean L_ood (or the raw gradient, see scale_ood_by_lambda)
  double l_coop = 0.0;    // batch means
  double l_ood = 0.0;
  std::size_t n_correct = 0;
  std::size_t n_selected = 0;
};

struct OodOptions {
  double lambda = 0.25;
  std::size_t k_rank = 1;
  bool scale_ood_by_lambda = true;
  bool compute_ood = true;
};

/// d(−H)/dz_k = p_k (ln p_k + H), with ln p from the log-softmax.
inline Vec64 neg_entropy_logit_grad(std::span<const double> logits) {
  const Vec64 logp = log_softmax(logits);
  double h = 0.0;
  Vec64 p(logp.size());
  for (std::size_t k = 0; k < logp.size(); ++k) {
    p[k] = std::exp(logp[k]);
    h -= p[k] * logp[k];
  }
  Vec64 out(logp.size());
  for (std::size_t k = 0; k < logp.size(); ++k) out[k] = p[k] * (logp[k] + h);
  return out;
}

inline BatchObjectives batch_objectives(std::span<const Sample> batch, const TextFeatures& g,
                                        const FrozenTextEncoder& enc, const OodOptions& opt) {
  require(!batch.empty(), ErrorKind::ContractViolation, "empty batch");
  const double tau = enc.tau();
  const std::size_t n_classes = g.n_classes();
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  Mat64 up_id(n_classes, g.embed_dim());
  Mat64 up_ood(n_classes, g.embed_dim());
  BatchObjectives out;
  bool any_selected = false;

  for (const Sample& s : batch) {
    require(s.is_id() && static_cast<std::size_t>(s.label) < n_classes, ErrorKind::ContractViolation,
            "training batch must contain ID samples with valid labels");
    const Vec64 logits = class_logits(s.global, g, tau);
    const Vec64 logp = log_softmax(logits);
    const auto y = static_cast<std::size_t>(s.label);
    out.l_coop += -logp[y] * inv_b;

    std::size_t argmax = 0;
    for (std::size_t n = 1; n < n_classes; ++n)
      if (logits[n] > logits[argmax]) argmax = n;
    if (argmax == y) ++out.n_correct;

    // softmax − onehot, scaled into ∂/∂g_n = (∂L/∂z_n) f / τ
    for (std::size_t n = 0; n < n_classes; ++n) {
      const double dz = std::exp(logp[n]) - (n == y ? 1.0 : 0.0);
      axpy(dz * inv_b / tau, s.global, up_id.row(n));
    }

    if (!opt.compute_ood || s.n_regions() == 0) continue;
    std::vector<Vec64> region_logits;
    std::vector<Vec64> probs;
    region_logits.reserve(s.n_regions());
    probs.reserve(s.n_regions());
    for (std::size_t j = 0; j < s.n_regions(); ++j) {
      region_logits.push_back(class_logits(s.regions.row(j), g, tau));
      probs.push_back(softmax(region_logits.back()));
    }
    const RegionSelection sel = select_ood_regions(probs, s.label, opt.k_rank);
    if (sel.selected.empty()) continue;
    any_selected = true;
    out.n_selected += sel.selected.size();
    out.l_ood += ood_reg_loss(probs, sel) * inv_b;
    const double w = inv_b / static_cast<double>(sel.selected.size());
    for (std::size_t j : sel.selected) {
      const Vec64 dz = neg_entropy_logit_grad(region_logits[j]);
      const auto r = s.regions.row(j);
      for (std::size_t n = 0; n < n_classes; ++n) axpy(dz[n] * w / tau, r, up_ood.row(n));
    }
  }

  out.id_grad = encode_text_vjp(enc, g, up_id);
  const double scale = opt.scale_ood_by_lambda ? opt.lambda : 1.0;
  if (!any_selected || scale == 0.0) {
    out.ood_grad = FlatGradient(enc.param_count());
  } else {
    out.ood_grad = encode_text_vjp(enc, g, up_ood);
    for (double& x : out.ood_grad.values) x *= scale;
  }
  return out;
}

/// G_i: gradient of the batch-mean cross-entropy w.r.t. the prompt.
inline FlatGradient grad_ce(std::span<const Sample> batch, const PromptParams& p, const FrozenTextEncoder& enc) {
  OodOptions opt;
  opt.compute_ood = false;
  return batch_objectives(batch, encode_text(p, enc), enc, opt).id_grad;
}

/// G_o: λ times the gradient of the batch-mean OOD regularizer. Region
/// selection is held constant (no gradient flows through the ranking).
inline FlatGradient grad_ood(std::span<const Sample> batch, const PromptParams& p, const FrozenTextEncoder& enc,
                             double lambda, std::size_t k_rank) {
  OodOptions opt;
  opt.lambda = lambda;
  opt.k_rank = k_rank;
  return batch_objectives(batch, encode_text(p, enc), enc, opt).ood_grad;
}

}  // namespace gacoop
