// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gacoop/feature_bank.hpp"
#include "gacoop/grad_align.hpp"
#include "gacoop/objectives.hpp"
#include "gacoop/surrogate.hpp"

namespace gacoop {

/// Maximum softmax probability over the classes (higher = more ID-like).
inline double mcm_score(std::span<const double> f, const TextFeatures& g, double tau) {
  const Vec64 p = id_probability(f, g, tau);
  return *std::max_element(p.begin(), p.end());
}

/// AUROC as an exact rational: (2·wins + ties) / (2·|ID|·|OOD|).
struct AurocCounts {
  std::uint64_t twice_wins_plus_ties = 0;
  std::uint64_t twice_pairs = 0;

  double value() const { return static_cast<double>(twice_wins_plus_ties) / static_cast<double>(twice_pairs); }
};

inline AurocCounts auroc_counts(std::span<const double> id_scores, std::span<const double> ood_scores) {
  require(!id_scores.empty() && !ood_scores.empty(), ErrorKind::ContractViolation, "AUROC needs both score sets");
  std::vector<double> ood(ood_scores.begin(), ood_scores.end());
  std::sort(ood.begin(), ood.end());
  AurocCounts c;
  for (double s : id_scores) {
    const auto [lo, hi] = std::equal_range(ood.begin(), ood.end(), s);
    const auto below = static_cast<std::uint64_t>(lo - ood.begin());
    const auto tied = static_cast<std::uint64_t>(hi - lo);
    c.twice_wins_plus_ties += 2 * below + tied;
  }
  c.twice_pairs = 2 * static_cast<std::uint64_t>(id_scores.size()) * ood.size();
  return c;
}

/// Mann-Whitney AUROC: P(ID score > OOD score) with ties counted half.
inline double auroc(std::span<const double> id_scores, std::span<const double> ood_scores) {
  return auroc_counts(id_scores, ood_scores).value();
}

/// Fraction of OOD scores at or above θ, where θ is the largest observed ID
/// score that still keeps at least `tpr_target` of the ID scores at or above it.
inline double fpr_at_tpr(std::span<const double> id_scores, std::span<const double> ood_scores,
                         double tpr_target = 0.95) {
  require(!id_scores.empty() && !ood_scores.empty(), ErrorKind::ContractViolation, "FPR needs both score sets");
  require(tpr_target > 0.0 && tpr_target <= 1.0, ErrorKind::ContractViolation, "TPR target must lie in (0, 1]");
  std::vector<double> id(id_scores.begin(), id_scores.end());
  std::sort(id.begin(), id.end(), std::greater<>());
  const double n_id = static_cast<double>(id.size());
  // smallest k with k/n ≥ target, using the same comparison a sweep would
  std::size_t k = 1;
  while (static_cast<double>(k) / n_id < tpr_target) ++k;
  const double theta = id[k - 1];
  std::size_t above = 0;
  for (double s : ood_scores)
    if (s >= theta) ++above;
  return static_cast<double>(above) / static_cast<double>(ood_scores.size());
}

/// Index of the largest entry; ties go to the lowest index.
inline std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

inline double id_accuracy(std::span<const Sample> samples, const TextFeatures& g, double tau) {
  require(!samples.empty(), ErrorKind::ContractViolation, "accuracy of an empty set");
  std::size_t correct = 0;
  for (const Sample& s : samples) {
    require(s.is_id(), ErrorKind::ContractViolation, "accuracy needs ID samples");
    if (argmax(id_probability(s.global, g, tau)) == static_cast<std::size_t>(s.label)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

struct OodResult {
  std::string dataset;
  double fpr95 = 0.0;
  double auroc = 0.0;
};

struct EvalReport {
  std::vector<OodResult> per_dataset;
  double avg_fpr95 = 0.0;
  double avg_auroc = 0.0;
  double id_accuracy = 0.0;
  ConflictStats conflicts;
};

struct NamedBank {
  std::string name;
  FeatureBank bank;
};

inline std::vector<double> mcm_scores(const FeatureBank& bank, const TextFeatures& g, double tau) {
  std::vector<double> scores;
  scores.reserve(bank.n_samples);
  for (std::size_t i = 0; i < bank.n_samples; ++i) scores.push_back(mcm_score(bank.sample(i).global, g, tau));
  return scores;
}

inline EvalReport evaluate(const PromptParams& p, const FrozenTextEncoder& enc, const FeatureBank& id_test,
                           const std::vector<NamedBank>& ood_banks) {
  require(id_test.n_samples > 0, ErrorKind::ContractViolation, "ID test bank is empty");
  require(!ood_banks.empty(), ErrorKind::ContractViolation, "no OOD banks to evaluate");
  check_same_size(id_test.embed_dim, enc.embed_dim(), "ID bank vs encoder embed dim");
  check_same_size(id_test.n_classes, enc.n_classes(), "ID bank vs encoder class count");
  const TextFeatures g = encode_text(p, enc);
  const double tau = enc.tau();

  const std::vector<Sample> id_samples = id_test.samples();
  EvalReport report;
  report.id_accuracy = id_accuracy(id_samples, g, tau);
  std::vector<double> id_scores;
  id_scores.reserve(id_samples.size());
  for (const Sample& s : id_samples) id_scores.push_back(mcm_score(s.global, g, tau));

  for (const NamedBank& nb : ood_banks) {
    require(nb.bank.n_samples > 0, ErrorKind::ContractViolation, "OOD bank '" + nb.name + "' is empty");
    check_same_size(nb.bank.embed_dim, enc.embed_dim(), "OOD bank '" + nb.name + "' embed dim");
    const std::vector<double> ood_scores = mcm_scores(nb.bank, g, tau);
    report.per_dataset.push_back({nb.name, fpr_at_tpr(id_scores, ood_scores, 0.95), auroc(id_scores, ood_scores)});
  }
  for (const OodResult& r : report.per_dataset) {
    report.avg_fpr95 += r.fpr95;
    report.avg_auroc += r.auroc;
  }
  report.avg_fpr95 /= static_cast<double>(report.per_dataset.size());
  report.avg_auroc /= static_cast<double>(report.per_dataset.size());
  return report;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline constexpr const char* kReportCsvHeader = "strategy,dataset,fpr95,auroc,id_acc,conflict_ratio,seed";

inline std::string format_fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

/// One row per OOD dataset plus an `average` row, without the header.
inline std::string report_csv_rows(const EvalReport& r, const std::string& strategy, std::uint64_t seed) {
  std::string out;
  auto row = [&](const std::string& dataset, double fpr, double au) {
    out += strategy + ',' + dataset + ',' + format_fixed(fpr) + ',' + format_fixed(au) + ',' +
           format_fixed(r.id_accuracy) + ',' + format_fixed(r.conflicts.conflict_ratio()) + ',' +
           std::to_string(seed) + '\n';
  };
  for (const OodResult& d : r.per_dataset) row(d.dataset, d.fpr95, d.auroc);
  row("average", r.avg_fpr95, r.avg_auroc);
  return out;
}

}  // namespace gacoop
