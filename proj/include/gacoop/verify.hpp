// SPDX-License-Identifier: Apache-2.0
#pragma once

// Self-checks shared by the grad-check command and the acceptance suite:
// central finite differences against the analytic objective gradients, and
// the geometric properties of the alignment rule.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gacoop/grad_align.hpp"
#include "gacoop/objectives.hpp"
#include "gacoop/surrogate.hpp"

namespace gacoop::verify {

// ---------------------------------------------------------------------------
// Finite-difference oracle
// ---------------------------------------------------------------------------

struct FdDims {
  std::size_t n_classes = 3;
  std::size_t context_length = 2;
  std::size_t token_dim = 4;
  std::size_t embed_dim = 6;
  std::size_t n_regions = 2;
  std::size_t batch_size = 3;
  std::size_t k_rank = 1;
  double lambda = 0.25;
  double tau = 0.01;
};

struct FdInstance {
  FrozenTextEncoder enc;
  PromptParams params;
  std::vector<Sample> batch;
  std::vector<RegionSelection> selections;  // at `params`, held fixed under perturbation
  std::size_t k_rank;
  double lambda;
};

/// Smallest gap between the label's probability and any other class's,
/// over all regions of the batch.
inline double min_rank_margin(std::span<const Sample> batch, const TextFeatures& g, double tau) {
  double margin = 1.0;
  for (const Sample& s : batch)
    for (const Vec64& p : region_probabilities(s, g, tau))
      for (std::size_t c = 0; c < p.size(); ++c)
        if (c != static_cast<std::size_t>(s.label))
          margin = std::min(margin, std::abs(p[c] - p[static_cast<std::size_t>(s.label)]));
  return margin;
}

/// Random instance; re-drawn until every region-rank margin is ≥ 1e-3 and
/// at least one region is selected (so the OOD gradient is non-trivial).
inline FdInstance draw_fd_instance(SeededRng& rng, const FdDims& dims) {
  for (;;) {
    auto enc = FrozenTextEncoder::random(dims.n_classes, dims.embed_dim, dims.context_length, dims.token_dim,
                                         dims.tau, rng.next());
    PromptParams p(dims.context_length, dims.token_dim, rng.normal_vector(dims.context_length * dims.token_dim, 0.5));
    std::vector<Sample> batch;
    for (std::size_t b = 0; b < dims.batch_size; ++b) {
      Sample s;
      s.global = rng.unit_vector(dims.embed_dim);
      s.regions = Mat64(dims.n_regions, dims.embed_dim);
      for (std::size_t j = 0; j < dims.n_regions; ++j) {
        const Vec64 r = rng.unit_vector(dims.embed_dim);
        std::copy(r.begin(), r.end(), s.regions.row(j).begin());
      }
      s.label = static_cast<int>(rng.below(dims.n_classes));
      batch.push_back(std::move(s));
    }
    const TextFeatures g = encode_text(p, enc);
    if (min_rank_margin(batch, g, dims.tau) < 1e-3) continue;
    std::vector<RegionSelection> sels;
    bool any = false;
    for (const Sample& s : batch) {
      sels.push_back(select_ood_regions(region_probabilities(s, g, dims.tau), s.label, dims.k_rank));
      any = any || !sels.back().selected.empty();
    }
    if (!any) continue;
    return FdInstance{std::move(enc), std::move(p), std::move(batch), std::move(sels), dims.k_rank, dims.lambda};
  }
}

/// Batch-mean cross-entropy through the forward path only.
inline double ce_objective(const FdInstance& in, const PromptParams& p) {
  const TextFeatures g = encode_text(p, in.enc);
  double acc = 0.0;
  for (const Sample& s : in.batch) acc += ce_loss(class_logits(s.global, g, in.enc.tau()), s.label);
  return acc / static_cast<double>(in.batch.size());
}

/// λ times the batch-mean regularizer, with the instance's fixed selections.
inline double ood_objective(const FdInstance& in, const PromptParams& p) {
  const TextFeatures g = encode_text(p, in.enc);
  double acc = 0.0;
  for (std::size_t b = 0; b < in.batch.size(); ++b)
    acc += ood_reg_loss(region_probabilities(in.batch[b], g, in.enc.tau()), in.selections[b]);
  return in.lambda * acc / static_cast<double>(in.batch.size());
}

inline Vec64 central_difference(const std::function<double(const PromptParams&)>& f, const PromptParams& p,
                                double h) {
  Vec64 grad(p.size());
  PromptParams q = p;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double x = p.ctx[i];
    q.ctx[i] = x + h;
    const double up = f(q);
    q.ctx[i] = x - h;
    const double down = f(q);
    q.ctx[i] = x;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

/// max_i |a_i − n_i| / max_i |n_i| (entrywise error relative to the
/// gradient's scale).
inline double relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  check_same_size(analytic.size(), numeric.size(), "gradient lengths");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    num = std::max(num, std::abs(analytic[i] - numeric[i]));
    den = std::max(den, std::abs(numeric[i]));
  }
  return den == 0.0 ? num : num / den;
}

struct FdReport {
  std::size_t instances = 0;
  double max_rel_err_ce = 0.0;
  double max_rel_err_ood = 0.0;
};

inline FdReport run_fd_suite(std::size_t trials, const FdDims& dims, std::uint64_t seed, double h = 1e-4) {
  SeededRng rng(seed);
  FdReport rep;
  for (std::size_t t = 0; t < trials; ++t) {
    const FdInstance in = draw_fd_instance(rng, dims);
    const FlatGradient gi = grad_ce(in.batch, in.params, in.enc);
    const FlatGradient go = grad_ood(in.batch, in.params, in.enc, in.lambda, in.k_rank);
    const Vec64 ni = central_difference([&](const PromptParams& q) { return ce_objective(in, q); }, in.params, h);
    const Vec64 no = central_difference([&](const PromptParams& q) { return ood_objective(in, q); }, in.params, h);
    rep.max_rel_err_ce = std::max(rep.max_rel_err_ce, relative_error(gi.values, ni));
    rep.max_rel_err_ood = std::max(rep.max_rel_err_ood, relative_error(go.values, no));
    ++rep.instances;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Alignment-rule properties
// ---------------------------------------------------------------------------

struct AlignReport {
  std::size_t pairs = 0;
  std::size_t obtuse_pairs = 0;
  std::size_t safety_violations = 0;       // dot(aligned, G_o) < −1e-9·|G_i|·|G_o|
  std::size_t norm_violations = 0;         // |aligned| > |G_i| + 1e-12
  std::size_t acute_identity_violations = 0;
  std::size_t residual_violations = 0;     // removed part not a non-positive multiple of G_o
  std::size_t idempotence_violations = 0;  // > 1e-12
  std::size_t covariance_violations = 0;

  std::size_t total_violations() const {
    return safety_violations + norm_violations + acute_identity_violations + residual_violations +
           idempotence_violations + covariance_violations;
  }
};

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline void check_align_pair(const FlatGradient& gi, const FlatGradient& go, double a, double b, AlignReport& rep) {
  ++rep.pairs;
  const FlatGradient out = align(gi, go);
  const double ni = gi.norm();
  const double no = go.norm();
  const double d = dot(gi, go);

  if (dot(out, go) < -1e-9 * ni * no) ++rep.safety_violations;
  if (out.norm() > ni + 1e-12) ++rep.norm_violations;

  if (no < kAlignEpsilon || d >= 0.0) {
    if (!(out == gi)) ++rep.acute_identity_violations;
  } else {
    ++rep.obtuse_pairs;
    // what align() removed must be c·G_o with c ≤ 0: the part of G_i that
    // points against G_o
    const double c = d / (no * no);
    FlatGradient residual = gi - out;
    axpy(-c, go.values, residual.values);
    if (c > 0.0 || residual.norm() > 1e-9 * std::max(ni, 1.0)) ++rep.residual_violations;
  }

  const FlatGradient twice = align(out, go);
  if (max_abs_diff(twice.values, out.values) > 1e-12 * std::max(ni, 1.0)) ++rep.idempotence_violations;

  const FlatGradient lhs = align(a * gi, b * go);
  const FlatGradient rhs = a * out;
  if (max_abs_diff(lhs.values, rhs.values) > 1e-12 * a * std::max(ni, 1.0)) ++rep.covariance_violations;
}

/// `pairs_per_dim` random pairs for each dimension. Entries are N(0, 1/dim)
/// so every vector has roughly unit norm; a quarter of the pairs are built
/// to be obtuse and a few OOD gradients are exactly zero.
inline AlignReport run_align_suite(std::size_t pairs_per_dim, const std::vector<std::size_t>& dims,
                                   std::uint64_t seed) {
  SeededRng rng(seed);
  AlignReport rep;
  for (std::size_t dim : dims) {
    const double sd = 1.0 / std::sqrt(static_cast<double>(dim));
    for (std::size_t k = 0; k < pairs_per_dim; ++k) {
      FlatGradient gi(rng.normal_vector(dim, sd));
      FlatGradient go(rng.normal_vector(dim, sd));
      if (k % 4 == 0 && dot(gi, go) > 0.0) go = -1.0 * go;
      if (k % 97 == 0) go = FlatGradient(dim);
      const double a = std::exp(rng.uniform(-3.0, 3.0));
      const double b = std::exp(rng.uniform(-3.0, 3.0));
      check_align_pair(gi, go, a, b, rep);
    }
  }
  return rep;
}

}  // namespace gacoop::verify
