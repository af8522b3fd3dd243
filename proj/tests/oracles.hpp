// SPDX-License-Identifier: Apache-2.0
#pragma once

// Test-only reference implementations. These deliberately avoid the library's
// kernels so they can be used to check them.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "gacoop/objectives.hpp"
#include "gacoop/surrogate.hpp"

namespace oracle {

/// Pairwise AUROC numerator/denominator, counting every (ID, OOD) pair.
struct PairCount {
  std::uint64_t twice_wins_plus_ties = 0;
  std::uint64_t twice_pairs = 0;
};

inline PairCount brute_auroc(const std::vector<double>& id, const std::vector<double>& ood) {
  PairCount c;
  for (double a : id)
    for (double b : ood) {
      if (a > b) c.twice_wins_plus_ties += 2;
      else if (a == b) c.twice_wins_plus_ties += 1;
      c.twice_pairs += 2;
    }
  return c;
}

/// Tries every observed ID score as a threshold, keeps the largest one
/// whose TPR reaches the target.
inline double brute_fpr(const std::vector<double>& id, const std::vector<double>& ood, double target) {
  bool found = false;
  double theta = 0.0;
  for (double cand : id) {
    std::size_t hit = 0;
    for (double s : id)
      if (s >= cand) ++hit;
    if (static_cast<double>(hit) / static_cast<double>(id.size()) >= target && (!found || cand > theta)) {
      theta = cand;
      found = true;
    }
  }
  std::size_t fp = 0;
  for (double s : ood)
    if (s >= theta) ++fp;
  return static_cast<double>(fp) / static_cast<double>(ood.size());
}

/// Naive long-double forward model: text features, per-class logits,
/// softmax, entropy. Written from the definitions, no shared helpers.
struct ReferenceModel {
  const gacoop::FrozenTextEncoder& enc;

  std::vector<std::vector<long double>> text(const std::vector<double>& ctx) const {
    const auto& w = enc.projection();
    const std::size_t n_ctx = ctx.size();
    std::vector<std::vector<long double>> g(enc.n_classes(), std::vector<long double>(enc.embed_dim()));
    for (std::size_t n = 0; n < enc.n_classes(); ++n) {
      long double sq = 0;
      for (std::size_t r = 0; r < enc.embed_dim(); ++r) {
        long double acc = 0;
        for (std::size_t c = 0; c < n_ctx; ++c) acc += static_cast<long double>(w(r, c)) * ctx[c];
        for (std::size_t k = 0; k < enc.token_dim(); ++k)
          acc += static_cast<long double>(w(r, n_ctx + k)) * enc.class_embeddings()(n, k);
        g[n][r] = acc;
        sq += acc * acc;
      }
      for (auto& x : g[n]) x /= std::sqrt(sq);
    }
    return g;
  }

  std::vector<long double> probs(const std::vector<std::vector<long double>>& g, std::span<const double> f) const {
    std::vector<long double> z(g.size());
    long double mx = -INFINITY;
    for (std::size_t n = 0; n < g.size(); ++n) {
      long double s = 0;
      for (std::size_t k = 0; k < f.size(); ++k) s += g[n][k] * f[k];
      z[n] = s / enc.tau();
      mx = std::max(mx, z[n]);
    }
    long double sum = 0;
    for (auto& x : z) sum += (x = std::exp(x - mx));
    for (auto& x : z) x /= sum;
    return z;
  }

  long double ce(const std::vector<double>& ctx, std::span<const gacoop::Sample> batch) const {
    const auto g = text(ctx);
    long double acc = 0;
    for (const auto& s : batch) acc -= std::log(probs(g, s.global)[static_cast<std::size_t>(s.label)]);
    return acc / batch.size();
  }

  /// λ·mean over samples of mean over selected regions of −H.
  long double ood(const std::vector<double>& ctx, std::span<const gacoop::Sample> batch,
                  const std::vector<gacoop::RegionSelection>& sel, double lambda) const {
    const auto g = text(ctx);
    long double acc = 0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      if (sel[b].selected.empty()) continue;
      long double per = 0;
      for (std::size_t j : sel[b].selected) {
        const auto p = probs(g, batch[b].regions.row(j));
        for (auto x : p)
          if (x > 0) per += x * std::log(x);
      }
      acc += per / sel[b].selected.size();
    }
    return lambda * acc / batch.size();
  }
};

template <typename F>
std::vector<double> central_difference(F&& f, std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const long double up = f(x);
    x[i] = x0 - h;
    const long double down = f(x);
    x[i] = x0;
    g[i] = static_cast<double>((up - down) / (2.0L * h));
  }
  return g;
}

}  // namespace oracle
