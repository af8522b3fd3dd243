// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>

#include "gacoop/grad_align.hpp"
#include "gacoop/numerics.hpp"

namespace gacoop {

/// Learnable prompt: `context_length` context tokens of `token_dim` floats,
/// stored token-major (token m occupies [m·token_dim, (m+1)·token_dim)).
struct PromptParams {
  std::size_t context_length = 0;
  std::size_t token_dim = 0;
  Vec64 ctx;

  PromptParams() = default;
  PromptParams(std::size_t m, std::size_t d) : context_length(m), token_dim(d), ctx(m * d, 0.0) {}
  PromptParams(std::size_t m, std::size_t d, Vec64 values)
      : context_length(m), token_dim(d), ctx(std::move(values)) {
    check_same_size(ctx.size(), m * d, "prompt parameter count");
    check_finite(ctx, "prompt parameters");
  }

  std::size_t size() const noexcept { return ctx.size(); }

  void apply_update(const FlatGradient& direction, double lr) {
    check_same_size(direction.size(), ctx.size(), "prompt update");
    axpy(-lr, direction.values, ctx);
  }

  friend bool operator==(const PromptParams&, const PromptParams&) = default;
};

enum class PromptInit { Gaussian, Zeros };

inline PromptParams init_prompt(std::size_t m, std::size_t d, PromptInit init, double stddev,
                                std::uint64_t seed) {
  PromptParams p(m, d);
  if (init == PromptInit::Gaussian) {
    SeededRng rng(seed);
    for (double& x : p.ctx) x = rng.normal(0.0, stddev);
  }
  return p;
}

/// 64-bit FNV-1a over the little-endian bytes of the parameters.
inline std::uint64_t checksum(const PromptParams& p) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double x : p.ctx) {
    const auto bits = std::bit_cast<std::uint64_t>(x);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

/// Frozen linear text encoder. For class n the input is the concatenation
/// [ctx_1 … ctx_M, e_n] and the class feature is the L2-normalized projection
/// W·x_n. Nothing in here is ever trained.
class FrozenTextEncoder {
 public:
  FrozenTextEncoder(Mat64 class_embeddings, Mat64 projection, std::size_t context_length, double tau)
      : class_embeddings_(std::move(class_embeddings)),
        projection_(std::move(projection)),
        context_length_(context_length),
        tau_(tau) {
    require(tau_ > 0.0 && std::isfinite(tau_), ErrorKind::ContractViolation, "temperature must be positive");
    check_same_size(projection_.cols(), (context_length_ + 1) * token_dim(), "projection input width");
  }

  /// W ~ U(±1/√fan_in), class embeddings uniform on the unit sphere.
  static FrozenTextEncoder random(std::size_t n_classes, std::size_t embed_dim, std::size_t context_length,
                                  std::size_t token_dim, double tau, std::uint64_t seed) {
    SeededRng rng(seed);
    const std::size_t fan_in = (context_length + 1) * token_dim;
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Vec64 w(embed_dim * fan_in);
    for (double& x : w) x = rng.uniform(-bound, bound);
    Vec64 e;
    e.reserve(n_classes * token_dim);
    for (std::size_t n = 0; n < n_classes; ++n) {
      const Vec64 u = rng.unit_vector(token_dim);
      e.insert(e.end(), u.begin(), u.end());
    }
    return FrozenTextEncoder(Mat64(n_classes, token_dim, std::move(e)), Mat64(embed_dim, fan_in, std::move(w)),
                             context_length, tau);
  }

  std::size_t n_classes() const noexcept { return class_embeddings_.rows(); }
  std::size_t token_dim() const noexcept { return class_embeddings_.cols(); }
  std::size_t context_length() const noexcept { return context_length_; }
  std::size_t embed_dim() const noexcept { return projection_.rows(); }
  std::size_t param_count() const noexcept { return context_length_ * token_dim(); }
  double tau() const noexcept { return tau_; }
  const Mat64& class_embeddings() const noexcept { return class_embeddings_; }
  const Mat64& projection() const noexcept { return projection_; }

  friend bool operator==(const FrozenTextEncoder&, const FrozenTextEncoder&) = default;

 private:
  Mat64 class_embeddings_;
  Mat64 projection_;
  std::size_t context_length_;
  double tau_;
};

/// Unit-norm class features plus the pre-normalization norms the backward
/// pass needs.
struct TextFeatures {
  Mat64 features;  // n_classes × embed_dim
  Vec64 pre_norms;

  std::size_t n_classes() const noexcept { return features.rows(); }
  std::size_t embed_dim() const noexcept { return features.cols(); }
  std::span<const double> operator[](std::size_t n) const { return features.row(n); }
};

inline TextFeatures encode_text(const PromptParams& p, const FrozenTextEncoder& enc) {
  check_same_size(p.context_length, enc.context_length(), "prompt context length");
  check_same_size(p.token_dim, enc.token_dim(), "prompt token dim");
  TextFeatures out{Mat64(enc.n_classes(), enc.embed_dim()), Vec64(enc.n_classes())};
  Vec64 tokens(p.ctx);
  tokens.resize(p.size() + enc.token_dim());
  for (std::size_t n = 0; n < enc.n_classes(); ++n) {
    const auto e = enc.class_embeddings().row(n);
    std::copy(e.begin(), e.end(), tokens.begin() + static_cast<std::ptrdiff_t>(p.size()));
    const Vec64 u = matvec(enc.projection(), tokens);
    const double norm = l2_norm(u);
    require(norm >= kNormEpsilon, ErrorKind::DegenerateVector,
            "text feature for class " + std::to_string(n) + " has vanishing norm");
    out.pre_norms[n] = norm;
    auto row = out.features.row(n);
    for (std::size_t k = 0; k < u.size(); ++k) row[k] = u[k] / norm;
  }
  return out;
}

/// sim(f, g_n)/τ for every class. f must already be unit-norm.
inline Vec64 class_logits(std::span<const double> f, const TextFeatures& g, double tau) {
  require(tau > 0.0, ErrorKind::ContractViolation, "temperature must be positive");
  check_same_size(f.size(), g.embed_dim(), "image feature dim");
  require(std::abs(l2_norm(f) - 1.0) <= 1e-6, ErrorKind::ContractViolation, "image feature is not unit-norm");
  Vec64 logits(g.n_classes());
  for (std::size_t n = 0; n < g.n_classes(); ++n) logits[n] = dot(f, g[n]) / tau;
  return logits;
}

/// Pulls per-class gradients w.r.t. the unit text features back to the prompt.
///
/// For each class: dL/du_n = (I − ĝ_n ĝ_nᵀ) upstream_n / ||u_n||. Since only
/// the ctx block of every x_n is trainable and shared, the result is the ctx
/// columns of Wᵀ applied to Σ_n dL/du_n.
inline FlatGradient encode_text_vjp(const FrozenTextEncoder& enc, const TextFeatures& g, const Mat64& upstream) {
  check_same_size(upstream.rows(), enc.n_classes(), "upstream classes");
  check_same_size(upstream.cols(), enc.embed_dim(), "upstream embed dim");
  check_same_size(g.n_classes(), enc.n_classes(), "text feature classes");
  Vec64 grad_u(enc.embed_dim(), 0.0);
  for (std::size_t n = 0; n < enc.n_classes(); ++n) {
    const auto up = upstream.row(n);
    const auto gh = g[n];
    const double radial = dot(gh, up);
    const double inv = 1.0 / g.pre_norms[n];
    for (std::size_t k = 0; k < grad_u.size(); ++k) grad_u[k] += (up[k] - radial * gh[k]) * inv;
  }
  const Mat64& w = enc.projection();
  FlatGradient out(enc.param_count());
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const auto row = w.row(r);
    for (std::size_t c = 0; c < out.size(); ++c) out.values[c] += row[c] * grad_u[r];
  }
  return out;
}

inline FlatGradient encode_text_vjp(const FrozenTextEncoder& enc, const PromptParams& p, const Mat64& upstream) {
  return encode_text_vjp(enc, encode_text(p, enc), upstream);
}

}  // namespace gacoop
