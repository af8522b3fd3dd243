// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <utility>

#include "gacoop/numerics.hpp"

namespace gacoop {

/// A gradient over the flattened prompt parameters (context length × token dim).
struct FlatGradient {
  Vec64 values;

  FlatGradient() = default;
  explicit FlatGradient(std::size_t n) : values(n, 0.0) {}
  explicit FlatGradient(Vec64 v) : values(std::move(v)) {}

  std::size_t size() const noexcept { return values.size(); }
  std::span<const double> view() const noexcept { return values; }
  double norm() const { return l2_norm(values); }

  friend bool operator==(const FlatGradient&, const FlatGradient&) = default;
};

inline FlatGradient operator+(const FlatGradient& a, const FlatGradient& b) {
  check_same_size(a.size(), b.size(), "gradient sum");
  FlatGradient out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += b.values[i];
  return out;
}

inline FlatGradient operator-(const FlatGradient& a, const FlatGradient& b) {
  check_same_size(a.size(), b.size(), "gradient difference");
  FlatGradient out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] -= b.values[i];
  return out;
}

inline FlatGradient operator*(double s, const FlatGradient& g) { return FlatGradient(scaled(g.values, s)); }

inline double dot(const FlatGradient& a, const FlatGradient& b) { return dot(a.view(), b.view()); }

/// ||G_o|| below this means there is no regularization signal to align against.
inline constexpr double kAlignEpsilon = 1e-12;

/// Gradient-aligned update direction.
///
/// Returns the ID gradient unchanged when it forms a non-obtuse angle with the
/// OOD gradient (or the OOD gradient vanishes). Otherwise returns its
/// projection onto the hyperplane orthogonal to the OOD gradient:
///
///   G_i - (G_i·G_o / ||G_o||²) G_o
///
/// The OOD gradient itself never enters the result.
inline FlatGradient align(const FlatGradient& id_grad, const FlatGradient& ood_grad,
                          double eps = kAlignEpsilon) {
  check_same_size(id_grad.size(), ood_grad.size(), "align operands");
  require(eps >= 0.0, ErrorKind::ContractViolation, "align epsilon must be non-negative");
  const double ood_sq = squared_norm(ood_grad.values);
  if (std::sqrt(ood_sq) < eps) return id_grad;
  const double d = dot(id_grad, ood_grad);
  if (d >= 0.0) return id_grad;
  FlatGradient out = id_grad;
  axpy(-d / ood_sq, ood_grad.values, out.values);
  return out;
}

struct GradientParts {
  FlatGradient parallel;
  FlatGradient orthogonal;
};

/// Splits G_i into its component along G_o (potential conflict) and the
/// remainder orthogonal to G_o.
inline GradientParts decompose(const FlatGradient& id_grad, const FlatGradient& ood_grad,
                               double eps = kAlignEpsilon) {
  check_same_size(id_grad.size(), ood_grad.size(), "decompose operands");
  const double ood_sq = squared_norm(ood_grad.values);
  require(std::sqrt(ood_sq) >= eps, ErrorKind::DegenerateVector,
          "cannot decompose against a vanishing OOD gradient");
  const double coef = dot(id_grad, ood_grad) / ood_sq;
  GradientParts parts{coef * ood_grad, id_grad};
  axpy(-1.0, parts.parallel.values, parts.orthogonal.values);
  return parts;
}

/// Running statistics on how often the two objectives disagree.
struct ConflictStats {
  std::size_t steps_total = 0;
  std::size_t steps_conflicting = 0;
  double sum_cos_angle = 0.0;
  std::size_t cos_samples = 0;
  double sum_projection_loss = 0.0;

  double conflict_ratio() const {
    return steps_total == 0 ? 0.0
                            : static_cast<double>(steps_conflicting) / static_cast<double>(steps_total);
  }
  /// Mean cosine between G_i and G_o over steps where both are non-degenerate.
  double mean_cos_angle() const {
    return cos_samples == 0 ? 0.0 : sum_cos_angle / static_cast<double>(cos_samples);
  }
  /// Mean norm removed by the projection, over all recorded steps.
  double mean_projection_loss() const {
    return steps_total == 0 ? 0.0 : sum_projection_loss / static_cast<double>(steps_total);
  }

  ConflictStats& operator+=(const ConflictStats& o) {
    steps_total += o.steps_total;
    steps_conflicting += o.steps_conflicting;
    sum_cos_angle += o.sum_cos_angle;
    cos_samples += o.cos_samples;
    sum_projection_loss += o.sum_projection_loss;
    return *this;
  }

  friend bool operator==(const ConflictStats&, const ConflictStats&) = default;
};

inline void record_conflict(ConflictStats& stats, const FlatGradient& id_grad,
                            const FlatGradient& ood_grad, double eps = kAlignEpsilon) {
  check_same_size(id_grad.size(), ood_grad.size(), "record_conflict operands");
  ++stats.steps_total;
  const double ood_norm = ood_grad.norm();
  if (ood_norm < eps) return;
  const double d = dot(id_grad, ood_grad);
  const double id_norm = id_grad.norm();
  if (id_norm > 0.0) {
    stats.sum_cos_angle += d / (id_norm * ood_norm);
    ++stats.cos_samples;
  }
  if (d < 0.0) {
    ++stats.steps_conflicting;
    // norm of the parallel component that align() discards
    stats.sum_projection_loss += -d / ood_norm;
  }
}

}  // namespace gacoop
