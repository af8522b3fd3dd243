// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "gacoop/grad_align.hpp"
#include "gacoop/verify.hpp"

using namespace gacoop;

namespace {
FlatGradient v2(double a, double b) { return FlatGradient(Vec64{a, b}); }
}  // namespace

TEST(Align, AcuteBranchReturnsIdGradient) { EXPECT_EQ(align(v2(1, 0), v2(1, 1)), v2(1, 0)); }

TEST(Align, ObtuseBranchProjects) {
  const FlatGradient out = align(v2(1, -1), v2(0, 1));
  EXPECT_EQ(out, v2(1, 0));
  EXPECT_EQ(dot(out, v2(0, 1)), 0.0);
}

TEST(Align, DegenerateOodGradient) {
  EXPECT_EQ(align(v2(-3, 2), v2(0, 0)), v2(-3, 2));
  EXPECT_EQ(align(v2(-3, 2), v2(1e-13, 0)), v2(-3, 2));
}

TEST(Align, OrthogonalCountsAsAcute) { EXPECT_EQ(align(v2(1, 0), v2(0, 1)), v2(1, 0)); }

TEST(Align, LengthMismatch) {
  try {
    align(v2(1, 0), FlatGradient(Vec64{1, 2, 3}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
  }
}

TEST(Decompose, Examples) {
  auto parts = decompose(v2(1, -1), v2(0, 1));
  EXPECT_EQ(parts.parallel, v2(0, -1));
  EXPECT_EQ(parts.orthogonal, v2(1, 0));

  parts = decompose(v2(2, 4), v2(1, 2));
  EXPECT_EQ(parts.orthogonal, v2(0, 0));

  parts = decompose(v2(2, -1), v2(1, 2));
  EXPECT_EQ(parts.parallel, v2(0, 0));
  EXPECT_THROW(decompose(v2(1, 1), v2(0, 0)), Error);
}

TEST(Decompose, PartsSumToInput) {
  SeededRng rng(5);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng.below(64);
    const FlatGradient gi(rng.normal_vector(n));
    const FlatGradient go(rng.normal_vector(n));
    const auto parts = decompose(gi, go);
    const FlatGradient sum = parts.parallel + parts.orthogonal;
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(sum.values[i], gi.values[i], 1e-12);
    EXPECT_NEAR(dot(parts.orthogonal, go), 0.0, 1e-12 * gi.norm() * go.norm() + 1e-15);
  }
}

TEST(ConflictStats, AcuteStream) {
  ConflictStats s;
  for (int i = 0; i < 10; ++i) record_conflict(s, v2(1, 0), v2(1, 1));
  EXPECT_EQ(s.steps_total, 10u);
  EXPECT_EQ(s.steps_conflicting, 0u);
  EXPECT_NEAR(s.mean_cos_angle(), 1.0 / std::sqrt(2.0), 1e-15);
}

TEST(ConflictStats, SingleObtuseStep) {
  ConflictStats s;
  record_conflict(s, v2(1, -1), v2(0, 1));
  EXPECT_EQ(s.steps_conflicting, 1u);
  EXPECT_DOUBLE_EQ(s.mean_projection_loss(), 1.0);  // ||parallel|| = ||(0, −1)||
}

TEST(ConflictStats, MixedStreamMatchesReplay) {
  SeededRng rng(6);
  ConflictStats s;
  std::vector<std::pair<FlatGradient, FlatGradient>> stream;
  for (int t = 0; t < 500; ++t) {
    FlatGradient gi(rng.normal_vector(8));
    FlatGradient go = t % 50 == 0 ? FlatGradient(8) : FlatGradient(rng.normal_vector(8));
    record_conflict(s, gi, go);
    stream.emplace_back(std::move(gi), std::move(go));
  }
  // replay: count obtuse pairs and removed norms directly from decompose
  std::size_t conflicts = 0;
  double removed = 0.0;
  for (const auto& [gi, go] : stream) {
    if (go.norm() < kAlignEpsilon || dot(gi, go) >= 0.0) continue;
    ++conflicts;
    removed += decompose(gi, go).parallel.norm();
  }
  EXPECT_EQ(s.steps_total, 500u);
  EXPECT_EQ(s.steps_conflicting, conflicts);
  EXPECT_NEAR(s.mean_projection_loss(), removed / 500.0, 1e-12);
  EXPECT_LE(s.steps_conflicting, s.steps_total);
}

TEST(AlignProperties, RandomPairs) {
  const auto rep = verify::run_align_suite(500, {2, 16, 512, 4096}, 7);
  EXPECT_EQ(rep.pairs, 2000u);
  EXPECT_GT(rep.obtuse_pairs, 0u);
  EXPECT_EQ(rep.total_violations(), 0u);
}

TEST(AlignProperties, NormEqualityOnNonProjectingBranches) {
  SeededRng rng(8);
  for (int t = 0; t < 1000; ++t) {
    const FlatGradient gi(rng.normal_vector(16));
    const FlatGradient go(rng.normal_vector(16));
    const FlatGradient out = align(gi, go);
    if (dot(gi, go) >= 0.0) EXPECT_EQ(out.norm(), gi.norm());
    else EXPECT_LT(out.norm(), gi.norm());
  }
}
