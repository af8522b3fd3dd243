// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "gacoop/numerics.hpp"

using namespace gacoop;

TEST(Softmax, UniformForEqualLogits) {
  const Vec64 p = softmax(Vec64{0, 0, 0});
  for (double x : p) EXPECT_DOUBLE_EQ(x, 1.0 / 3.0);
}

TEST(Softmax, StableUnderLargeLogits) {
  const Vec64 p = softmax(Vec64{1000, 0});
  EXPECT_NEAR(p[0], 1.0, 1e-12);
  EXPECT_NEAR(p[1], 0.0, 1e-12);
}

TEST(Softmax, TwoClassValue) {
  // exp-normalize of (2, 1) at 30 digits: 0.731058578630004879..., 0.268941421369995120...
  const Vec64 p = softmax(Vec64{0.2 / 0.1, 0.1 / 0.1});
  EXPECT_NEAR(p[0], 0.731058578630004879, 1e-15);
  EXPECT_NEAR(p[1], 0.268941421369995121, 1e-15);
}

TEST(Softmax, EmptyIsContractViolation) {
  try {
    softmax(Vec64{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ContractViolation);
  }
}

TEST(Softmax, SumsToOneAndShiftInvariant) {
  SeededRng rng(11);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng.below(20);
    Vec64 z(n);
    for (double& x : z) x = rng.uniform(-1e3, 1e3);
    const Vec64 p = softmax(z);
    double sum = 0.0;
    for (double x : p) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 1.0);
      sum += x;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    const double c = rng.uniform(-50.0, 50.0);
    Vec64 shifted = z;
    for (double& x : shifted) x += c;
    const Vec64 q = softmax(shifted);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(p[i], q[i], 1e-12);
  }
}

TEST(Entropy, KnownValues) {
  EXPECT_NEAR(entropy(Vec64{0.25, 0.25, 0.25, 0.25}), std::log(4.0), 1e-15);
  EXPECT_EQ(entropy(Vec64{0, 1, 0}), 0.0);
  EXPECT_NEAR(entropy(Vec64{0.5, 0.5, 0, 0}), std::log(2.0), 1e-15);
}

TEST(Entropy, RejectsInvalidDistributions) {
  EXPECT_THROW(entropy(Vec64{-0.1, 1.1}), Error);
  EXPECT_THROW(entropy(Vec64{0.5, 0.4}), Error);
}

TEST(Entropy, BoundedByLogLength) {
  SeededRng rng(12);
  for (int t = 0; t < 500; ++t) {
    const std::size_t n = 1 + rng.below(16);
    Vec64 z(n);
    for (double& x : z) x = rng.normal(0.0, 3.0);
    const double h = entropy(softmax(z));
    EXPECT_GE(h, 0.0);
    EXPECT_LE(h, std::log(static_cast<double>(n)) + 1e-12);
  }
}

TEST(L2Normalize, Basics) {
  const Vec64 u = l2_normalize(Vec64{3, 4});
  EXPECT_DOUBLE_EQ(u[0], 0.6);
  EXPECT_DOUBLE_EQ(u[1], 0.8);
  const Vec64 e = l2_normalize(Vec64{0, 1, 0});
  EXPECT_EQ(e, (Vec64{0, 1, 0}));
  try {
    l2_normalize(Vec64{0, 0});
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::DegenerateVector);
  }
}

TEST(L2Normalize, Idempotent) {
  SeededRng rng(13);
  for (int t = 0; t < 200; ++t) {
    const Vec64 u = l2_normalize(rng.normal_vector(1 + rng.below(64), 5.0));
    EXPECT_NEAR(l2_norm(u), 1.0, 1e-12);
    const Vec64 v = l2_normalize(u);
    for (std::size_t i = 0; i < u.size(); ++i) EXPECT_NEAR(u[i], v[i], 1e-12);
  }
}

TEST(DotMatvec, Examples) {
  EXPECT_EQ(dot(Vec64{1, 0}, Vec64{0, 1}), 0.0);
  EXPECT_EQ(dot(Vec64{1, -1}, Vec64{0, 1}), -1.0);
  const Vec64 v{1.5, -2.0, 3.25};
  EXPECT_EQ(matvec(Mat64::identity(3), v), v);
  try {
    dot(Vec64{1, 2}, Vec64{1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
  }
}

TEST(DotMatvec, BitwiseDeterministic) {
  SeededRng rng(14);
  const Vec64 a = rng.normal_vector(1000);
  const Vec64 b = rng.normal_vector(1000);
  const double first = dot(a, b);
  for (int t = 0; t < 10; ++t) EXPECT_EQ(dot(a, b), first);
  Mat64 m(7, 1000, rng.normal_vector(7000));
  EXPECT_EQ(matvec(m, a), matvec(m, a));
}

TEST(SeededRng, ReferenceStream) {
  // xoshiro256** seeded through splitmix64(0): the first splitmix64 output of
  // seed 0 is the well-known 0xE220A8397B1DCDAF.
  std::uint64_t s = 0;
  EXPECT_EQ(splitmix64(s), 0xE220A8397B1DCDAFULL);
  SeededRng a(42);
  SeededRng b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
  SeededRng c(43);
  EXPECT_NE(SeededRng(42).next(), c.next());
}

TEST(SeededRng, UniformAndNormalMoments) {
  SeededRng rng(15);
  double sum = 0.0;
  double sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.02);
}
