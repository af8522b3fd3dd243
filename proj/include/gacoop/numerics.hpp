// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "gacoop/error.hpp"

namespace gacoop {

/// Dense 64-bit vector. All reductions over it run left to right in index
/// order so results are bitwise reproducible.
using Vec64 = std::vector<double>;

/// Norms below this are treated as degenerate by l2_normalize.
inline constexpr double kNormEpsilon = 1e-12;

inline bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline void check_finite(std::span<const double> v, const std::string& what) {
  require(all_finite(v), ErrorKind::NumericAbort, what + " contains a non-finite entry");
}

inline void check_same_size(std::size_t a, std::size_t b, const std::string& what) {
  require(a == b, ErrorKind::DimensionMismatch,
          what + " (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
}

/// Row-major dense matrix.
class Mat64 {
 public:
  Mat64() = default;
  Mat64(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Mat64(std::size_t rows, std::size_t cols, Vec64 data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    check_same_size(data_.size(), rows * cols, "Mat64 data length");
    check_finite(data_, "Mat64");
  }

  static Mat64 identity(std::size_t n) {
    Mat64 m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * cols_, cols_);
  }
  std::span<double> row(std::size_t r) { return std::span<double>(data_).subspan(r * cols_, cols_); }

  const Vec64& data() const noexcept { return data_; }

  friend bool operator==(const Mat64&, const Mat64&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vec64 data_;
};

// ---------------------------------------------------------------------------
// Reductions and BLAS-1/2 kernels
// ---------------------------------------------------------------------------

inline double dot(std::span<const double> a, std::span<const double> b) {
  check_same_size(a.size(), b.size(), "dot operands");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double squared_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return acc;
}

inline double l2_norm(std::span<const double> v) { return std::sqrt(squared_norm(v)); }

inline Vec64 matvec(const Mat64& m, std::span<const double> v) {
  check_same_size(m.cols(), v.size(), "matvec columns");
  Vec64 out(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) out[r] = dot(m.row(r), v);
  return out;
}

/// out = mᵀ v, accumulated row by row.
inline Vec64 matvec_transposed(const Mat64& m, std::span<const double> v) {
  check_same_size(m.rows(), v.size(), "transposed matvec rows");
  Vec64 out(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) out[c] += row[c] * v[r];
  }
  return out;
}

/// y += a * x
inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  check_same_size(x.size(), y.size(), "axpy operands");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline Vec64 scaled(std::span<const double> v, double a) {
  Vec64 out(v.begin(), v.end());
  for (double& x : out) x *= a;
  return out;
}

// ---------------------------------------------------------------------------
// Stable scalar kernels
// ---------------------------------------------------------------------------

inline Vec64 log_softmax(std::span<const double> logits) {
  require(!logits.empty(), ErrorKind::ContractViolation, "softmax of an empty vector");
  check_finite(logits, "logits");
  double mx = logits[0];
  for (double x : logits) mx = std::max(mx, x);
  double sum = 0.0;
  for (double x : logits) sum += std::exp(x - mx);
  const double log_z = mx + std::log(sum);
  Vec64 out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - log_z;
  return out;
}

inline Vec64 softmax(std::span<const double> logits) {
  require(!logits.empty(), ErrorKind::ContractViolation, "softmax of an empty vector");
  check_finite(logits, "logits");
  double mx = logits[0];
  for (double x : logits) mx = std::max(mx, x);
  Vec64 out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return out;
}

/// Shannon entropy in nats with 0·ln 0 = 0.
inline double entropy(std::span<const double> p) {
  require(!p.empty(), ErrorKind::ContractViolation, "entropy of an empty vector");
  double sum = 0.0;
  for (double x : p) {
    require(x >= 0.0 && std::isfinite(x), ErrorKind::ContractViolation,
            "probability entries must be finite and non-negative");
    sum += x;
  }
  require(std::abs(sum - 1.0) <= 1e-9, ErrorKind::ContractViolation,
          "probabilities sum to " + std::to_string(sum));
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log(x);
  return h;
}

inline Vec64 l2_normalize(std::span<const double> v) {
  const double n = l2_norm(v);
  require(n > kNormEpsilon, ErrorKind::DegenerateVector,
          "cannot normalize a vector of norm " + std::to_string(n));
  Vec64 out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return out;
}

// ---------------------------------------------------------------------------
// Seeded randomness
// ---------------------------------------------------------------------------

/// One step of SplitMix64 (Steele, Lea, Flood 2014):
///   state += 0x9E3779B97F4A7C15
///   z = state; z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB; return z ^ (z >> 31)
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Sub-seed for a named stream: splitmix64 applied to seed ^ (stream * golden).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t s = seed ^ (stream * 0x9E3779B97F4A7C15ULL);
  return splitmix64(s);
}

/// Stream ids used by derive_seed across the project.
namespace streams {
inline constexpr std::uint64_t kEncoder = 1;
inline constexpr std::uint64_t kData = 2;
inline constexpr std::uint64_t kPromptInit = 3;
inline constexpr std::uint64_t kShuffle = 4;
}  // namespace streams

/// xoshiro256** 1.0 (Blackman & Vigna), state filled by four successive
/// splitmix64 outputs of the seed.
///
///   result = rotl(s1 * 5, 7) * 9
///   t = s1 << 17; s2 ^= s0; s3 ^= s1; s1 ^= s2; s0 ^= s3; s2 ^= t; s3 = rotl(s3, 45)
///
/// uniform() takes the top 53 bits: (next() >> 11) * 2^-53, in [0, 1).
/// normal() is Box-Muller on two uniforms, using the cosine branch only, with
/// u1 remapped to (0, 1] so the log is finite.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : seed_(seed) {
    std::uint64_t sm = seed;
    for (auto& s : state_) s = splitmix64(sm);
  }

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform integer in [0, n): modulo with rejection of the biased tail.
  std::uint64_t below(std::uint64_t n) {
    require(n > 0, ErrorKind::ContractViolation, "below(0)");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = next();
    while (x >= limit) x = next();
    return x % n;
  }

  Vec64 normal_vector(std::size_t n, double stddev = 1.0) {
    Vec64 v(n);
    for (double& x : v) x = normal(0.0, stddev);
    return v;
  }

  /// Uniform direction on the unit sphere.
  Vec64 unit_vector(std::size_t n) {
    for (;;) {
      Vec64 v = normal_vector(n);
      if (l2_norm(v) > 1e-6) return l2_normalize(v);
    }
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t seed_;
  std::uint64_t state_[4]{};
};

/// Fisher-Yates shuffle driven by SeededRng, from the back.
template <typename T>
void shuffle(std::vector<T>& items, SeededRng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace gacoop
