// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "gacoop/config.hpp"
#include "gacoop/error.hpp"
#include "gacoop/objectives.hpp"
#include "gacoop/surrogate.hpp"

// FBNK container, all integers and floats little-endian:
//
//   "FBNK"  u32 version (=1)  u8 section (0 = bank, 1 = checkpoint)
//
//   bank:        u32 n_samples  u32 n_regions  u32 embed_dim  u32 n_classes  u8 split
//                i32 labels[n_samples]
//                f32 globals[n_samples][embed_dim]
//                f32 regions[n_samples][n_regions][embed_dim]
//
//   checkpoint:  u8 strategy  u64 seed  u32 context_length  u32 token_dim
//                f64 ctx[context_length * token_dim]
//
// Nothing may follow the payload.

namespace gacoop {

enum class Split : std::uint8_t { Train = 0, IdTest = 1, Ood = 2 };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::IdTest: return "id_test";
    case Split::Ood: return "ood";
  }
  return "?";
}

inline constexpr std::uint32_t kFbnkVersion = 1;
inline constexpr std::uint8_t kSectionBank = 0;
inline constexpr std::uint8_t kSectionCheckpoint = 1;
/// Stored rows further than this from unit norm are re-normalized on load.
inline constexpr double kBankNormTolerance = 1e-4;

/// Pre-encoded image features. Storage is 32-bit; samples are promoted to
/// 64-bit when materialized.
struct FeatureBank {
  std::uint32_t n_samples = 0;
  std::uint32_t n_regions = 0;
  std::uint32_t embed_dim = 0;
  std::uint32_t n_classes = 0;
  Split split = Split::Train;
  std::vector<std::int32_t> labels;
  std::vector<float> globals;
  std::vector<float> regions;

  /// Sample i promoted to 64-bit, every row re-normalized in 64-bit so the
  /// 32-bit storage rounding does not leak into the unit-norm contracts.
  Sample sample(std::size_t i) const {
    const std::size_t d = embed_dim;
    auto promote = [d](const std::vector<float>& src, std::size_t row) {
      const auto first = src.begin() + static_cast<std::ptrdiff_t>(row * d);
      return l2_normalize(Vec64(first, first + static_cast<std::ptrdiff_t>(d)));
    };
    Sample s;
    s.global = promote(globals, i);
    s.regions = Mat64(n_regions, d);
    for (std::size_t j = 0; j < n_regions; ++j) {
      const Vec64 r = promote(regions, i * n_regions + j);
      std::copy(r.begin(), r.end(), s.regions.row(j).begin());
    }
    s.label = labels[i];
    return s;
  }

  std::vector<Sample> samples() const {
    std::vector<Sample> out;
    out.reserve(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) out.push_back(sample(i));
    return out;
  }

  friend bool operator==(const FeatureBank&, const FeatureBank&) = default;
};

/// Appends `v` to the float rows of a bank being built.
inline void append_row(std::vector<float>& dst, std::span<const double> v) {
  for (double x : v) dst.push_back(static_cast<float>(x));
}

struct Checkpoint {
  Strategy strategy = Strategy::GaCoOp;
  std::uint64_t seed = 0;
  PromptParams params;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

namespace detail {

class ByteWriter {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  template <typename U>
  void le(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) buf_.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xffU));
  }
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) { le(v); }
  void u64(std::uint64_t v) { le(v); }
  void i32(std::int32_t v) { le(static_cast<std::uint32_t>(v)); }
  void f32(float v) { le(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v)); }
  const std::vector<unsigned char>& data() const { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::vector<unsigned char>& buf) : buf_(buf) {}

  void need(std::uint64_t n) const {
    if (n > buf_.size() - pos_)
      throw Error(ErrorKind::Truncated, "need " + std::to_string(n) + " bytes at offset " + std::to_string(pos_) +
                                            ", file has " + std::to_string(buf_.size()));
  }
  template <typename U>
  U le() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(buf_[pos_ + i]) << (8 * i));
    pos_ += sizeof(U);
    return v;
  }
  std::uint8_t u8() { return le<std::uint8_t>(); }
  std::uint32_t u32() { return le<std::uint32_t>(); }
  std::uint64_t u64() { return le<std::uint64_t>(); }
  std::int32_t i32() { return static_cast<std::int32_t>(le<std::uint32_t>()); }
  float f32() { return std::bit_cast<float>(le<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }
  std::size_t remaining() const { return buf_.size() - pos_; }

 private:
  const std::vector<unsigned char>& buf_;
  std::size_t pos_ = 0;
};

inline void write_file(const std::string& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::Io, "write failed for '" + path + "'");
}

inline std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_header(ByteWriter& w, std::uint8_t section) {
  w.bytes("FBNK", 4);
  w.u32(kFbnkVersion);
  w.u8(section);
}

inline void read_header(ByteReader& r, std::uint8_t expected_section) {
  if (r.remaining() < 4) throw Error(ErrorKind::BadMagic, "file shorter than the magic bytes");
  const char magic[4] = {static_cast<char>(r.u8()), static_cast<char>(r.u8()), static_cast<char>(r.u8()),
                         static_cast<char>(r.u8())};
  if (std::memcmp(magic, "FBNK", 4) != 0) throw Error(ErrorKind::BadMagic, "expected 'FBNK'");
  const auto version = r.u32();
  if (version != kFbnkVersion)
    throw Error(ErrorKind::VersionMismatch, "version " + std::to_string(version) + ", expected " +
                                                std::to_string(kFbnkVersion));
  const auto section = r.u8();
  if (section != expected_section)
    throw Error(ErrorKind::InvariantViolation, "section tag " + std::to_string(section) + ", expected " +
                                                   std::to_string(expected_section));
}

/// Checks one stored row; re-normalizes it in place when its norm drifted.
inline void check_row(std::span<float> row, const std::string& where, std::vector<std::string>* warnings) {
  double sq = 0.0;
  for (float x : row) {
    if (!std::isfinite(x)) throw Error(ErrorKind::InvariantViolation, where + " has a non-finite entry");
    sq += static_cast<double>(x) * static_cast<double>(x);
  }
  const double norm = std::sqrt(sq);
  if (norm < kNormEpsilon) throw Error(ErrorKind::InvariantViolation, where + " has zero norm");
  if (std::abs(norm - 1.0) > kBankNormTolerance) {
    for (float& x : row) x = static_cast<float>(static_cast<double>(x) / norm);
    if (warnings) warnings->push_back(where + " had norm " + std::to_string(norm) + "; re-normalized");
  }
}

}  // namespace detail

/// Throws InvariantViolation on a bank that could not have been written
/// by a conforming producer.
inline void validate_bank(const FeatureBank& b) {
  const std::uint64_t n = b.n_samples;
  const std::uint64_t d = b.embed_dim;
  require(b.labels.size() == n && b.globals.size() == n * d &&
              b.regions.size() == n * static_cast<std::uint64_t>(b.n_regions) * d,
          ErrorKind::InvariantViolation, "array lengths disagree with the header counts");
  require(b.embed_dim > 0, ErrorKind::InvariantViolation, "embed_dim must be positive");
  require(static_cast<std::uint8_t>(b.split) <= 2, ErrorKind::InvariantViolation, "unknown split tag");
  for (std::size_t i = 0; i < b.labels.size(); ++i) {
    const auto y = b.labels[i];
    const bool ok = b.split == Split::Ood ? y == kOodLabel
                                          : y >= 0 && static_cast<std::uint32_t>(y) < b.n_classes;
    require(ok, ErrorKind::InvariantViolation,
            "label " + std::to_string(y) + " of sample " + std::to_string(i) + " invalid for split " +
                to_string(b.split));
  }
}

inline std::vector<unsigned char> encode_bank(const FeatureBank& b) {
  validate_bank(b);
  detail::ByteWriter w;
  detail::write_header(w, kSectionBank);
  w.u32(b.n_samples);
  w.u32(b.n_regions);
  w.u32(b.embed_dim);
  w.u32(b.n_classes);
  w.u8(static_cast<std::uint8_t>(b.split));
  for (auto y : b.labels) w.i32(y);
  for (float x : b.globals) w.f32(x);
  for (float x : b.regions) w.f32(x);
  return w.data();
}

inline FeatureBank decode_bank(const std::vector<unsigned char>& bytes, std::vector<std::string>* warnings = nullptr) {
  detail::ByteReader r(bytes);
  detail::read_header(r, kSectionBank);
  FeatureBank b;
  b.n_samples = r.u32();
  b.n_regions = r.u32();
  b.embed_dim = r.u32();
  b.n_classes = r.u32();
  const auto split = r.u8();
  require(split <= 2, ErrorKind::InvariantViolation, "unknown split tag " + std::to_string(split));
  b.split = static_cast<Split>(split);

  const std::uint64_t n = b.n_samples;
  const std::uint64_t d = b.embed_dim;
  // checked in long double first: the u32 header counts can overflow u64
  const long double approx = 4.0L * n * (1.0L + d + static_cast<long double>(b.n_regions) * d);
  if (approx > static_cast<long double>(r.remaining()))
    throw Error(ErrorKind::Truncated, "header announces more payload than the file holds");
  r.need(4 * n + 4 * n * d + 4 * n * b.n_regions * d);
  b.labels.resize(n);
  for (auto& y : b.labels) y = r.i32();
  b.globals.resize(n * d);
  for (auto& x : b.globals) x = r.f32();
  b.regions.resize(n * b.n_regions * d);
  for (auto& x : b.regions) x = r.f32();
  if (r.remaining() != 0)
    throw Error(ErrorKind::InvariantViolation, std::to_string(r.remaining()) + " trailing bytes after payload");

  validate_bank(b);
  for (std::size_t i = 0; i < n; ++i) {
    detail::check_row(std::span<float>(b.globals).subspan(i * d, d), "global feature " + std::to_string(i), warnings);
    for (std::size_t j = 0; j < b.n_regions; ++j)
      detail::check_row(std::span<float>(b.regions).subspan((i * b.n_regions + j) * d, d),
                        "region " + std::to_string(j) + " of sample " + std::to_string(i), warnings);
  }
  return b;
}

inline void write_bank(const FeatureBank& b, const std::string& path) { detail::write_file(path, encode_bank(b)); }

inline FeatureBank read_bank(const std::string& path, std::vector<std::string>* warnings = nullptr) {
  return decode_bank(detail::read_file(path), warnings);
}

inline std::vector<unsigned char> encode_checkpoint(const Checkpoint& c) {
  detail::ByteWriter w;
  detail::write_header(w, kSectionCheckpoint);
  w.u8(static_cast<std::uint8_t>(c.strategy));
  w.u64(c.seed);
  w.u32(static_cast<std::uint32_t>(c.params.context_length));
  w.u32(static_cast<std::uint32_t>(c.params.token_dim));
  for (double x : c.params.ctx) w.f64(x);
  return w.data();
}

inline Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes) {
  detail::ByteReader r(bytes);
  detail::read_header(r, kSectionCheckpoint);
  Checkpoint c;
  const auto strategy = r.u8();
  require(strategy <= 2, ErrorKind::InvariantViolation, "unknown strategy tag " + std::to_string(strategy));
  c.strategy = static_cast<Strategy>(strategy);
  c.seed = r.u64();
  const std::uint64_t m = r.u32();
  const std::uint64_t d = r.u32();
  r.need(8 * m * d);  // m, d < 2^32 so this cannot overflow
  Vec64 values(m * d);
  for (auto& x : values) x = r.f64();
  if (r.remaining() != 0)
    throw Error(ErrorKind::InvariantViolation, std::to_string(r.remaining()) + " trailing bytes after payload");
  require(all_finite(values), ErrorKind::InvariantViolation, "checkpoint holds non-finite parameters");
  c.params = PromptParams(m, d, std::move(values));
  return c;
}

inline void write_checkpoint(const Checkpoint& c, const std::string& path) {
  detail::write_file(path, encode_checkpoint(c));
}

inline Checkpoint read_checkpoint(const std::string& path) { return decode_checkpoint(detail::read_file(path)); }

}  // namespace gacoop
