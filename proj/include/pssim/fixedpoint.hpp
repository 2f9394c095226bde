#pragma once

// 32-bit saturating fixed-point arithmetic and the table-based sigmoid used
// by the simulated workers. All rounding is round-to-nearest-even so results
// are bit-exact across platforms; overflow saturates to the format's range
// extremes and is tallied in an OverflowCounter instead of raising.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <span>
#include <vector>

#include "pssim/errors.hpp"

namespace pssim {

inline constexpr int kDefaultFracBits = 16;        // Q16.16 run format
inline constexpr int kLutEntryFracBits = 30;       // Q2.30 table entries
inline constexpr std::size_t kDefaultLutEntries = std::size_t{1} << 20;
inline constexpr double kDefaultLutLo = -16.0;
inline constexpr double kDefaultLutHi = 16.0;

// Number of fractional bits of a 32-bit two's-complement fixed-point value.
struct FixedFormat {
  int frac_bits = kDefaultFracBits;

  double step() const { return std::ldexp(1.0, -frac_bits); }
  double max_value() const {
    return std::ldexp(static_cast<double>(std::numeric_limits<std::int32_t>::max()),
                      -frac_bits);
  }
  double min_value() const {
    return std::ldexp(static_cast<double>(std::numeric_limits<std::int32_t>::min()),
                      -frac_bits);
  }
  bool valid() const { return frac_bits >= 0 && frac_bits <= 30; }
  friend bool operator==(FixedFormat, FixedFormat) = default;
};

// Raw fixed-point value. The format is carried by context, not per value.
struct fx32 {
  std::int32_t raw = 0;
  friend bool operator==(fx32, fx32) = default;
};

// Tallies saturation events. Shared across worker threads, so atomic; the
// total is order-independent and therefore deterministic.
class OverflowCounter {
 public:
  void bump() { count_.fetch_add(1, std::memory_order_relaxed); }
  std::uint64_t value() const { return count_.load(std::memory_order_relaxed); }
  void reset() { count_.store(0, std::memory_order_relaxed); }

 private:
  std::atomic<std::uint64_t> count_{0};
};

namespace detail {

// Integer division with round-to-nearest, ties to even. den must be > 0.
inline std::int64_t div_round_nearest_even(std::int64_t num, std::int64_t den) {
  std::int64_t q = num / den;  // truncates toward zero
  const std::int64_t r = num % den;
  if (r == 0) return q;
  const std::int64_t twice_r = std::llabs(r) * 2;
  if (twice_r > den || (twice_r == den && (q & 1))) {
    q += (num >= 0) ? 1 : -1;
  }
  return q;
}

inline std::int64_t shift_right_rne(std::int64_t value, int bits) {
  if (bits == 0) return value;
  return div_round_nearest_even(value, std::int64_t{1} << bits);
}

inline std::int32_t saturate_i64(std::int64_t v, OverflowCounter* overflow) {
  if (v > std::numeric_limits<std::int32_t>::max()) {
    if (overflow) overflow->bump();
    return std::numeric_limits<std::int32_t>::max();
  }
  if (v < std::numeric_limits<std::int32_t>::min()) {
    if (overflow) overflow->bump();
    return std::numeric_limits<std::int32_t>::min();
  }
  return static_cast<std::int32_t>(v);
}

}  // namespace detail

inline double decode(fx32 v, FixedFormat fmt) {
  return std::ldexp(static_cast<double>(v.raw), -fmt.frac_bits);
}

// Round-to-nearest-even of x / 2^-frac_bits, saturating outside the
// representable range. NaN encodes to zero and counts as an overflow since
// it can only arise from a misconfigured pipeline.
inline fx32 encode(double x, FixedFormat fmt, OverflowCounter* overflow = nullptr) {
  if (std::isnan(x)) {
    if (overflow) overflow->bump();
    return fx32{0};
  }
  const double scaled = std::ldexp(x, fmt.frac_bits);
  const double lower = std::floor(scaled);
  const double frac = scaled - lower;
  double rounded;
  if (frac > 0.5) {
    rounded = lower + 1.0;
  } else if (frac < 0.5) {
    rounded = lower;
  } else {
    rounded = (std::fmod(lower, 2.0) == 0.0) ? lower : lower + 1.0;
  }
  if (rounded > static_cast<double>(std::numeric_limits<std::int32_t>::max())) {
    if (overflow) overflow->bump();
    return fx32{std::numeric_limits<std::int32_t>::max()};
  }
  if (rounded < static_cast<double>(std::numeric_limits<std::int32_t>::min())) {
    if (overflow) overflow->bump();
    return fx32{std::numeric_limits<std::int32_t>::min()};
  }
  return fx32{static_cast<std::int32_t>(rounded)};
}

inline fx32 fixed_add(fx32 a, fx32 b, OverflowCounter* overflow = nullptr) {
  return fx32{detail::saturate_i64(
      static_cast<std::int64_t>(a.raw) + b.raw, overflow)};
}

inline fx32 fixed_sub(fx32 a, fx32 b, OverflowCounter* overflow = nullptr) {
  return fx32{detail::saturate_i64(
      static_cast<std::int64_t>(a.raw) - b.raw, overflow)};
}

inline fx32 fixed_neg(fx32 a, OverflowCounter* overflow = nullptr) {
  return fx32{detail::saturate_i64(-static_cast<std::int64_t>(a.raw), overflow)};
}

// Widened 64-bit product, shifted back by frac_bits with round-to-nearest-
// even, saturated to 32 bits.
inline fx32 fixed_mul(fx32 a, fx32 b, FixedFormat fmt,
                      OverflowCounter* overflow = nullptr) {
  const std::int64_t product = static_cast<std::int64_t>(a.raw) * b.raw;
  return fx32{detail::saturate_i64(
      detail::shift_right_rne(product, fmt.frac_bits), overflow)};
}

// Dot product with a single 64-bit accumulator over raw products, in index
// order, with one shift + saturation at the end. Deterministic and exact as
// long as the raw-product sum fits in 64 bits.
inline fx32 fixed_dot(std::span<const fx32> a, std::span<const fx32> b,
                      FixedFormat fmt, OverflowCounter* overflow = nullptr) {
  if (a.size() != b.size()) {
    throw DimensionError("fixed_dot: length mismatch " +
                         std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  }
  std::int64_t acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    acc += static_cast<std::int64_t>(a[i].raw) * b[i].raw;
  }
  return fx32{detail::saturate_i64(
      detail::shift_right_rne(acc, fmt.frac_bits), overflow)};
}

// Converts a value between fractional-bit counts. Widening shifts left
// (saturating), narrowing shifts right with round-to-nearest-even.
inline fx32 rescale(fx32 v, FixedFormat from, FixedFormat to,
                    OverflowCounter* overflow = nullptr) {
  const int diff = to.frac_bits - from.frac_bits;
  if (diff == 0) return v;
  if (diff > 0) {
    return fx32{detail::saturate_i64(
        static_cast<std::int64_t>(v.raw) << diff, overflow)};
  }
  return fx32{detail::saturate_i64(
      detail::shift_right_rne(v.raw, -diff), overflow)};
}

// Sigmoid lookup table. Entry i holds sigma(lo + i*step) encoded in
// entry_format, step = (hi - lo) / count, so the grid covers [lo, hi - step].
// The default 2^20 x 4-byte layout occupies 4 MB, the table budget of one
// simulated worker. Entries use Q2.30 by default: sigmoid outputs live in
// [0, 1], so spending the bits on fraction keeps the table error well below
// the run format's own step.
struct SigmoidLut {
  double lo = kDefaultLutLo;
  double hi = kDefaultLutHi;
  std::size_t count = 0;
  FixedFormat entry_format{kLutEntryFracBits};
  std::vector<std::int32_t> entries;

  double step() const { return (hi - lo) / static_cast<double>(count); }
  std::size_t byte_size() const { return entries.size() * sizeof(std::int32_t); }
};

inline SigmoidLut build_sigmoid_lut(double lo, double hi, std::size_t count,
                                    FixedFormat entry_format = FixedFormat{kLutEntryFracBits}) {
  if (!(lo < hi)) {
    throw ConfigError("build_sigmoid_lut: requires lo < hi");
  }
  if (count < 2 || (count & (count - 1)) != 0) {
    throw ConfigError("build_sigmoid_lut: entry count must be a power of two >= 2");
  }
  if (!entry_format.valid()) {
    throw ConfigError("build_sigmoid_lut: invalid entry format");
  }
  SigmoidLut lut;
  lut.lo = lo;
  lut.hi = hi;
  lut.count = count;
  lut.entry_format = entry_format;
  lut.entries.resize(count);
  const double step = lut.step();
  for (std::size_t i = 0; i < count; ++i) {
    const double x = lo + static_cast<double>(i) * step;
    const double s = 1.0 / (1.0 + std::exp(-x));
    lut.entries[i] = encode(s, entry_format).raw;
  }
  return lut;
}

inline SigmoidLut build_default_sigmoid_lut() {
  return build_sigmoid_lut(kDefaultLutLo, kDefaultLutHi, kDefaultLutEntries);
}

// Clamps the input to [lo, hi - step] and returns the nearest entry. The
// result is in the table's entry format.
inline fx32 sigmoid_lookup(const SigmoidLut& lut, fx32 x, FixedFormat input_format) {
  const double step = lut.step();
  double v = decode(x, input_format);
  if (v < lut.lo) v = lut.lo;
  const double top = lut.hi - step;
  if (v > top) v = top;
  auto idx = static_cast<std::int64_t>(std::llround((v - lut.lo) / step));
  if (idx < 0) idx = 0;
  if (idx >= static_cast<std::int64_t>(lut.count)) {
    idx = static_cast<std::int64_t>(lut.count) - 1;
  }
  return fx32{lut.entries[static_cast<std::size_t>(idx)]};
}

}  // namespace pssim
