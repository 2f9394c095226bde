#include "pssim/fixedpoint.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "pssim/rng.hpp"

namespace pssim {
namespace {

constexpr FixedFormat kQ16{16};

// Independent big-integer dot-product oracle: exact 128-bit accumulation,
// round-to-nearest-even shift, saturation. Mirrors the contract, not the
// implementation.
std::int32_t dot_oracle(const std::vector<fx32>& a, const std::vector<fx32>& b,
                        int frac_bits) {
  __int128 acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    acc += static_cast<__int128>(a[i].raw) * b[i].raw;
  }
  const __int128 den = __int128{1} << frac_bits;
  __int128 q = acc / den;
  const __int128 r = acc % den;
  const __int128 twice = (r < 0 ? -r : r) * 2;
  if (twice > den || (twice == den && (q & 1))) {
    q += acc >= 0 ? 1 : -1;
  }
  if (q > std::numeric_limits<std::int32_t>::max()) {
    return std::numeric_limits<std::int32_t>::max();
  }
  if (q < std::numeric_limits<std::int32_t>::min()) {
    return std::numeric_limits<std::int32_t>::min();
  }
  return static_cast<std::int32_t>(q);
}

TEST(FixedFormat, RangeAndStep) {
  EXPECT_DOUBLE_EQ(kQ16.step(), 1.0 / 65536.0);
  EXPECT_NEAR(kQ16.max_value(), 32768.0, 1e-3);
  EXPECT_DOUBLE_EQ(kQ16.min_value(), -32768.0);
  EXPECT_TRUE(kQ16.valid());
  EXPECT_FALSE(FixedFormat{31}.valid());
  EXPECT_FALSE(FixedFormat{-1}.valid());
}

TEST(Encode, DefinitionCases) {
  EXPECT_EQ(encode(1.0, kQ16).raw, 65536);
  EXPECT_EQ(encode(-0.5, kQ16).raw, -32768);
  EXPECT_EQ(encode(0.0, kQ16).raw, 0);
}

TEST(Encode, SaturatesOutOfRange) {
  OverflowCounter counter;
  EXPECT_EQ(encode(40000.0, kQ16, &counter).raw,
            std::numeric_limits<std::int32_t>::max());
  EXPECT_EQ(encode(-40000.0, kQ16, &counter).raw,
            std::numeric_limits<std::int32_t>::min());
  EXPECT_EQ(counter.value(), 2u);
}

TEST(Encode, RoundsToNearestEven) {
  // 0.5 * 2^-16 scales to exactly 0.5: tie resolves to the even raw value.
  const double half_step = std::ldexp(0.5, -16);
  EXPECT_EQ(encode(half_step, kQ16).raw, 0);
  EXPECT_EQ(encode(3.0 * half_step, kQ16).raw, 2);
  EXPECT_EQ(encode(-half_step, kQ16).raw, 0);
  EXPECT_EQ(encode(-3.0 * half_step, kQ16).raw, -2);
}

TEST(Encode, RoundTripWithinHalfStep) {
  SplitMix64 rng(7);
  const double bound = kQ16.max_value();
  for (int i = 0; i < 20000; ++i) {
    const double x = (rng.next_unit() * 2.0 - 1.0) * bound;
    const double back = decode(encode(x, kQ16), kQ16);
    EXPECT_LE(std::abs(back - x), std::ldexp(1.0, -17));
  }
}

TEST(FixedMul, DefinitionCases) {
  const fx32 half = encode(0.5, kQ16);
  EXPECT_EQ(fixed_mul(half, half, kQ16).raw, 16384);  // 0.25

  SplitMix64 rng(11);
  const fx32 one = encode(1.0, kQ16);
  for (int i = 0; i < 1000; ++i) {
    const fx32 x{static_cast<std::int32_t>(rng.next())};
    EXPECT_EQ(fixed_mul(one, x, kQ16).raw, x.raw);
  }

  // 3.25 * -2.5 = -8.125 exactly representable in Q16.16.
  EXPECT_EQ(fixed_mul(encode(3.25, kQ16), encode(-2.5, kQ16), kQ16).raw, -532480);
}

TEST(FixedMul, SaturatesWithMatchingSign) {
  OverflowCounter counter;
  SplitMix64 rng(13);
  int saturations = 0;
  for (int i = 0; i < 2000; ++i) {
    const double a = 100.0 + rng.next_unit() * 30000.0;
    const double b = 100.0 + rng.next_unit() * 30000.0;
    const bool neg_a = rng.next() & 1;
    const bool neg_b = rng.next() & 1;
    const fx32 fa = encode(neg_a ? -a : a, kQ16);
    const fx32 fb = encode(neg_b ? -b : b, kQ16);
    if (a * b <= kQ16.max_value()) continue;
    ++saturations;
    const fx32 r = fixed_mul(fa, fb, kQ16, &counter);
    if (neg_a == neg_b) {
      EXPECT_EQ(r.raw, std::numeric_limits<std::int32_t>::max());
    } else {
      EXPECT_EQ(r.raw, std::numeric_limits<std::int32_t>::min());
    }
  }
  EXPECT_GT(saturations, 100);
  EXPECT_EQ(counter.value(), static_cast<std::uint64_t>(saturations));
}

TEST(FixedDot, TrivialCases) {
  std::vector<fx32> zeros(8, fx32{0});
  std::vector<fx32> v;
  for (int i = 0; i < 8; ++i) v.push_back(encode(0.25 * i - 1.0, kQ16));
  EXPECT_EQ(fixed_dot(zeros, v, kQ16).raw, 0);

  std::vector<fx32> basis(8, fx32{0});
  basis[3] = encode(1.0, kQ16);
  EXPECT_EQ(fixed_dot(basis, v, kQ16).raw, v[3].raw);
}

TEST(FixedDot, LengthMismatchThrows) {
  std::vector<fx32> a(4), b(5);
  EXPECT_THROW((void)fixed_dot(a, b, kQ16), DimensionError);
}

TEST(FixedDot, MatchesBigIntegerOracle) {
  SplitMix64 rng(17);
  for (int trial = 0; trial < 3000; ++trial) {
    const std::size_t len = 1 + rng.next_below(256);
    std::vector<fx32> a(len), b(len);
    for (std::size_t i = 0; i < len; ++i) {
      a[i] = encode((rng.next_unit() * 2.0 - 1.0) * 32.0, kQ16);
      b[i] = encode((rng.next_unit() * 2.0 - 1.0) * 32.0, kQ16);
    }
    EXPECT_EQ(fixed_dot(a, b, kQ16).raw, dot_oracle(a, b, 16));
  }
}

TEST(Rescale, WidenNarrowRoundTrip) {
  const FixedFormat q30{30};
  const fx32 v = encode(0.3, kQ16);
  const fx32 wide = rescale(v, kQ16, q30);
  EXPECT_EQ(wide.raw, v.raw << 14);
  EXPECT_EQ(rescale(wide, q30, kQ16).raw, v.raw);
}

TEST(DivRne, TieBreaksToEven) {
  using detail::div_round_nearest_even;
  EXPECT_EQ(div_round_nearest_even(5, 2), 2);
  EXPECT_EQ(div_round_nearest_even(7, 2), 4);
  EXPECT_EQ(div_round_nearest_even(3, 2), 2);
  EXPECT_EQ(div_round_nearest_even(-5, 2), -2);
  EXPECT_EQ(div_round_nearest_even(-7, 2), -4);
  EXPECT_EQ(div_round_nearest_even(-3, 2), -2);
  EXPECT_EQ(div_round_nearest_even(9, 4), 2);
  EXPECT_EQ(div_round_nearest_even(11, 4), 3);
}

TEST(SigmoidLut, BuildValidation) {
  EXPECT_THROW(build_sigmoid_lut(1.0, 1.0, 1024), ConfigError);
  EXPECT_THROW(build_sigmoid_lut(-16.0, 16.0, 1000), ConfigError);
  EXPECT_THROW(build_sigmoid_lut(-16.0, 16.0, 1024, FixedFormat{40}), ConfigError);
}

TEST(SigmoidLut, EndpointsAndMonotonicity) {
  const SigmoidLut lut = build_default_sigmoid_lut();
  EXPECT_EQ(lut.count, std::size_t{1} << 20);
  EXPECT_EQ(lut.byte_size(), std::size_t{4} << 20);  // 4 MB

  const double step = lut.step();
  EXPECT_EQ(lut.entries.front(),
            encode(1.0 / (1.0 + std::exp(16.0)), lut.entry_format).raw);
  EXPECT_EQ(lut.entries.back(),
            encode(1.0 / (1.0 + std::exp(-(16.0 - step))), lut.entry_format).raw);
  EXPECT_NEAR(decode(fx32{lut.entries.front()}, lut.entry_format), 0.0, 1e-6);

  for (std::size_t i = 1; i < lut.count; ++i) {
    ASSERT_GE(lut.entries[i], lut.entries[i - 1]);
  }
}

TEST(SigmoidLut, LookupCases) {
  const SigmoidLut lut = build_default_sigmoid_lut();
  const double at_zero = decode(sigmoid_lookup(lut, encode(0.0, kQ16), kQ16),
                                lut.entry_format);
  EXPECT_NEAR(at_zero, 0.5, lut.step());

  // Far outside the range: saturating clamp to the last entry.
  EXPECT_EQ(sigmoid_lookup(lut, encode(100.0, kQ16), kQ16).raw, lut.entries.back());
  EXPECT_EQ(sigmoid_lookup(lut, encode(-100.0, kQ16), kQ16).raw, lut.entries.front());

  const double at_one = decode(sigmoid_lookup(lut, encode(1.0, kQ16), kQ16),
                               lut.entry_format);
  EXPECT_NEAR(at_one, 0.7310586, 1e-5);
}

TEST(SigmoidLut, ErrorBoundOnSweep) {
  const SigmoidLut lut = build_default_sigmoid_lut();
  SplitMix64 rng(23);
  double worst = 0.0;
  for (int i = 0; i < 200000; ++i) {
    const double x = (rng.next_unit() * 2.0 - 1.0) * 16.0;
    const fx32 q = encode(x, kQ16);
    const double got = decode(sigmoid_lookup(lut, q, kQ16), lut.entry_format);
    const double want = 1.0 / (1.0 + std::exp(-decode(q, kQ16)));
    worst = std::max(worst, std::abs(got - want));
  }
  EXPECT_LE(worst, 1e-5);
}

}  // namespace
}  // namespace pssim
