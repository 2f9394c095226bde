#pragma once

// Numeric execution modes. Training code is templated on one of these two
// policies: RealMode computes in double (the serial reference), FixedMode
// routes every worker-side operation through saturating 32-bit fixed-point
// arithmetic and the LUT sigmoid.

#include <cmath>
#include <cstdint>
#include <span>

#include "pssim/fixedpoint.hpp"

namespace pssim {

struct RealMode {
  using scalar = double;
  static constexpr bool is_fixed = false;

  double from_real(double x) const { return x; }
  double to_real(double x) const { return x; }
  double add(double a, double b) const { return a + b; }
  double sub(double a, double b) const { return a - b; }
  double mul(double a, double b) const { return a * b; }
  double sigmoid(double x) const { return 1.0 / (1.0 + std::exp(-x)); }
  double dot(std::span<const double> a, std::span<const double> b) const {
    if (a.size() != b.size()) {
      throw DimensionError("dot: length mismatch");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
  }
  std::uint64_t overflow_count() const { return 0; }
};

class FixedMode {
 public:
  using scalar = fx32;
  static constexpr bool is_fixed = true;

  FixedMode(FixedFormat fmt, const SigmoidLut* lut, OverflowCounter* overflow)
      : fmt_(fmt), lut_(lut), overflow_(overflow) {}

  fx32 from_real(double x) const { return encode(x, fmt_, overflow_); }
  double to_real(fx32 v) const { return decode(v, fmt_); }
  fx32 add(fx32 a, fx32 b) const { return fixed_add(a, b, overflow_); }
  fx32 sub(fx32 a, fx32 b) const { return fixed_sub(a, b, overflow_); }
  fx32 mul(fx32 a, fx32 b) const { return fixed_mul(a, b, fmt_, overflow_); }
  // LUT sigmoid, rescaled from the table's entry format into the run format.
  fx32 sigmoid(fx32 x) const {
    const fx32 entry = sigmoid_lookup(*lut_, x, fmt_);
    return rescale(entry, lut_->entry_format, fmt_, overflow_);
  }
  fx32 dot(std::span<const fx32> a, std::span<const fx32> b) const {
    return fixed_dot(a, b, fmt_, overflow_);
  }

  FixedFormat format() const { return fmt_; }
  const SigmoidLut& lut() const { return *lut_; }
  OverflowCounter* overflow() const { return overflow_; }
  std::uint64_t overflow_count() const { return overflow_->value(); }

 private:
  FixedFormat fmt_;
  const SigmoidLut* lut_;
  OverflowCounter* overflow_;
};

}  // namespace pssim
