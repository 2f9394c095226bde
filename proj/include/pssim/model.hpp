#pragma once

// Linear binary classifiers: margins, logistic (BCE) and hinge losses, their
// (sub)gradients, and L1/L2 regularizers. Every operation is a pure function
// over value types and works on dense or sparse samples in either numeric
// mode. Losses are reported in double regardless of mode; gradients stay in
// the mode's arithmetic.

#include <cmath>
#include <cstdint>
#include <type_traits>
#include <vector>

#include "pssim/data.hpp"
#include "pssim/errors.hpp"
#include "pssim/numeric.hpp"

namespace pssim {

enum class LossKind { kLogistic, kHinge };
enum class RegKind { kNone, kL1, kL2 };

struct RegSpec {
  RegKind kind = RegKind::kNone;
  double lambda = 0.0;
};

inline void validate(const RegSpec& reg) {
  if (reg.lambda < 0.0) {
    throw ConfigError("regularization strength must be non-negative");
  }
}

template <typename T>
struct LinearModel {
  std::vector<T> weights;
  T bias{};

  static LinearModel zeros(std::size_t d) {
    LinearModel m;
    m.weights.assign(d, T{});
    return m;
  }
  std::size_t dim() const { return weights.size(); }
};

template <typename T>
struct Gradient {
  std::vector<T> weights;
  T bias{};
};

// Maps a stored label onto the loss's convention. 0/-1 are interchangeable
// negatives on input; logistic yields {0,1}, hinge yields {-1,1}.
inline int convention_label(std::int32_t label, LossKind loss) {
  if (label != -1 && label != 0 && label != 1) {
    throw LabelConventionError("label " + std::to_string(label) +
                               " is outside {-1, 0, 1}");
  }
  if (loss == LossKind::kLogistic) return label == 1 ? 1 : 0;
  return label == 1 ? 1 : -1;
}

// w . x + b. Sparse samples touch only their stored indices; in fixed mode
// the products accumulate in 64 bits and round once, like fixed_dot.
template <class Mode>
typename Mode::scalar predict_margin(const Mode& num,
                                     const LinearModel<typename Mode::scalar>& m,
                                     const SampleView<typename Mode::scalar>& s) {
  if (s.dim != m.dim()) {
    throw DimensionError("predict_margin: sample dimension " +
                         std::to_string(s.dim) + " vs model dimension " +
                         std::to_string(m.dim()));
  }
  if constexpr (Mode::is_fixed) {
    std::int64_t acc = 0;
    if (s.dense != nullptr) {
      for (std::size_t j = 0; j < s.dim; ++j) {
        acc += static_cast<std::int64_t>(m.weights[j].raw) * s.dense[j].raw;
      }
    } else {
      for (std::size_t k = 0; k < s.nnz; ++k) {
        acc += static_cast<std::int64_t>(m.weights[s.indices[k]].raw) *
               s.values[k].raw;
      }
    }
    const fx32 dot_value{detail::saturate_i64(
        detail::shift_right_rne(acc, num.format().frac_bits), num.overflow())};
    return num.add(dot_value, m.bias);
  } else {
    double acc = 0.0;
    if (s.dense != nullptr) {
      for (std::size_t j = 0; j < s.dim; ++j) acc += m.weights[j] * s.dense[j];
    } else {
      for (std::size_t k = 0; k < s.nnz; ++k) {
        acc += m.weights[s.indices[k]] * s.values[k];
      }
    }
    return acc + m.bias;
  }
}

// lambda * r(w) on decoded weights; the bias never enters the penalty.
template <class Mode>
double regularization_penalty(const Mode& num,
                              const LinearModel<typename Mode::scalar>& m,
                              const RegSpec& reg) {
  if (reg.kind == RegKind::kNone) return 0.0;
  double r = 0.0;
  if (reg.kind == RegKind::kL2) {
    for (const auto& w : m.weights) {
      const double v = num.to_real(w);
      r += 0.5 * v * v;
    }
  } else {
    for (const auto& w : m.weights) r += std::abs(num.to_real(w));
  }
  return reg.lambda * r;
}

inline constexpr double kProbabilityClamp = 1e-7;

// Mean binary cross entropy over the batch plus lambda * r(w). Labels must
// map to {0,1}; probabilities are clamped to [1e-7, 1 - 1e-7]. In fixed mode
// the probability comes from the LUT sigmoid before the (double) log.
template <class Mode>
double lr_loss(const Mode& num, const LinearModel<typename Mode::scalar>& m,
               const Dataset<typename Mode::scalar>& ds, IndexRange batch,
               const RegSpec& reg) {
  if (batch.size() == 0) {
    throw ConfigError("lr_loss: empty batch");
  }
  double total = 0.0;
  for (std::size_t i = batch.begin; i < batch.end; ++i) {
    const auto s = ds.sample(i);
    const int y = convention_label(s.label, LossKind::kLogistic);
    double p = num.to_real(num.sigmoid(predict_margin(num, m, s)));
    p = std::min(std::max(p, kProbabilityClamp), 1.0 - kProbabilityClamp);
    total += y == 1 ? -std::log(p) : -std::log(1.0 - p);
  }
  return total / static_cast<double>(batch.size()) +
         regularization_penalty(num, m, reg);
}

// Mean hinge loss max(0, 1 - y * margin) plus lambda * r(w); labels map to
// {-1,1}.
template <class Mode>
double hinge_loss(const Mode& num, const LinearModel<typename Mode::scalar>& m,
                  const Dataset<typename Mode::scalar>& ds, IndexRange batch,
                  const RegSpec& reg) {
  if (batch.size() == 0) {
    throw ConfigError("hinge_loss: empty batch");
  }
  double total = 0.0;
  for (std::size_t i = batch.begin; i < batch.end; ++i) {
    const auto s = ds.sample(i);
    const int y = convention_label(s.label, LossKind::kHinge);
    const double margin = num.to_real(predict_margin(num, m, s));
    total += std::max(0.0, 1.0 - y * margin);
  }
  return total / static_cast<double>(batch.size()) +
         regularization_penalty(num, m, reg);
}

// Reused accumulation scratch for batch gradients. Fixed mode accumulates
// raw products in 64-bit integers and rounds once per batch; real mode
// accumulates in double. The accumulator array is kept zeroed between calls
// (sparse batches clear only the touched coordinates).
template <class Mode>
struct GradWorkspace {
  using Accum = std::conditional_t<Mode::is_fixed, std::int64_t, double>;
  std::vector<Accum> acc;
  Accum acc_bias{};
  std::vector<std::int32_t> touched;
  std::vector<std::uint32_t> stamp;
  std::uint32_t mark = 0;

  void ensure(std::size_t d) {
    if (acc.size() != d) {
      acc.assign(d, Accum{});
      stamp.assign(d, 0);
      touched.clear();
      mark = 0;
    }
    acc_bias = Accum{};
    if (mark == std::numeric_limits<std::uint32_t>::max()) {
      std::fill(stamp.begin(), stamp.end(), 0u);
      mark = 0;
    }
    ++mark;
  }

  void touch(std::int32_t j) {
    if (stamp[j] != mark) {
      stamp[j] = mark;
      touched.push_back(j);
    }
  }
};

namespace detail {

// Shared core of lr_gradient / svm_subgradient: mean over the batch of
// g_i * x_i (weights) and g_i (bias), where g_i is the per-sample loss
// factor, plus the once-per-batch regularizer term (bias unregularized).
template <class Mode>
void loss_gradient(const Mode& num, const LinearModel<typename Mode::scalar>& m,
                   const Dataset<typename Mode::scalar>& ds, IndexRange batch,
                   LossKind loss, const RegSpec& reg, GradWorkspace<Mode>& ws,
                   Gradient<typename Mode::scalar>& out) {
  using S = typename Mode::scalar;
  if (ds.dim != m.dim()) {
    throw DimensionError("gradient: dataset dimension " + std::to_string(ds.dim) +
                         " vs model dimension " + std::to_string(m.dim()));
  }
  if (batch.size() == 0 || batch.end > ds.size()) {
    throw ConfigError("gradient: invalid batch range");
  }
  validate(reg);
  const std::size_t d = ds.dim;
  const bool dense = ds.layout == Layout::kDense;
  ws.ensure(d);

  for (std::size_t i = batch.begin; i < batch.end; ++i) {
    const auto s = ds.sample(i);
    const S margin = predict_margin(num, m, s);
    S factor{};
    bool active = true;
    if (loss == LossKind::kLogistic) {
      const int y = convention_label(s.label, loss);
      const S p = num.sigmoid(margin);
      factor = num.sub(p, num.from_real(static_cast<double>(y)));
    } else {
      const int y = convention_label(s.label, loss);
      // Active iff y * margin < 1; exactly 1 takes the zero branch.
      if constexpr (Mode::is_fixed) {
        const std::int64_t ym = y == 1 ? margin.raw : -static_cast<std::int64_t>(margin.raw);
        active = ym < (std::int64_t{1} << num.format().frac_bits);
      } else {
        active = y * margin < 1.0;
      }
      if (active) factor = num.from_real(static_cast<double>(-y));
    }
    if (!active) continue;

    if constexpr (Mode::is_fixed) {
      ws.acc_bias += factor.raw;
      if (dense) {
        for (std::size_t j = 0; j < d; ++j) {
          ws.acc[j] += static_cast<std::int64_t>(factor.raw) * s.dense[j].raw;
        }
      } else {
        for (std::size_t k = 0; k < s.nnz; ++k) {
          ws.touch(s.indices[k]);
          ws.acc[s.indices[k]] += static_cast<std::int64_t>(factor.raw) * s.values[k].raw;
        }
      }
    } else {
      ws.acc_bias += factor;
      if (dense) {
        for (std::size_t j = 0; j < d; ++j) ws.acc[j] += factor * s.dense[j];
      } else {
        for (std::size_t k = 0; k < s.nnz; ++k) {
          ws.touch(s.indices[k]);
          ws.acc[s.indices[k]] += factor * s.values[k];
        }
      }
    }
  }

  out.weights.assign(d, S{});
  const auto count = static_cast<std::int64_t>(batch.size());
  if constexpr (Mode::is_fixed) {
    const int f = num.format().frac_bits;
    const std::int64_t den = count << f;
    auto finalize = [&](std::size_t j) {
      out.weights[j] = fx32{pssim::detail::saturate_i64(
          pssim::detail::div_round_nearest_even(ws.acc[j], den), num.overflow())};
    };
    if (dense) {
      for (std::size_t j = 0; j < d; ++j) finalize(j);
      std::fill(ws.acc.begin(), ws.acc.end(), std::int64_t{0});
    } else {
      for (std::int32_t j : ws.touched) {
        finalize(static_cast<std::size_t>(j));
        ws.acc[j] = 0;
      }
      ws.touched.clear();
    }
    out.bias = fx32{pssim::detail::saturate_i64(
        pssim::detail::div_round_nearest_even(ws.acc_bias, count), num.overflow())};
  } else {
    const double inv = 1.0 / static_cast<double>(batch.size());
    if (dense) {
      for (std::size_t j = 0; j < d; ++j) {
        out.weights[j] = ws.acc[j] * inv;
        ws.acc[j] = 0.0;
      }
    } else {
      for (std::int32_t j : ws.touched) {
        out.weights[j] = ws.acc[j] * inv;
        ws.acc[j] = 0.0;
      }
      ws.touched.clear();
    }
    out.bias = ws.acc_bias * inv;
  }

  if (reg.kind == RegKind::kL2) {
    const S lam = num.from_real(reg.lambda);
    for (std::size_t j = 0; j < d; ++j) {
      out.weights[j] = num.add(out.weights[j], num.mul(lam, m.weights[j]));
    }
  } else if (reg.kind == RegKind::kL1) {
    const S lam = num.from_real(reg.lambda);
    const S neg_lam = num.from_real(-reg.lambda);
    for (std::size_t j = 0; j < d; ++j) {
      const double w = num.to_real(m.weights[j]);
      if (w > 0.0) {
        out.weights[j] = num.add(out.weights[j], lam);
      } else if (w < 0.0) {
        out.weights[j] = num.add(out.weights[j], neg_lam);
      }
      // sign(0) = 0: no contribution.
    }
  }
}

}  // namespace detail

template <class Mode>
void lr_gradient(const Mode& num, const LinearModel<typename Mode::scalar>& m,
                 const Dataset<typename Mode::scalar>& ds, IndexRange batch,
                 const RegSpec& reg, GradWorkspace<Mode>& ws,
                 Gradient<typename Mode::scalar>& out) {
  detail::loss_gradient(num, m, ds, batch, LossKind::kLogistic, reg, ws, out);
}

template <class Mode>
Gradient<typename Mode::scalar> lr_gradient(
    const Mode& num, const LinearModel<typename Mode::scalar>& m,
    const Dataset<typename Mode::scalar>& ds, IndexRange batch, const RegSpec& reg) {
  GradWorkspace<Mode> ws;
  Gradient<typename Mode::scalar> out;
  lr_gradient(num, m, ds, batch, reg, ws, out);
  return out;
}

template <class Mode>
void svm_subgradient(const Mode& num, const LinearModel<typename Mode::scalar>& m,
                     const Dataset<typename Mode::scalar>& ds, IndexRange batch,
                     const RegSpec& reg, GradWorkspace<Mode>& ws,
                     Gradient<typename Mode::scalar>& out) {
  detail::loss_gradient(num, m, ds, batch, LossKind::kHinge, reg, ws, out);
}

template <class Mode>
Gradient<typename Mode::scalar> svm_subgradient(
    const Mode& num, const LinearModel<typename Mode::scalar>& m,
    const Dataset<typename Mode::scalar>& ds, IndexRange batch, const RegSpec& reg) {
  GradWorkspace<Mode> ws;
  Gradient<typename Mode::scalar> out;
  svm_subgradient(num, m, ds, batch, reg, ws, out);
  return out;
}

template <class Mode>
double loss_value(const Mode& num, const LinearModel<typename Mode::scalar>& m,
                  const Dataset<typename Mode::scalar>& ds, IndexRange batch,
                  LossKind loss, const RegSpec& reg) {
  return loss == LossKind::kLogistic ? lr_loss(num, m, ds, batch, reg)
                                     : hinge_loss(num, m, ds, batch, reg);
}

}  // namespace pssim
