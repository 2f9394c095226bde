#include "pssim/model.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <sstream>
#include <vector>

#include "pssim/rng.hpp"

namespace pssim {
namespace {

const RealMode kReal{};

Dataset<double> dense_dataset(std::size_t d, std::vector<std::vector<double>> rows,
                              std::vector<std::int32_t> labels) {
  Dataset<double> ds;
  ds.layout = Layout::kDense;
  ds.dim = d;
  for (const auto& row : rows) {
    ds.dense_values.insert(ds.dense_values.end(), row.begin(), row.end());
  }
  ds.labels = std::move(labels);
  return ds;
}

// Central finite differences of a scalar function of the model parameters.
Gradient<double> finite_difference(
    const std::function<double(const LinearModel<double>&)>& f,
    const LinearModel<double>& at, double h) {
  Gradient<double> g;
  g.weights.resize(at.dim());
  LinearModel<double> probe = at;
  for (std::size_t j = 0; j < at.dim(); ++j) {
    probe.weights[j] = at.weights[j] + h;
    const double up = f(probe);
    probe.weights[j] = at.weights[j] - h;
    const double down = f(probe);
    probe.weights[j] = at.weights[j];
    g.weights[j] = (up - down) / (2.0 * h);
  }
  probe.bias = at.bias + h;
  const double up = f(probe);
  probe.bias = at.bias - h;
  const double down = f(probe);
  g.bias = (up - down) / (2.0 * h);
  return g;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

TEST(PredictMargin, ZeroModelReturnsBias) {
  const auto ds = dense_dataset(3, {{1.0, -2.0, 0.5}}, {1});
  LinearModel<double> m = LinearModel<double>::zeros(3);
  m.bias = 0.75;
  EXPECT_DOUBLE_EQ(predict_margin(kReal, m, ds.sample(0)), 0.75);
}

TEST(PredictMargin, BasisVectorSelectsCoordinate) {
  const auto ds = dense_dataset(3, {{1.0, -2.0, 0.5}}, {1});
  LinearModel<double> m = LinearModel<double>::zeros(3);
  m.weights[1] = 1.0;
  EXPECT_DOUBLE_EQ(predict_margin(kReal, m, ds.sample(0)), -2.0);
}

TEST(PredictMargin, DimensionMismatchThrows) {
  const auto ds = dense_dataset(3, {{1.0, -2.0, 0.5}}, {1});
  LinearModel<double> m = LinearModel<double>::zeros(4);
  EXPECT_THROW((void)predict_margin(kReal, m, ds.sample(0)), DimensionError);
}

TEST(PredictMargin, SparseMatchesDensifiedTwin) {
  std::istringstream in("1 0:0.5 3:-2 7:1.25\n-1 2:3\n");
  const Dataset<double> sparse = parse_libsvm(in);
  const Dataset<double> dense = densify(sparse);
  SplitMix64 rng(3);
  LinearModel<double> m = LinearModel<double>::zeros(sparse.dim);
  for (auto& w : m.weights) w = rng.next_unit() * 2.0 - 1.0;
  m.bias = 0.3;
  for (std::size_t i = 0; i < sparse.size(); ++i) {
    EXPECT_DOUBLE_EQ(predict_margin(kReal, m, sparse.sample(i)),
                     predict_margin(kReal, m, dense.sample(i)));
  }

  // Fixed mode: bit-exact agreement. Note the dense path multiplies the
  // stored zeros, which contribute exactly zero to the raw accumulator.
  OverflowCounter counter;
  const SigmoidLut lut = build_sigmoid_lut(-16.0, 16.0, 1024);
  const FixedMode fixed(FixedFormat{16}, &lut, &counter);
  const Dataset<fx32> q_sparse = quantize(sparse, FixedFormat{16});
  const Dataset<fx32> q_dense = densify(q_sparse);
  LinearModel<fx32> qm = LinearModel<fx32>::zeros(sparse.dim);
  for (std::size_t j = 0; j < qm.dim(); ++j) {
    qm.weights[j] = fixed.from_real(m.weights[j]);
  }
  qm.bias = fixed.from_real(m.bias);
  for (std::size_t i = 0; i < sparse.size(); ++i) {
    EXPECT_EQ(predict_margin(fixed, qm, q_sparse.sample(i)).raw,
              predict_margin(fixed, qm, q_dense.sample(i)).raw);
  }
}

TEST(LrLoss, ZeroModelIsLogTwo) {
  const auto ds = dense_dataset(2, {{1.0, 2.0}, {-1.0, 0.5}, {3.0, -2.0}}, {1, 0, 1});
  const LinearModel<double> m = LinearModel<double>::zeros(2);
  EXPECT_NEAR(lr_loss(kReal, m, ds, {0, 3}, RegSpec{}), std::log(2.0), 1e-12);
}

TEST(LrLoss, ClosedFormSingleSample) {
  const auto ds = dense_dataset(1, {{1.0}}, {1});
  LinearModel<double> m = LinearModel<double>::zeros(1);
  m.weights[0] = 1.0;
  // -ln sigma(1) = ln(1 + e^-1)
  EXPECT_NEAR(lr_loss(kReal, m, ds, {0, 1}, RegSpec{}),
              std::log(1.0 + std::exp(-1.0)), 1e-12);
  EXPECT_NEAR(lr_loss(kReal, m, ds, {0, 1}, RegSpec{}), 0.3132617, 1e-7);
}

TEST(LrLoss, ClampActiveAtHugeMargin) {
  const auto ds = dense_dataset(1, {{1.0}}, {1});
  LinearModel<double> m = LinearModel<double>::zeros(1);
  m.weights[0] = 50.0;
  const double loss = lr_loss(kReal, m, ds, {0, 1}, RegSpec{});
  EXPECT_NEAR(loss, -std::log(1.0 - 1e-7), 1e-12);
  EXPECT_GT(loss, 0.0);
}

TEST(LrLoss, LabelConventionEnforced) {
  const auto ds = dense_dataset(1, {{1.0}}, {3});
  const LinearModel<double> m = LinearModel<double>::zeros(1);
  EXPECT_THROW((void)lr_loss(kReal, m, ds, {0, 1}, RegSpec{}), LabelConventionError);
}

TEST(LrGradient, ZeroModelHalfResidual) {
  const auto ds = dense_dataset(2, {{1.0, 2.0}, {-2.0, 4.0}}, {1, 0});
  const LinearModel<double> m = LinearModel<double>::zeros(2);
  const auto g = lr_gradient(kReal, m, ds, {0, 2}, RegSpec{});
  // mean((sigma(0) - y) * x) = mean((0.5 - y) * x)
  EXPECT_NEAR(g.weights[0], 0.5 * ((0.5 - 1.0) * 1.0 + (0.5 - 0.0) * -2.0), 1e-15);
  EXPECT_NEAR(g.weights[1], 0.5 * ((0.5 - 1.0) * 2.0 + (0.5 - 0.0) * 4.0), 1e-15);
  EXPECT_NEAR(g.bias, 0.5 * ((0.5 - 1.0) + (0.5 - 0.0)), 1e-15);
}

TEST(LrGradient, PureL2TermOnZeroFeatures) {
  const auto ds = dense_dataset(2, {{0.0, 0.0}, {0.0, 0.0}}, {1, 0});
  LinearModel<double> m;
  m.weights = {0.4, -0.7};
  const RegSpec reg{RegKind::kL2, 0.25};
  const auto g = lr_gradient(kReal, m, ds, {0, 2}, reg);
  EXPECT_DOUBLE_EQ(g.weights[0], 0.25 * 0.4);
  EXPECT_DOUBLE_EQ(g.weights[1], 0.25 * -0.7);
}

TEST(LrGradient, MatchesFiniteDifferences) {
  SplitMix64 rng(29);
  int checked = 0;
  while (checked < 120) {
    const std::size_t d = 2 + rng.next_below(7);
    const std::size_t batch = 1 + rng.next_below(16);
    Dataset<double> ds;
    ds.layout = Layout::kDense;
    ds.dim = d;
    for (std::size_t i = 0; i < batch; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        ds.dense_values.push_back(rng.next_unit() * 4.0 - 2.0);
      }
      ds.labels.push_back(static_cast<std::int32_t>(rng.next() & 1));
    }
    LinearModel<double> m = LinearModel<double>::zeros(d);
    for (auto& w : m.weights) w = rng.next_unit() * 2.0 - 1.0;
    m.bias = rng.next_unit() - 0.5;
    const RegKind kinds[] = {RegKind::kNone, RegKind::kL2, RegKind::kL1};
    const RegSpec reg{kinds[rng.next_below(3)], 0.1};
    if (reg.kind == RegKind::kL1) {
      bool near_zero = false;
      for (double w : m.weights) near_zero |= std::abs(w) < 1e-3;
      if (near_zero) continue;
    }
    const auto g = lr_gradient(kReal, m, ds, {0, batch}, reg);
    const auto fd = finite_difference(
        [&](const LinearModel<double>& probe) {
          return lr_loss(kReal, probe, ds, {0, batch}, reg);
        },
        m, 1e-6);
    for (std::size_t j = 0; j < d; ++j) {
      ASSERT_LE(rel_err(g.weights[j], fd.weights[j]), 1e-5);
    }
    ASSERT_LE(rel_err(g.bias, fd.bias), 1e-5);
    ++checked;
  }
}

TEST(HingeLoss, PointCases) {
  const auto ds = dense_dataset(1, {{1.0}}, {1});
  LinearModel<double> m = LinearModel<double>::zeros(1);
  m.weights[0] = 2.0;  // y * margin = 2
  EXPECT_DOUBLE_EQ(hinge_loss(kReal, m, ds, {0, 1}, RegSpec{}), 0.0);
  m.weights[0] = 0.0;  // margin 0, y = 1
  EXPECT_DOUBLE_EQ(hinge_loss(kReal, m, ds, {0, 1}, RegSpec{}), 1.0);
  const auto neg = dense_dataset(1, {{1.0}}, {-1});
  m.weights[0] = 0.5;  // y = -1, margin 0.5 -> 1.5
  EXPECT_DOUBLE_EQ(hinge_loss(kReal, m, neg, {0, 1}, RegSpec{}), 1.5);
}

TEST(HingeLoss, NonNegativeEverywhere) {
  SplitMix64 rng(31);
  for (int i = 0; i < 200; ++i) {
    const auto ds = dense_dataset(
        2, {{rng.next_unit() * 8 - 4, rng.next_unit() * 8 - 4}},
        {rng.next() & 1 ? 1 : -1});
    LinearModel<double> m;
    m.weights = {rng.next_unit() * 6 - 3, rng.next_unit() * 6 - 3};
    m.bias = rng.next_unit() * 2 - 1;
    EXPECT_GE(hinge_loss(kReal, m, ds, {0, 1}, RegSpec{}), 0.0);
    EXPECT_GE(lr_loss(kReal, m, ds, {0, 1},
                      RegSpec{RegKind::kL2, 0.01}),
              0.0);
  }
}

TEST(SvmSubgradient, InactiveBatchLeavesOnlyRegTerm) {
  const auto ds = dense_dataset(1, {{1.0}, {-1.0}}, {1, -1});
  LinearModel<double> m;
  m.weights = {5.0};  // both samples have y * margin = 5 > 1
  const RegSpec reg{RegKind::kL2, 0.1};
  const auto g = svm_subgradient(kReal, m, ds, {0, 2}, reg);
  EXPECT_DOUBLE_EQ(g.weights[0], 0.1 * 5.0);
  EXPECT_DOUBLE_EQ(g.bias, 0.0);
}

TEST(SvmSubgradient, SingleViolatingSample) {
  const auto ds = dense_dataset(2, {{1.0, 0.0}}, {1});
  const LinearModel<double> m = LinearModel<double>::zeros(2);
  const auto g = svm_subgradient(kReal, m, ds, {0, 1}, RegSpec{});
  EXPECT_DOUBLE_EQ(g.weights[0], -1.0);
  EXPECT_DOUBLE_EQ(g.weights[1], 0.0);
  EXPECT_DOUBLE_EQ(g.bias, -1.0);
}

TEST(SvmSubgradient, KinkTakesZeroBranch) {
  const auto ds = dense_dataset(1, {{1.0}}, {1});
  LinearModel<double> m;
  m.weights = {1.0};  // y * margin exactly 1
  const auto g = svm_subgradient(kReal, m, ds, {0, 1}, RegSpec{});
  EXPECT_DOUBLE_EQ(g.weights[0], 0.0);
  EXPECT_DOUBLE_EQ(g.bias, 0.0);
}

// Mixed batch against an independent per-sample oracle summation.
TEST(SvmSubgradient, MatchesPerSampleOracle) {
  SplitMix64 rng(37);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 2 + rng.next_below(5);
    const std::size_t batch = 1 + rng.next_below(12);
    Dataset<double> ds;
    ds.layout = Layout::kDense;
    ds.dim = d;
    for (std::size_t i = 0; i < batch; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        ds.dense_values.push_back(rng.next_unit() * 4.0 - 2.0);
      }
      ds.labels.push_back(rng.next() & 1 ? 1 : -1);
    }
    LinearModel<double> m = LinearModel<double>::zeros(d);
    for (auto& w : m.weights) w = rng.next_unit() * 2.0 - 1.0;
    m.bias = rng.next_unit() - 0.5;

    std::vector<double> expect_w(d, 0.0);
    double expect_b = 0.0;
    for (std::size_t i = 0; i < batch; ++i) {
      const auto s = ds.sample(i);
      const int y = ds.labels[i];
      double margin = m.bias;
      for (std::size_t j = 0; j < d; ++j) margin += m.weights[j] * s.dense[j];
      if (y * margin < 1.0) {
        for (std::size_t j = 0; j < d; ++j) expect_w[j] += -y * s.dense[j];
        expect_b += -y;
      }
    }
    for (auto& v : expect_w) v /= static_cast<double>(batch);
    expect_b /= static_cast<double>(batch);

    const auto g = svm_subgradient(kReal, m, ds, {0, batch}, RegSpec{});
    for (std::size_t j = 0; j < d; ++j) {
      EXPECT_NEAR(g.weights[j], expect_w[j], 1e-12);
    }
    EXPECT_NEAR(g.bias, expect_b, 1e-12);
  }
}

TEST(SvmSubgradient, MatchesFiniteDifferencesAwayFromKinks) {
  SplitMix64 rng(41);
  int checked = 0;
  while (checked < 120) {
    const std::size_t d = 2 + rng.next_below(5);
    const std::size_t batch = 1 + rng.next_below(10);
    Dataset<double> ds;
    ds.layout = Layout::kDense;
    ds.dim = d;
    for (std::size_t i = 0; i < batch; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        ds.dense_values.push_back(rng.next_unit() * 4.0 - 2.0);
      }
      ds.labels.push_back(rng.next() & 1 ? 1 : -1);
    }
    LinearModel<double> m = LinearModel<double>::zeros(d);
    for (auto& w : m.weights) w = rng.next_unit() * 2.0 - 1.0;
    m.bias = rng.next_unit() - 0.5;

    bool near_kink = false;
    for (std::size_t i = 0; i < batch; ++i) {
      const auto s = ds.sample(i);
      double margin = m.bias;
      for (std::size_t j = 0; j < d; ++j) margin += m.weights[j] * s.dense[j];
      near_kink |= std::abs(ds.labels[i] * margin - 1.0) < 1e-3;
    }
    if (near_kink) continue;

    const RegSpec reg{RegKind::kL2, 0.05};
    const auto g = svm_subgradient(kReal, m, ds, {0, batch}, reg);
    const auto fd = finite_difference(
        [&](const LinearModel<double>& probe) {
          return hinge_loss(kReal, probe, ds, {0, batch}, reg);
        },
        m, 1e-6);
    for (std::size_t j = 0; j < d; ++j) {
      ASSERT_LE(rel_err(g.weights[j], fd.weights[j]), 1e-5);
    }
    ASSERT_LE(rel_err(g.bias, fd.bias), 1e-5);
    ++checked;
  }
}

// Sparse batch and its densified twin produce identical gradients,
// bit-exact in fixed mode.
TEST(Gradients, SparseDenseAgreement) {
  std::istringstream in("1 0:0.5 3:-1.5\n0 1:2 2:-0.25\n1 4:1\n0 0:-2 4:0.75\n");
  const Dataset<double> sparse = parse_libsvm(in);
  const Dataset<double> dense = densify(sparse);
  LinearModel<double> m = LinearModel<double>::zeros(sparse.dim);
  SplitMix64 rng(43);
  for (auto& w : m.weights) w = rng.next_unit() - 0.5;
  m.bias = 0.1;

  const auto gs = lr_gradient(kReal, m, sparse, {0, 4}, RegSpec{RegKind::kL2, 0.1});
  const auto gd = lr_gradient(kReal, m, dense, {0, 4}, RegSpec{RegKind::kL2, 0.1});
  for (std::size_t j = 0; j < sparse.dim; ++j) {
    EXPECT_DOUBLE_EQ(gs.weights[j], gd.weights[j]);
  }
  EXPECT_DOUBLE_EQ(gs.bias, gd.bias);

  OverflowCounter counter;
  const SigmoidLut lut = build_sigmoid_lut(-16.0, 16.0, 1 << 16);
  const FixedMode fixed(FixedFormat{16}, &lut, &counter);
  const Dataset<fx32> q_sparse = quantize(sparse, FixedFormat{16});
  const Dataset<fx32> q_dense = densify(q_sparse);
  LinearModel<fx32> qm = LinearModel<fx32>::zeros(sparse.dim);
  for (std::size_t j = 0; j < qm.dim(); ++j) {
    qm.weights[j] = fixed.from_real(m.weights[j]);
  }
  qm.bias = fixed.from_real(m.bias);
  const auto qs = lr_gradient(fixed, qm, q_sparse, {0, 4}, RegSpec{RegKind::kL2, 0.1});
  const auto qd = lr_gradient(fixed, qm, q_dense, {0, 4}, RegSpec{RegKind::kL2, 0.1});
  for (std::size_t j = 0; j < sparse.dim; ++j) {
    EXPECT_EQ(qs.weights[j].raw, qd.weights[j].raw);
  }
  EXPECT_EQ(qs.bias.raw, qd.bias.raw);
}

TEST(Gradients, L1SignOfZeroContributesNothing) {
  const auto ds = dense_dataset(2, {{0.0, 0.0}}, {1});
  LinearModel<double> m;
  m.weights = {0.0, -0.5};
  const auto g = lr_gradient(kReal, m, ds, {0, 1}, RegSpec{RegKind::kL1, 0.3});
  EXPECT_DOUBLE_EQ(g.weights[0], 0.0);
  EXPECT_DOUBLE_EQ(g.weights[1], -0.3);
}

}  // namespace
}  // namespace pssim
