#include "pssim/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "pssim/rng.hpp"

namespace pssim {
namespace {

const RealMode kReal{};

// O(P*Q) pairwise oracle: win = 1, tie = 1/2.
double auc_pairwise_oracle(const std::vector<double>& scores,
                           const std::vector<int>& labels) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

TEST(Auc, PerfectRanking) {
  const std::vector<double> scores{0.9, 0.8, 0.3, 0.2};
  const std::vector<int> labels{1, 1, 0, 0};
  EXPECT_DOUBLE_EQ(auc_score(scores, labels), 1.0);
}

TEST(Auc, AllTiedIsHalf) {
  const std::vector<double> scores{0.5, 0.5, 0.5, 0.5, 0.5};
  const std::vector<int> labels{1, 0, 1, 0, 0};
  EXPECT_DOUBLE_EQ(auc_score(scores, labels), 0.5);
}

TEST(Auc, SingleClassThrows) {
  const std::vector<double> scores{0.1, 0.2};
  const std::vector<int> ones{1, 1};
  const std::vector<int> zeros{0, 0};
  EXPECT_THROW((void)auc_score(scores, ones), UndefinedAucError);
  EXPECT_THROW((void)auc_score(scores, zeros), UndefinedAucError);
}

TEST(Auc, MatchesPairwiseOracleRandomized) {
  SplitMix64 rng(71);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng.next_below(199);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    const bool with_ties = trial % 2 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = with_ties
                      ? static_cast<double>(rng.next_below(8)) / 4.0
                      : rng.next_unit();
      labels[i] = static_cast<int>(rng.next() & 1);
    }
    bool has_pos = false, has_neg = false;
    for (int y : labels) (y == 1 ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg) {
      labels[0] = 1;
      labels[n - 1] = 0;
    }
    EXPECT_DOUBLE_EQ(auc_score(scores, labels), auc_pairwise_oracle(scores, labels));
  }
}

TEST(Auc, InvariantUnderIncreasingTransforms) {
  SplitMix64 rng(73);
  std::vector<double> scores(80);
  std::vector<int> labels(80);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    scores[i] = rng.next_unit() * 4.0 - 2.0;
    labels[i] = static_cast<int>(rng.next() & 1);
  }
  labels[0] = 1;
  labels[1] = 0;
  const double base = auc_score(scores, labels);

  std::vector<double> affine(scores.size()), cubic(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    affine[i] = 3.5 * scores[i] + 11.0;
    cubic[i] = scores[i] * scores[i] * scores[i] + scores[i];  // strictly increasing
  }
  EXPECT_DOUBLE_EQ(auc_score(affine, labels), base);
  EXPECT_DOUBLE_EQ(auc_score(cubic, labels), base);
}

TEST(Auc, ComplementSymmetryWithoutTies) {
  SplitMix64 rng(79);
  std::vector<double> scores(60);
  std::vector<int> labels(60);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    scores[i] = rng.next_unit();
    labels[i] = static_cast<int>(rng.next() & 1);
  }
  labels[0] = 1;
  labels[1] = 0;
  std::vector<double> negated(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) negated[i] = -scores[i];
  EXPECT_NEAR(auc_score(negated, labels), 1.0 - auc_score(scores, labels), 1e-12);
}

TEST(Accuracy, AllCorrectAndTieRule) {
  std::vector<double> margins{1.0, -2.0, 3.0};
  std::vector<int> labels{1, 0, 1};
  EXPECT_DOUBLE_EQ(accuracy_from_margins(margins, labels), 1.0);

  // Zero margins classify positive: balanced labels give exactly 0.5.
  std::vector<double> zeros{0.0, 0.0, 0.0, 0.0};
  std::vector<int> balanced{1, 0, 1, 0};
  EXPECT_DOUBLE_EQ(accuracy_from_margins(zeros, balanced), 0.5);
}

TEST(Accuracy, EmptyTestSetThrows) {
  std::vector<double> margins;
  std::vector<int> labels;
  EXPECT_THROW((void)accuracy_from_margins(margins, labels), ConfigError);
  const Dataset<double> empty;
  const LinearModel<double> m = LinearModel<double>::zeros(0);
  EXPECT_THROW((void)accuracy(kReal, m, empty, LossKind::kLogistic), ConfigError);
}

TEST(Accuracy, MatchesEnumerationOracle) {
  SplitMix64 rng(83);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.next_below(40);
    Dataset<double> ds;
    ds.layout = Layout::kDense;
    ds.dim = 2;
    LinearModel<double> m;
    m.weights = {rng.next_unit() * 2 - 1, rng.next_unit() * 2 - 1};
    m.bias = rng.next_unit() - 0.5;
    for (std::size_t i = 0; i < n; ++i) {
      ds.dense_values.push_back(rng.next_unit() * 4 - 2);
      ds.dense_values.push_back(rng.next_unit() * 4 - 2);
      ds.labels.push_back(static_cast<std::int32_t>(rng.next() & 1));
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double margin = m.weights[0] * ds.dense_values[2 * i] +
                            m.weights[1] * ds.dense_values[2 * i + 1] + m.bias;
      const int predicted = margin >= 0.0 ? 1 : 0;
      correct += predicted == ds.labels[i];
    }
    EXPECT_DOUBLE_EQ(accuracy(kReal, m, ds, LossKind::kLogistic),
                     static_cast<double>(correct) / static_cast<double>(n));
  }
}

TEST(EvaluateModel, ReportsAllFields) {
  const Dataset<double> test = generate_synthetic(4, 512, 2.0, 17);
  LinearModel<double> m = LinearModel<double>::zeros(4);
  for (auto& w : m.weights) w = 0.5;  // aligned with the class direction
  const EvalResult result =
      evaluate_model(kReal, m, test, LossKind::kLogistic, RegSpec{});
  EXPECT_EQ(result.n_test, 512u);
  EXPECT_GT(result.accuracy, 0.8);
  ASSERT_TRUE(result.auc.has_value());
  EXPECT_GT(*result.auc, 0.9);
  EXPECT_GT(result.mean_loss, 0.0);
  EXPECT_LE(result.accuracy, 1.0);
  EXPECT_LE(*result.auc, 1.0);
}

TEST(EvaluateModel, SingleClassTestSetHasNoAuc) {
  Dataset<double> test;
  test.layout = Layout::kDense;
  test.dim = 1;
  test.dense_values = {1.0, 2.0};
  test.labels = {1, 1};
  const LinearModel<double> m = LinearModel<double>::zeros(1);
  const EvalResult result =
      evaluate_model(kReal, m, test, LossKind::kLogistic, RegSpec{});
  EXPECT_FALSE(result.auc.has_value());
}

}  // namespace
}  // namespace pssim
