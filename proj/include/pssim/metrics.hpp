#pragma once

// Test-set evaluation: classification accuracy, Mann-Whitney AUC with
// midrank tie handling, and mean loss.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "pssim/data.hpp"
#include "pssim/errors.hpp"
#include "pssim/model.hpp"

namespace pssim {

struct EvalResult {
  double accuracy = 0.0;
  std::optional<double> auc;
  double mean_loss = 0.0;
  std::size_t n_test = 0;
};

// Fraction of samples whose margin sign matches the label; margin 0
// classifies positive. labels hold {0,1}.
inline double accuracy_from_margins(std::span<const double> margins,
                                    std::span<const int> labels) {
  if (margins.size() != labels.size()) {
    throw DimensionError("accuracy_from_margins: size mismatch");
  }
  if (margins.empty()) {
    throw ConfigError("accuracy_from_margins: empty test set");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < margins.size(); ++i) {
    const int predicted = margins[i] >= 0.0 ? 1 : 0;
    correct += predicted == labels[i];
  }
  return static_cast<double>(correct) / static_cast<double>(margins.size());
}

// AUC = (R+ - P(P+1)/2) / (P*Q) where R+ is the midrank sum of positives.
// Ties contribute 1/2 via midranks; single-class input throws.
inline double auc_score(std::span<const double> scores,
                        std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw DimensionError("auc_score: size mismatch");
  }
  const std::size_t n = scores.size();
  std::size_t positives = 0;
  for (int y : labels) positives += y == 1;
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) {
    throw UndefinedAucError("auc_score: needs at least one positive and one negative");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  double positive_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    // 1-based midrank of the tie group [i, j).
    const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) positive_rank_sum += midrank;
    }
    i = j;
  }
  const double p = static_cast<double>(positives);
  const double q = static_cast<double>(negatives);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

template <class Mode>
double accuracy(const Mode& num, const LinearModel<typename Mode::scalar>& m,
                const Dataset<typename Mode::scalar>& ds, LossKind loss) {
  if (ds.size() == 0) {
    throw ConfigError("accuracy: empty test set");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto s = ds.sample(i);
    const int y = convention_label(s.label, loss);
    const bool truth = y == 1;
    const bool predicted = num.to_real(predict_margin(num, m, s)) >= 0.0;
    correct += predicted == truth;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

// Margins double as ranking scores: AUC is invariant under the monotone
// margin -> probability map, so LR and SVM share this path. AUC is absent
// when the test set holds a single class.
template <class Mode>
EvalResult evaluate_model(const Mode& num,
                          const LinearModel<typename Mode::scalar>& m,
                          const Dataset<typename Mode::scalar>& ds, LossKind loss,
                          const RegSpec& reg) {
  if (ds.size() == 0) {
    throw ConfigError("evaluate_model: empty test set");
  }
  EvalResult result;
  result.n_test = ds.size();
  std::vector<double> margins(ds.size());
  std::vector<int> labels01(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto s = ds.sample(i);
    margins[i] = num.to_real(predict_margin(num, m, s));
    labels01[i] = convention_label(s.label, LossKind::kLogistic);
  }
  result.accuracy = accuracy_from_margins(margins, labels01);
  const bool has_pos = std::find(labels01.begin(), labels01.end(), 1) != labels01.end();
  const bool has_neg = std::find(labels01.begin(), labels01.end(), 0) != labels01.end();
  if (has_pos && has_neg) {
    result.auc = auc_score(margins, labels01);
  }
  result.mean_loss = loss_value(num, m, ds, IndexRange{0, ds.size()}, loss, reg);
  return result;
}

}  // namespace pssim
