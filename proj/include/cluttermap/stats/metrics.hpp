#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cluttermap/core/error.hpp"

namespace cluttermap::stats {

// ---------------------------------------------------------------------------
// Per-class sensitivity and fold aggregation
// ---------------------------------------------------------------------------

struct ClassRate {
  double tpr = 0.0;
  long long n = 0;
};

// TPR of `cls`: correct-within-class / class count. Returns nothing when the
// class never occurs in `truths` (absent, not zero).
inline std::optional<ClassRate> per_class_tpr(const std::vector<int>& predictions,
                                              const std::vector<int>& truths,
                                              int cls) {
  require(predictions.size() == truths.size(),
          "predictions and truths must be aligned (", predictions.size(),
          " vs ", truths.size(), ")");
  long long n = 0, correct = 0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (truths[i] != cls) continue;
    ++n;
    if (predictions[i] == cls) ++correct;
  }
  if (n == 0) return std::nullopt;
  return ClassRate{static_cast<double>(correct) / static_cast<double>(n), n};
}

struct WeightedMoments {
  double mean = 0.0;
  double sd = 0.0;
};

// Weighted mean and weighted population standard deviation about it.
inline WeightedMoments weighted_fold_mean(const std::vector<double>& values,
                                          const std::vector<double>& weights) {
  require(!values.empty(), "weighted mean of empty input");
  require(values.size() == weights.size(), "value/weight length mismatch");
  double wsum = 0, acc = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    require(weights[i] > 0, "weights must be positive, got ", weights[i]);
    wsum += weights[i];
    acc += weights[i] * values[i];
  }
  const double mean = acc / wsum;
  double var = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - mean;
    var += weights[i] * d * d;
  }
  return {mean, std::sqrt(var / wsum)};
}

// ---------------------------------------------------------------------------
// Stage composition: total TPR is the product of the per-stage TPRs, and the
// standard deviation of the product uses the exact variance of a product of
// independent random variables.
// ---------------------------------------------------------------------------

inline double compose_tpr(const std::vector<double>& stage_tprs) {
  double p = 1.0;
  for (double t : stage_tprs) {
    require(t >= 0.0 && t <= 1.0, "stage TPR must be in [0,1], got ", t);
    p *= t;
  }
  return p;
}

inline double goodman_product_sd(double m1, double s1, double m2, double s2) {
  require(s1 >= 0 && s2 >= 0, "standard deviations must be non-negative");
  return std::sqrt(s1 * s1 * s2 * s2 + s1 * s1 * m2 * m2 + s2 * s2 * m1 * m1);
}

// ---------------------------------------------------------------------------
// Paired-classifier comparison (method 2 = two-stage, method 1 = single-stage)
// ---------------------------------------------------------------------------

struct ContingencyTable {
  long long n_both_correct = 0;
  long long n_2only = 0;  // two-stage correct, single-stage wrong
  long long n_1only = 0;  // single-stage correct, two-stage wrong
  long long n_both_wrong = 0;

  long long total() const {
    return n_both_correct + n_2only + n_1only + n_both_wrong;
  }
};

inline ContingencyTable build_contingency(
    const std::vector<bool>& two_stage_correct,
    const std::vector<bool>& single_stage_correct) {
  require(two_stage_correct.size() == single_stage_correct.size(),
          "paired correctness records must be aligned (",
          two_stage_correct.size(), " vs ", single_stage_correct.size(), ")");
  ContingencyTable t;
  for (std::size_t i = 0; i < two_stage_correct.size(); ++i) {
    const bool two = two_stage_correct[i];
    const bool one = single_stage_correct[i];
    if (two && one) ++t.n_both_correct;
    else if (two) ++t.n_2only;
    else if (one) ++t.n_1only;
    else ++t.n_both_wrong;
  }
  return t;
}

enum class Direction { Greater, Less };

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  Direction direction = Direction::Greater;
  bool no_disagreement = false;
};

// Upper tail of chi-squared with 1 degree of freedom, computed analytically:
// P(X > s) = erfc(sqrt(s/2)). Exact far into the tail (1e-21 and below).
inline double chi2_1_upper_tail(double s) {
  if (s <= 0) return 1.0;
  return std::erfc(std::sqrt(s / 2.0));
}

// One-sided McNemar test with continuity correction on the disagreement
// counts b = n_2only, c = n_1only. Direction Greater tests whether the
// two-stage method improves accuracy; Less reverses the alternative.
inline TestResult mcnemar_one_sided(const ContingencyTable& table,
                                    Direction direction) {
  const long long b = table.n_2only;
  const long long c = table.n_1only;
  TestResult res;
  res.direction = direction;
  if (b + c == 0) {
    res.no_disagreement = true;
    res.statistic = 0.0;
    res.p_value = 1.0;
    return res;
  }
  const double diff = std::abs(static_cast<double>(b - c));
  res.statistic =
      diff <= 1.0 ? 0.0 : (diff - 1.0) * (diff - 1.0) / static_cast<double>(b + c);
  const double half_tail = chi2_1_upper_tail(res.statistic) / 2.0;
  const bool sign_matches =
      (direction == Direction::Greater) ? (b > c) : (b < c);
  res.p_value = sign_matches ? half_tail : 1.0 - half_tail;
  // Keep the p-value inside (0,1] even for extreme statistics.
  res.p_value = std::max(res.p_value, std::numeric_limits<double>::denorm_min());
  return res;
}

// ---------------------------------------------------------------------------
// F1 scores
// ---------------------------------------------------------------------------

struct F1Result {
  double micro = 0.0;
  double macro = 0.0;
  // Classes with zero true and zero predicted samples; they contribute F1=0.
  std::vector<int> degenerate_classes;
};

inline F1Result f1_scores(const std::vector<int>& predictions,
                          const std::vector<int>& truths, int num_classes) {
  require(!predictions.empty(), "f1 of empty input");
  require(predictions.size() == truths.size(),
          "predictions and truths must be aligned");
  std::vector<long long> tp(static_cast<std::size_t>(num_classes), 0);
  std::vector<long long> fp(static_cast<std::size_t>(num_classes), 0);
  std::vector<long long> fn(static_cast<std::size_t>(num_classes), 0);
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const int t = truths[i], p = predictions[i];
    require(t >= 0 && t < num_classes && p >= 0 && p < num_classes,
            "label out of range at row ", i);
    if (t == p) {
      ++tp[static_cast<std::size_t>(t)];
    } else {
      ++fp[static_cast<std::size_t>(p)];
      ++fn[static_cast<std::size_t>(t)];
    }
  }
  F1Result res;
  long long tp_sum = 0, fp_sum = 0, fn_sum = 0;
  double macro_sum = 0;
  for (int c = 0; c < num_classes; ++c) {
    const auto i = static_cast<std::size_t>(c);
    tp_sum += tp[i];
    fp_sum += fp[i];
    fn_sum += fn[i];
    if (tp[i] == 0 && fp[i] == 0 && fn[i] == 0) {
      res.degenerate_classes.push_back(c);
      continue;  // contributes 0 to the macro sum
    }
    const double denom = 2.0 * tp[i] + fp[i] + fn[i];
    macro_sum += denom > 0 ? 2.0 * tp[i] / denom : 0.0;
  }
  res.macro = macro_sum / num_classes;
  const double micro_denom = 2.0 * tp_sum + fp_sum + fn_sum;
  res.micro = micro_denom > 0 ? 2.0 * tp_sum / micro_denom : 0.0;
  return res;
}

}  // namespace cluttermap::stats
