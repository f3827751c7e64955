/*
 * Copyright 2026 The slidetune Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "slidetune/errors.hpp"
#include "slidetune/metrics.hpp"

namespace slidetune {
namespace {

using Labels = std::vector<std::size_t>;

PredictionSet FromLabels(const Labels& labels, const Labels& preds, std::size_t k) {
  PredictionSet s;
  s.labels = labels;
  s.predictions = preds;
  s.num_classes = k;
  s.scores = Matrix(labels.size(), k, 0.0);
  for (std::size_t i = 0; i < preds.size(); ++i) s.scores(i, preds[i]) = 1.0;
  return s;
}

TEST(BalancedAccuracy, WorkedExamples) {
  EXPECT_EQ(BalancedAccuracy(Labels{0, 1, 2, 1}, Labels{0, 1, 2, 1}, 3).value, 1.0);
  EXPECT_EQ(BalancedAccuracy(Labels{0, 0, 1}, Labels{0, 1, 1}, 2).value, 0.75);
  EXPECT_EQ(BalancedAccuracy(Labels{0, 0, 1, 1}, Labels{1, 1, 1, 1}, 2).value, 0.5);
}

TEST(BalancedAccuracy, AbsentClassExcludedAndFlagged) {
  const MetricValue v = BalancedAccuracy(Labels{0, 0, 2}, Labels{0, 1, 2}, 3);
  EXPECT_EQ(v.value, 0.75);
  EXPECT_EQ(v.absent_classes, (Labels{1}));
}

TEST(BalancedAccuracy, LengthMismatch) {
  EXPECT_THROW(BalancedAccuracy(Labels{0, 1}, Labels{0}, 2), ShapeError);
  EXPECT_THROW(WeightedF1(Labels{0, 1}, Labels{0}, 2), ShapeError);
}

// Property: renaming classes consistently leaves balanced accuracy unchanged.
TEST(BalancedAccuracyProperty, RelabelInvariance) {
  std::mt19937_64 gen(13);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t k = 2 + trial % 5, n = 5 + trial % 40;
    std::uniform_int_distribution<std::size_t> cls(0, k - 1);
    Labels y(n), p(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = cls(gen), p[i] = cls(gen);
    Labels perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), gen);
    Labels y2(n), p2(n);
    for (std::size_t i = 0; i < n; ++i) y2[i] = perm[y[i]], p2[i] = perm[p[i]];
    EXPECT_NEAR(BalancedAccuracy(y, p, k).value, BalancedAccuracy(y2, p2, k).value, 1e-15);
  }
}

TEST(RocAuc, WorkedExamples) {
  const Matrix perfect = Matrix::FromRows({{0.9, 0.1}, {0.8, 0.2}, {0.3, 0.7}, {0.1, 0.9}});
  EXPECT_EQ(RocAuc(Labels{0, 0, 1, 1}, perfect).value, 1.0);
  const Matrix flat(4, 2, 0.5);
  EXPECT_EQ(RocAuc(Labels{0, 1, 0, 1}, flat).value, 0.5);
  EXPECT_THROW(RocAuc(Labels{1, 1, 1}, Matrix(3, 2, 0.5)), UndefinedMetricError);
}

TEST(RocAuc, AbsentClassFlagged) {
  const Matrix s = Matrix::FromRows({{0.6, 0.1, 0.3}, {0.2, 0.1, 0.7}, {0.5, 0.2, 0.3}});
  const MetricValue v = RocAuc(Labels{0, 2, 0}, s);
  EXPECT_EQ(v.absent_classes, (Labels{1}));
  EXPECT_EQ(v.value, 1.0);
}

// Property: rank-based AUC equals brute-force pair enumeration, with ties.
TEST(RocAucProperty, MatchesPairEnumeration) {
  std::mt19937_64 gen(77);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t k = 2 + trial % 3, n = 2 + (trial * 7) % 49;
    std::uniform_int_distribution<std::size_t> cls(0, k - 1);
    std::uniform_int_distribution<int> level(0, 6);  // coarse scores force ties
    Labels y(n);
    for (auto& v : y) v = cls(gen);
    y[0] = 0;
    y[1] = 1;
    Matrix s(n, k);
    for (double& v : s.values()) v = level(gen) / 6.0;
    long double total = 0;
    std::size_t used = 0;
    for (std::size_t c = 0; c < k; ++c) {
      if (std::count(y.begin(), y.end(), c) == 0) continue;
      total += testing::PairAuc(y, s, c);
      ++used;
    }
    EXPECT_NEAR(RocAuc(y, s).value, static_cast<double>(total / used), 1e-12) << trial;
  }
}

TEST(WeightedF1, WorkedExamples) {
  EXPECT_EQ(WeightedF1(Labels{0, 1, 2}, Labels{0, 1, 2}, 3).value, 1.0);
  EXPECT_NEAR(WeightedF1(Labels{0, 0, 1, 1}, Labels{0, 0, 0, 1}, 2).value, (0.8 + 2.0 / 3.0) / 2, 1e-15);
  // Class 2 never true and never predicted: no effect.
  EXPECT_EQ(WeightedF1(Labels{0, 0, 1, 1}, Labels{0, 0, 0, 1}, 3).value,
            WeightedF1(Labels{0, 0, 1, 1}, Labels{0, 0, 0, 1}, 2).value);
}

// Property: balanced binary data with symmetric confusion gives the mean of
// the two per-class F1 values.
TEST(WeightedF1Property, SymmetricBinaryIsMeanOfClassF1) {
  for (std::size_t n = 1; n <= 20; ++n) {
    for (std::size_t wrong = 0; wrong <= n; ++wrong) {
      Labels y, p;
      for (std::size_t i = 0; i < n; ++i) y.push_back(0), p.push_back(i < wrong ? 1 : 0);
      for (std::size_t i = 0; i < n; ++i) y.push_back(1), p.push_back(i < wrong ? 0 : 1);
      const double tp = static_cast<double>(n - wrong);
      const double f1 = tp == 0 ? 0.0 : 2 * tp / (2 * tp + 2.0 * wrong);
      EXPECT_NEAR(WeightedF1(y, p, 2).value, f1, 1e-15);
    }
  }
}

TEST(Bootstrap, PerfectPredictionsGiveDegenerateInterval) {
  const PredictionSet s = FromLabels(Labels{0, 1, 2, 0, 1, 2, 0, 1}, Labels{0, 1, 2, 0, 1, 2, 0, 1}, 3);
  for (MetricKind m : {MetricKind::kBalancedAccuracy, MetricKind::kWeightedF1, MetricKind::kRocAuc}) {
    const ConfidenceInterval ci = BootstrapCi(s, m, {200, 3, 0.95});
    EXPECT_EQ(ci.lower, 1.0);
    EXPECT_EQ(ci.upper, 1.0);
  }
}

TEST(Bootstrap, RejectsFewResamplesAndDegenerateData) {
  const PredictionSet s = FromLabels(Labels{0, 1, 0, 1}, Labels{0, 1, 1, 1}, 2);
  EXPECT_THROW(BootstrapCi(s, MetricKind::kBalancedAccuracy, {99, 0, 0.95}), ConfigError);
  // A single observed class leaves AUC undefined on every resample.
  const Labels y(40, 0);
  const PredictionSet rare = FromLabels(y, y, 2);
  EXPECT_THROW(BootstrapCi(rare, MetricKind::kRocAuc, {1000, 0, 0.95}), DegenerateDataError);
}

// Property: bounds ordered, inside [0,1], deterministic per seed.
TEST(BootstrapProperty, OrderedBoundedDeterministic) {
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 10 + trial;
    std::uniform_int_distribution<std::size_t> cls(0, 2);
    Labels y(n), p(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = i % 3, p[i] = cls(gen);
    PredictionSet s = FromLabels(y, p, 3);
    for (double& v : s.scores.values()) v = std::uniform_real_distribution<double>(0, 1)(gen);
    for (MetricKind m : {MetricKind::kBalancedAccuracy, MetricKind::kRocAuc, MetricKind::kWeightedF1}) {
      const ConfidenceInterval a = BootstrapCi(s, m, {200, static_cast<std::uint64_t>(trial), 0.95});
      const ConfidenceInterval b = BootstrapCi(s, m, {200, static_cast<std::uint64_t>(trial), 0.95});
      EXPECT_EQ(a.lower, b.lower);
      EXPECT_EQ(a.upper, b.upper);
      EXPECT_LE(a.lower, a.upper);
      EXPECT_GE(a.lower, 0.0);
      EXPECT_LE(a.upper, 1.0);
    }
  }
}

TEST(Percentile, LinearInterpolation) {
  EXPECT_EQ(Percentile({4, 1, 3, 2}, 0.0), 1.0);
  EXPECT_EQ(Percentile({4, 1, 3, 2}, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(Percentile({4, 1, 3, 2}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(Percentile({0, 10}, 0.025), 0.25);
}

TEST(AggregateSeeds, WorkedExamples) {
  const std::vector<SeedValue> pair{{"t", "bal_acc", 0, 0.8}, {"t", "bal_acc", 1, 0.9}};
  const SeedSummary s = AggregateSeeds(pair);
  EXPECT_NEAR(s.mean, 0.85, 1e-15);
  EXPECT_NEAR(s.stddev, 0.05, 1e-15);
  EXPECT_EQ(s.count, 2u);
  const std::vector<SeedValue> same{{"t", "m", 0, 0.7}, {"t", "m", 1, 0.7}, {"t", "m", 2, 0.7}};
  EXPECT_EQ(AggregateSeeds(same).stddev, 0.0);
  EXPECT_THROW(AggregateSeeds(std::vector<SeedValue>{{"t", "m", 0, 0.7}}), ConfigError);
  EXPECT_THROW(AggregateSeeds(std::vector<SeedValue>{{"t", "m", 0, 0.7}, {"u", "m", 1, 0.7}}), ConfigError);
}

TEST(EvalReport, CarriesAllMetricsAndMethodFields) {
  const PredictionSet s = FromLabels(Labels{0, 1, 2, 0, 1, 2}, Labels{0, 1, 1, 0, 2, 2}, 3);
  const EvalReport r = MakeEvalReport(s, 4, {100, 4, 0.95});
  EXPECT_NEAR(r.balanced_accuracy.point, 4.0 / 6.0, 1e-15);
  EXPECT_EQ(r.n_test, 6u);
  EXPECT_EQ(r.bootstrap_resamples, 100u);
  EXPECT_LE(r.roc_auc.lower, r.roc_auc.upper);
  const std::string text = ToCanonicalText(r);
  EXPECT_NE(text.find(std::string(kCiMethod)), std::string::npos);
  EXPECT_NE(text.find(std::string(kAucAveraging)), std::string::npos);
  EXPECT_EQ(text, ToCanonicalText(MakeEvalReport(s, 4, {100, 4, 0.95})));
}

}  // namespace
}  // namespace slidetune
