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

// Slide-level classification metrics, percentile-bootstrap confidence
// intervals, and seed aggregation.
//
// Classes that never occur in `labels` are excluded from macro averages and
// listed in `absent_classes` instead of silently scoring zero.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "slidetune/matrix.hpp"

namespace slidetune {

struct MetricValue {
  double value = 0.0;
  std::vector<std::size_t> absent_classes;
};

// Mean per-class recall over classes present in `labels`.
MetricValue BalancedAccuracy(std::span<const std::size_t> labels,
                             std::span<const std::size_t> predictions,
                             std::size_t num_classes);

// Macro one-vs-rest ROC AUC. Each binary AUC is the Mann-Whitney statistic
// (ties count 1/2), computed from average ranks. `scores` is n x K.
// Throws UndefinedMetricError when fewer than two classes are present.
MetricValue RocAuc(std::span<const std::size_t> labels, const Matrix& scores);

// Support-weighted mean of per-class F1. A class with no true and no
// predicted samples has F1 0 and weight 0.
MetricValue WeightedF1(std::span<const std::size_t> labels,
                       std::span<const std::size_t> predictions,
                       std::size_t num_classes);

double Accuracy(std::span<const std::size_t> labels,
                std::span<const std::size_t> predictions);

// confusion[true][predicted].
std::vector<std::vector<std::size_t>> ConfusionMatrix(
    std::span<const std::size_t> labels,
    std::span<const std::size_t> predictions, std::size_t num_classes);

// Recall per class; nullopt for classes absent from `labels`.
std::vector<std::optional<double>> PerClassRecall(
    std::span<const std::size_t> labels,
    std::span<const std::size_t> predictions, std::size_t num_classes);

enum class MetricKind { kBalancedAccuracy, kRocAuc, kWeightedF1, kAccuracy };

const char* MetricName(MetricKind kind);
MetricKind ParseMetric(std::string_view name);

// Everything a metric can be computed from for one evaluated test set.
struct PredictionSet {
  std::vector<std::size_t> labels;
  std::vector<std::size_t> predictions;
  Matrix scores;  // n x K class probabilities
  std::size_t num_classes = 0;

  std::size_t size() const noexcept { return labels.size(); }
  void Validate() const;
};

double ComputeMetric(MetricKind kind, const PredictionSet& set);

struct ConfidenceInterval {
  double lower = 0.0;
  double upper = 0.0;
};

struct BootstrapOptions {
  std::size_t resamples = 1000;
  std::uint64_t seed = 0;
  double confidence = 0.95;
};

// Percentile bootstrap over slides. Resample r draws from its own counter
// stream keyed by (seed, r, attempt), so the interval does not depend on
// evaluation order. Resamples on which the metric is undefined are redrawn;
// after 10 x resamples total draws a DegenerateDataError is raised.
// Throws ConfigError if resamples < 100.
ConfidenceInterval BootstrapCi(const PredictionSet& set, MetricKind metric,
                               const BootstrapOptions& options = {});

// Linear interpolation between order statistics at q * (n - 1).
double Percentile(std::vector<double> values, double q);

struct MetricEstimate {
  double point = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

inline constexpr std::string_view kCiMethod = "percentile_bootstrap_over_slides";
inline constexpr std::string_view kAucAveraging = "macro_one_vs_rest";

struct EvalReport {
  MetricEstimate balanced_accuracy;
  MetricEstimate roc_auc;
  MetricEstimate weighted_f1;
  std::size_t n_test = 0;
  std::size_t num_classes = 0;
  std::vector<std::optional<double>> per_class_recall;
  std::vector<std::vector<std::size_t>> confusion;
  std::vector<std::size_t> absent_classes;
  std::uint64_t seed = 0;
  std::size_t bootstrap_resamples = 0;
  std::uint64_t bootstrap_seed = 0;
  double confidence = 0.95;

  const MetricEstimate& Get(MetricKind kind) const;
};

EvalReport MakeEvalReport(const PredictionSet& set, std::uint64_t run_seed,
                          const BootstrapOptions& bootstrap = {});

// key=value lines with the method fields first.
std::string ToCanonicalText(const EvalReport& report);
// "metric,point,ci_lower,ci_upper" plus a header comment with method fields.
std::string ToCsv(const EvalReport& report);

struct SeedValue {
  std::string task;
  std::string metric;
  std::uint64_t seed = 0;
  double value = 0.0;
};

struct SeedSummary {
  std::string task;
  std::string metric;
  std::vector<std::uint64_t> seeds;
  std::vector<double> values;
  double mean = 0.0;
  double stddev = 0.0;  // population
  std::size_t count = 0;
};

// Requires >= 2 values sharing task and metric (ConfigError otherwise).
SeedSummary AggregateSeeds(std::span<const SeedValue> values);

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;
};
// Population mean/std of any non-empty list (std 0 for a single value).
MeanStd ComputeMeanStd(std::span<const double> values);

}  // namespace slidetune
