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

#include "slidetune/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "slidetune/errors.hpp"
#include "slidetune/rng.hpp"

namespace slidetune {
namespace {

constexpr std::uint64_t kBootstrapStream = 0xb0075;

void CheckLabelsAndPredictions(std::span<const std::size_t> labels,
                               std::span<const std::size_t> predictions,
                               std::size_t num_classes) {
  if (labels.size() != predictions.size()) {
    throw ShapeError("labels has length " + std::to_string(labels.size()) +
                     " but predictions has length " +
                     std::to_string(predictions.size()));
  }
  if (labels.empty()) throw ShapeError("cannot score an empty label set");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes || predictions[i] >= num_classes) {
      throw IndexError("sample " + std::to_string(i) + " has label " +
                       std::to_string(labels[i]) + " / prediction " +
                       std::to_string(predictions[i]) + " outside [0, " +
                       std::to_string(num_classes) + ")");
    }
  }
}

std::vector<std::size_t> Support(std::span<const std::size_t> labels,
                                 std::size_t num_classes) {
  std::vector<std::size_t> support(num_classes, 0);
  for (std::size_t y : labels) ++support[y];
  return support;
}

std::vector<std::size_t> AbsentClasses(const std::vector<std::size_t>& support) {
  std::vector<std::size_t> absent;
  for (std::size_t c = 0; c < support.size(); ++c) {
    if (support[c] == 0) absent.push_back(c);
  }
  return absent;
}

std::string Fmt(double v) { return FormatNumber(v); }

}  // namespace

MetricValue BalancedAccuracy(std::span<const std::size_t> labels,
                             std::span<const std::size_t> predictions,
                             std::size_t num_classes) {
  CheckLabelsAndPredictions(labels, predictions, num_classes);
  const auto support = Support(labels, num_classes);
  std::vector<std::size_t> hits(num_classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == predictions[i]) ++hits[labels[i]];
  }
  MetricValue out;
  out.absent_classes = AbsentClasses(support);
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (support[c] == 0) continue;
    sum += static_cast<double>(hits[c]) / static_cast<double>(support[c]);
    ++present;
  }
  out.value = sum / static_cast<double>(present);
  return out;
}

MetricValue RocAuc(std::span<const std::size_t> labels, const Matrix& scores) {
  const std::size_t n = labels.size();
  const std::size_t num_classes = scores.cols();
  if (scores.rows() != n) {
    throw ShapeError("roc_auc: " + std::to_string(n) + " labels but scores " +
                     scores.ShapeString());
  }
  if (n == 0) throw ShapeError("cannot score an empty label set");
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= num_classes) {
      throw IndexError("sample " + std::to_string(i) + " has label " +
                       std::to_string(labels[i]) + " outside [0, " +
                       std::to_string(num_classes) + ")");
    }
  }
  const auto support = Support(labels, num_classes);
  MetricValue out;
  out.absent_classes = AbsentClasses(support);
  if (num_classes - out.absent_classes.size() < 2) {
    throw UndefinedMetricError(
        "roc_auc undefined: every sample belongs to class " +
        std::to_string(labels[0]) + ", so it has no negatives");
  }

  std::vector<std::size_t> order(n);
  std::vector<double> ranks(n);
  double auc_sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (support[c] == 0) continue;
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return scores(a, c) < scores(b, c);
    });
    // Average 1-based ranks over tie groups.
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i + 1;
      while (j < n && scores(order[j], c) == scores(order[i], c)) ++j;
      const double avg = 0.5 * static_cast<double>(i + 1 + j);
      for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
      i = j;
    }
    double pos_rank_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i] == c) pos_rank_sum += ranks[i];
    }
    const double pos = static_cast<double>(support[c]);
    const double neg = static_cast<double>(n - support[c]);
    auc_sum += (pos_rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
    ++present;
  }
  out.value = auc_sum / static_cast<double>(present);
  return out;
}

MetricValue WeightedF1(std::span<const std::size_t> labels,
                       std::span<const std::size_t> predictions,
                       std::size_t num_classes) {
  CheckLabelsAndPredictions(labels, predictions, num_classes);
  const auto support = Support(labels, num_classes);
  std::vector<std::size_t> tp(num_classes, 0);
  std::vector<std::size_t> predicted(num_classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++predicted[predictions[i]];
    if (labels[i] == predictions[i]) ++tp[labels[i]];
  }
  MetricValue out;
  out.absent_classes = AbsentClasses(support);
  double sum = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    const double fp = static_cast<double>(predicted[c] - tp[c]);
    const double fn = static_cast<double>(support[c] - tp[c]);
    const double t = static_cast<double>(tp[c]);
    const double denom = 2.0 * t + fp + fn;
    const double f1 = denom > 0.0 ? 2.0 * t / denom : 0.0;
    sum += f1 * static_cast<double>(support[c]);
  }
  out.value = sum / static_cast<double>(labels.size());
  return out;
}

double Accuracy(std::span<const std::size_t> labels,
                std::span<const std::size_t> predictions) {
  if (labels.size() != predictions.size()) {
    throw ShapeError("labels has length " + std::to_string(labels.size()) +
                     " but predictions has length " +
                     std::to_string(predictions.size()));
  }
  if (labels.empty()) throw ShapeError("cannot score an empty label set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += labels[i] == predictions[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

std::vector<std::vector<std::size_t>> ConfusionMatrix(
    std::span<const std::size_t> labels,
    std::span<const std::size_t> predictions, std::size_t num_classes) {
  CheckLabelsAndPredictions(labels, predictions, num_classes);
  std::vector<std::vector<std::size_t>> m(num_classes,
                                          std::vector<std::size_t>(num_classes, 0));
  for (std::size_t i = 0; i < labels.size(); ++i) ++m[labels[i]][predictions[i]];
  return m;
}

std::vector<std::optional<double>> PerClassRecall(
    std::span<const std::size_t> labels,
    std::span<const std::size_t> predictions, std::size_t num_classes) {
  const auto m = ConfusionMatrix(labels, predictions, num_classes);
  std::vector<std::optional<double>> recall(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) {
    const std::size_t total = std::accumulate(m[c].begin(), m[c].end(), std::size_t{0});
    if (total > 0) recall[c] = static_cast<double>(m[c][c]) / static_cast<double>(total);
  }
  return recall;
}

const char* MetricName(MetricKind kind) {
  switch (kind) {
    case MetricKind::kBalancedAccuracy: return "balanced_accuracy";
    case MetricKind::kRocAuc: return "roc_auc";
    case MetricKind::kWeightedF1: return "weighted_f1";
    case MetricKind::kAccuracy: return "accuracy";
  }
  return "?";
}

MetricKind ParseMetric(std::string_view name) {
  if (name == "balanced_accuracy" || name == "bal_acc") return MetricKind::kBalancedAccuracy;
  if (name == "roc_auc" || name == "auc") return MetricKind::kRocAuc;
  if (name == "weighted_f1") return MetricKind::kWeightedF1;
  if (name == "accuracy") return MetricKind::kAccuracy;
  throw ConfigError("unknown metric '" + std::string(name) + "'");
}

void PredictionSet::Validate() const {
  CheckLabelsAndPredictions(labels, predictions, num_classes);
  if (!scores.empty() &&
      (scores.rows() != labels.size() || scores.cols() != num_classes)) {
    throw ShapeError("prediction scores " + scores.ShapeString() +
                     " do not match " + std::to_string(labels.size()) +
                     " samples x " + std::to_string(num_classes) + " classes");
  }
}

double ComputeMetric(MetricKind kind, const PredictionSet& set) {
  switch (kind) {
    case MetricKind::kBalancedAccuracy:
      return BalancedAccuracy(set.labels, set.predictions, set.num_classes).value;
    case MetricKind::kRocAuc:
      return RocAuc(set.labels, set.scores).value;
    case MetricKind::kWeightedF1:
      return WeightedF1(set.labels, set.predictions, set.num_classes).value;
    case MetricKind::kAccuracy:
      return Accuracy(set.labels, set.predictions);
  }
  return 0.0;
}

double Percentile(std::vector<double> values, double q) {
  if (values.empty()) throw ShapeError("percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

ConfidenceInterval BootstrapCi(const PredictionSet& set, MetricKind metric,
                               const BootstrapOptions& options) {
  if (options.resamples < 100) {
    throw ConfigError("bootstrap needs at least 100 resamples, got " +
                      std::to_string(options.resamples));
  }
  if (!(options.confidence > 0.0 && options.confidence < 1.0)) {
    throw ConfigError("bootstrap confidence must lie in (0, 1)");
  }
  set.Validate();
  const std::size_t n = set.size();
  const bool needs_scores = metric == MetricKind::kRocAuc;

  PredictionSet sample;
  sample.num_classes = set.num_classes;
  sample.labels.resize(n);
  sample.predictions.resize(n);
  if (needs_scores) sample.scores = Matrix(n, set.num_classes);

  const std::size_t max_draws = 10 * options.resamples;
  std::size_t draws = 0;
  std::size_t undefined = 0;
  std::vector<double> stats;
  stats.reserve(options.resamples);
  for (std::size_t r = 0; r < options.resamples; ++r) {
    for (std::uint64_t attempt = 0;; ++attempt) {
      if (draws >= max_draws) {
        throw DegenerateDataError(
            "metric " + std::string(MetricName(metric)) + " was undefined on " +
            std::to_string(undefined) + " of " + std::to_string(draws) +
            " bootstrap resamples");
      }
      ++draws;
      CounterRng rng(options.seed, StreamKey({kBootstrapStream, r, attempt}));
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t src = rng.UniformIndex(n);
        sample.labels[i] = set.labels[src];
        sample.predictions[i] = set.predictions[src];
        if (needs_scores) {
          const auto from = set.scores.row(src);
          std::copy(from.begin(), from.end(), sample.scores.row(i).begin());
        }
      }
      try {
        stats.push_back(ComputeMetric(metric, sample));
        break;
      } catch (const UndefinedMetricError&) {
        ++undefined;
      }
    }
  }
  const double alpha = 1.0 - options.confidence;
  ConfidenceInterval ci;
  ci.lower = Percentile(stats, alpha / 2.0);
  ci.upper = Percentile(stats, 1.0 - alpha / 2.0);
  return ci;
}

const MetricEstimate& EvalReport::Get(MetricKind kind) const {
  switch (kind) {
    case MetricKind::kBalancedAccuracy: return balanced_accuracy;
    case MetricKind::kRocAuc: return roc_auc;
    case MetricKind::kWeightedF1: return weighted_f1;
    case MetricKind::kAccuracy: break;
  }
  throw ConfigError("eval reports do not carry plain accuracy");
}

EvalReport MakeEvalReport(const PredictionSet& set, std::uint64_t run_seed,
                          const BootstrapOptions& bootstrap) {
  set.Validate();
  EvalReport report;
  report.n_test = set.size();
  report.num_classes = set.num_classes;
  report.seed = run_seed;
  report.bootstrap_resamples = bootstrap.resamples;
  report.bootstrap_seed = bootstrap.seed;
  report.confidence = bootstrap.confidence;
  report.per_class_recall = PerClassRecall(set.labels, set.predictions, set.num_classes);
  report.confusion = ConfusionMatrix(set.labels, set.predictions, set.num_classes);
  report.absent_classes = AbsentClasses(Support(set.labels, set.num_classes));

  auto estimate = [&](MetricKind kind) {
    MetricEstimate e;
    e.point = ComputeMetric(kind, set);
    const ConfidenceInterval ci = BootstrapCi(set, kind, bootstrap);
    e.lower = ci.lower;
    e.upper = ci.upper;
    return e;
  };
  report.balanced_accuracy = estimate(MetricKind::kBalancedAccuracy);
  report.roc_auc = estimate(MetricKind::kRocAuc);
  report.weighted_f1 = estimate(MetricKind::kWeightedF1);
  return report;
}

std::string ToCanonicalText(const EvalReport& r) {
  std::ostringstream out;
  out << "ci_method=" << kCiMethod << '\n'
      << "confidence=" << Fmt(r.confidence) << '\n'
      << "bootstrap_resamples=" << r.bootstrap_resamples << '\n'
      << "bootstrap_seed=" << r.bootstrap_seed << '\n'
      << "auc_averaging=" << kAucAveraging << '\n'
      << "seed=" << r.seed << '\n'
      << "n_test=" << r.n_test << '\n'
      << "num_classes=" << r.num_classes << '\n';
  auto metric = [&](const char* name, const MetricEstimate& e) {
    out << name << '=' << Fmt(e.point) << '\n'
        << name << "_ci_lower=" << Fmt(e.lower) << '\n'
        << name << "_ci_upper=" << Fmt(e.upper) << '\n';
  };
  metric("balanced_accuracy", r.balanced_accuracy);
  metric("roc_auc", r.roc_auc);
  metric("weighted_f1", r.weighted_f1);
  out << "per_class_recall=";
  for (std::size_t c = 0; c < r.per_class_recall.size(); ++c) {
    if (c) out << ',';
    if (r.per_class_recall[c]) {
      out << Fmt(*r.per_class_recall[c]);
    } else {
      out << "absent";
    }
  }
  out << '\n' << "absent_classes=";
  for (std::size_t i = 0; i < r.absent_classes.size(); ++i) {
    if (i) out << ',';
    out << r.absent_classes[i];
  }
  out << '\n' << "confusion=";
  for (std::size_t i = 0; i < r.confusion.size(); ++i) {
    if (i) out << ';';
    for (std::size_t j = 0; j < r.confusion[i].size(); ++j) {
      if (j) out << ',';
      out << r.confusion[i][j];
    }
  }
  out << '\n';
  return out.str();
}

std::string ToCsv(const EvalReport& r) {
  std::ostringstream out;
  out << "# ci_method=" << kCiMethod << " confidence=" << Fmt(r.confidence)
      << " bootstrap_resamples=" << r.bootstrap_resamples
      << " bootstrap_seed=" << r.bootstrap_seed
      << " auc_averaging=" << kAucAveraging << " seed=" << r.seed
      << " n_test=" << r.n_test << '\n';
  out << "metric,point,ci_lower,ci_upper\n";
  auto row = [&](const char* name, const MetricEstimate& e) {
    out << name << ',' << Fmt(e.point) << ',' << Fmt(e.lower) << ','
        << Fmt(e.upper) << '\n';
  };
  row("balanced_accuracy", r.balanced_accuracy);
  row("roc_auc", r.roc_auc);
  row("weighted_f1", r.weighted_f1);
  return out.str();
}

SeedSummary AggregateSeeds(std::span<const SeedValue> values) {
  if (values.size() < 2) {
    throw ConfigError("seed aggregation needs at least 2 seeds, got " +
                      std::to_string(values.size()));
  }
  SeedSummary s;
  s.task = values.front().task;
  s.metric = values.front().metric;
  for (const SeedValue& v : values) {
    if (v.task != s.task || v.metric != s.metric) {
      throw ConfigError("cannot aggregate " + v.task + "/" + v.metric +
                        " with " + s.task + "/" + s.metric);
    }
    s.seeds.push_back(v.seed);
    s.values.push_back(v.value);
  }
  const MeanStd ms = ComputeMeanStd(s.values);
  s.mean = ms.mean;
  s.stddev = ms.stddev;
  s.count = s.values.size();
  return s;
}

MeanStd ComputeMeanStd(std::span<const double> values) {
  if (values.empty()) throw ShapeError("mean of an empty list");
  MeanStd out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  // Identical values: report them exactly rather than a rounded mean.
  if (std::all_of(values.begin(), values.end(),
                  [&](double v) { return v == values.front(); })) {
    out.mean = values.front();
    return out;
  }
  double sq = 0.0;
  for (double v : values) sq += (v - out.mean) * (v - out.mean);
  out.stddev = std::sqrt(sq / static_cast<double>(values.size()));
  return out;
}

}  // namespace slidetune
