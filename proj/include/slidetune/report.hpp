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

// Summary tables rendered from run records. Every function here is a pure
// function of its input records, so re-rendering a saved log reproduces the
// tables written when the suite ran.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "slidetune/harness.hpp"

namespace slidetune {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string ToCsv() const;
  // Space-padded columns with a dashed rule under the header.
  std::string ToText() const;
};

// A named table in two renderings: numeric columns for CSV, and formatted
// cells ("0.8488 (0.8440-0.8537)", "0.81 +/- 0.02") for reading.
struct RenderedTable {
  std::string name;
  std::string title;
  Table csv;
  Table text;
};

// Records sharing (method, cell, test set), in order of first appearance.
struct GroupSummary {
  Protocol protocol = Protocol::kBenchmark;
  std::string method;
  std::string spec;
  std::string cell;
  std::string test_name;
  bool internal = true;
  std::vector<std::uint64_t> seeds;         // successful runs
  std::vector<std::uint64_t> failed_seeds;
  std::vector<double> balanced_accuracy;    // per successful seed
  MeanStd bal_acc;
  MeanStd roc_auc;
  MeanStd weighted_f1;
  // Seed means of the point estimate and of each bootstrap bound.
  MetricEstimate mean_bal_acc;
  MetricEstimate mean_roc_auc;
  MetricEstimate mean_weighted_f1;

  std::size_t n_ok() const noexcept { return seeds.size(); }
};

std::vector<GroupSummary> SummarizeRecords(std::span<const RunRecord> records);

// Methods ranked by seed-mean balanced accuracy; failed methods sort last
// and show "gap". The best value in each metric column is starred.
RenderedTable BenchmarkTable(std::span<const RunRecord> records);
// One row per seed, one column per method, balanced accuracy point values.
RenderedTable PairedSeedTable(std::span<const RunRecord> records);
// Mean and std over seeds per (method, K).
RenderedTable FewShotCurveTable(std::span<const RunRecord> records);
// Mean and std over seeds per (method, test cohort).
RenderedTable TransferStabilityTable(std::span<const RunRecord> records);
// One row per pooling x activation cell with seed-mean metrics.
RenderedTable AblationTable(std::span<const RunRecord> records);

// Tables for the protocol of the records. Throws ConfigError("no records")
// for an empty set, and when records carry more than one protocol or plan
// hash.
std::vector<RenderedTable> RenderSummary(std::span<const RunRecord> records);

// Records whose plan hash equals the last record's; stale entries from
// earlier plans in the same log are dropped, and a repeated run keeps only
// its latest record.
std::vector<RunRecord> LatestPlanRecords(std::span<const RunRecord> records);

// Writes <dir>/<name>.csv and <dir>/<name>.txt for each table.
void WriteTables(const std::filesystem::path& dir,
                 std::span<const RenderedTable> tables);
std::string TablesToText(std::span<const RenderedTable> tables);

}  // namespace slidetune
