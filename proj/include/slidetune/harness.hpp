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

// Experiment orchestration: benchmark, few-shot curves, cohort transfer and
// the pooling x activation ablation grid.
//
// A run is one (method, seed, cell) training job. Runs are independent and
// single-threaded; with jobs > 1 they execute on a worker pool, but records
// are always emitted in plan order, so the output does not depend on the
// degree of parallelism.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "slidetune/dataset.hpp"
#include "slidetune/metrics.hpp"
#include "slidetune/model.hpp"
#include "slidetune/optim.hpp"

namespace slidetune {

enum class Protocol { kBenchmark, kFewShot, kTransfer, kAblation };

const char* ProtocolName(Protocol protocol);
Protocol ParseProtocol(std::string_view name);

struct MethodEntry {
  std::string name;
  ModelSpec spec;
};

// Builds method entries through SpecForMethod.
std::vector<MethodEntry> MakeMethods(const std::vector<std::string>& names,
                                     std::size_t input_dim,
                                     std::size_t num_classes,
                                     const MethodOptions& options = {});

// {mean, max} x {relu, gelu, swiglu}, mean cells first.
std::vector<std::string> AblationGridMethods();

std::vector<std::uint64_t> DefaultSeeds(Protocol protocol);  // 0..4 or 0..9
inline const std::vector<std::size_t> kDefaultShots = {1, 5, 10, 20, 50};

struct ExperimentPlan {
  Protocol protocol = Protocol::kBenchmark;
  std::vector<MethodEntry> methods;
  std::vector<std::uint64_t> seeds;
  std::vector<std::size_t> shots;           // few-shot only
  std::string train_cohort;                 // transfer only
  std::vector<std::string> test_cohorts;    // transfer only
  TrainConfig train_config;                 // seed is replaced per run
  std::size_t bootstrap_resamples = 1000;
  std::size_t jobs = 1;
  // When set, checkpoints go to <output_dir>/checkpoints.
  std::filesystem::path output_dir;

  // Throws ConfigError: seeds non-empty and distinct, methods non-empty
  // with unique names, protocol-specific fields present; for ablation every
  // method must be a mean/max pool with an MLP head.
  void Validate() const;
};

// Hash of the manifest text, every embedding value, the train config, the
// method specs and the protocol fields.
std::string PlanHash(const ExperimentPlan& plan, const Dataset& dataset);

struct RunRecord {
  std::string plan_hash;
  Protocol protocol = Protocol::kBenchmark;
  std::string method;
  std::string spec;  // ModelSpec canonical text
  std::uint64_t seed = 0;
  std::string cell;  // "K=5", ablation cell, or empty
  std::string train_hash;
  std::size_t n_train = 0;
  std::string test_name;  // "test" or a cohort name
  bool internal = true;
  std::string test_hash;
  std::string checkpoint_path;
  std::string checkpoint_digest;
  double final_train_loss = 0.0;
  bool ok = true;
  std::string failure;
  std::vector<std::string> warnings;  // e.g. few-shot class clamping
  EvalReport report;
  // Excluded from the record log so logs are byte-reproducible.
  double wall_time_seconds = 0.0;
};

std::vector<RunRecord> RunBenchmark(const ExperimentPlan& plan, const Dataset& dataset);
std::vector<RunRecord> RunFewShot(const ExperimentPlan& plan, const Dataset& dataset);
std::vector<RunRecord> RunTransfer(const ExperimentPlan& plan, const Dataset& dataset);
std::vector<RunRecord> RunAblation(const ExperimentPlan& plan, const Dataset& dataset);
// Dispatches on plan.protocol.
std::vector<RunRecord> RunExperiment(const ExperimentPlan& plan, const Dataset& dataset);

// Evaluates a trained model on a slide selection.
PredictionSet PredictSelection(const SlideModel& model, const Dataset& dataset,
                               std::span<const std::size_t> indices);

// Record log: one JSON object per line, append-only.
std::string RecordToJsonLine(const RunRecord& record);
RunRecord RecordFromJsonLine(std::string_view line);
void AppendRecords(const std::filesystem::path& path,
                   std::span<const RunRecord> records);
std::vector<RunRecord> ReadRecords(const std::filesystem::path& path);

// "protocol,method,seed,cell,test,wall_time_seconds".
std::string TimingsCsv(std::span<const RunRecord> records);

}  // namespace slidetune
