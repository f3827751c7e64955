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

#include <fstream>
#include <map>
#include <set>

#include "oracles.hpp"
#include "slidetune/errors.hpp"
#include "slidetune/harness.hpp"
#include "slidetune/report.hpp"
#include "slidetune/synth.hpp"

namespace slidetune {
namespace {

Dataset TinyDataset(std::vector<std::string> cohorts = {"A"}, double rho = 1.0) {
  SynthConfig c;
  c.num_classes = 3;
  c.feature_dim = 6;
  c.train_per_class = 8;
  c.test_per_class = 4;
  c.patches_min = 3;
  c.patches_max = 6;
  c.informative_fraction = rho;
  c.cohorts = std::move(cohorts);
  SyntheticCorpus corpus = GenerateSyntheticCorpus(c);
  return Dataset(std::move(corpus.manifest), std::move(corpus.bags));
}

ExperimentPlan TinyPlan(const Dataset& d, Protocol p, std::vector<std::string> methods) {
  ExperimentPlan plan;
  plan.protocol = p;
  plan.methods = MakeMethods(methods, d.feature_dim(), d.num_classes(), {16, 8});
  plan.seeds = {0, 1};
  plan.train_config.epochs = 3;
  plan.train_config.learning_rate = 1e-2;
  plan.bootstrap_resamples = 100;
  return plan;
}

std::string Log(const std::vector<RunRecord>& records) {
  std::string out;
  for (const RunRecord& r : records) out += RecordToJsonLine(r) + "\n";
  return out;
}

TEST(Plan, ValidateRejectsBadPlans) {
  const Dataset d = TinyDataset();
  ExperimentPlan plan = TinyPlan(d, Protocol::kBenchmark, {"simlp"});
  EXPECT_NO_THROW(plan.Validate());
  ExperimentPlan p = plan;
  p.seeds = {};
  EXPECT_THROW(p.Validate(), ConfigError);
  p = plan;
  p.seeds = {3, 3};
  EXPECT_THROW(p.Validate(), ConfigError);
  p = plan;
  p.methods.push_back(p.methods[0]);
  EXPECT_THROW(p.Validate(), ConfigError);
  p = plan;
  p.bootstrap_resamples = 50;
  EXPECT_THROW(p.Validate(), ConfigError);
  p = plan;
  p.protocol = Protocol::kFewShot;
  p.shots = {};
  EXPECT_THROW(p.Validate(), ConfigError);
  p = plan;
  p.protocol = Protocol::kTransfer;
  EXPECT_THROW(p.Validate(), ConfigError);
  p = TinyPlan(d, Protocol::kAblation, {"abmil"});
  EXPECT_THROW(p.Validate(), ConfigError);
}

TEST(Plan, DefaultsAndGrid) {
  EXPECT_EQ(DefaultSeeds(Protocol::kBenchmark), (std::vector<std::uint64_t>{0, 1, 2, 3, 4}));
  EXPECT_EQ(DefaultSeeds(Protocol::kTransfer).size(), 10u);
  EXPECT_EQ(kDefaultShots, (std::vector<std::size_t>{1, 5, 10, 20, 50}));
  EXPECT_EQ(AblationGridMethods(),
            (std::vector<std::string>{"mean+relu", "mean+gelu", "mean+swiglu", "max+relu", "max+gelu", "max+swiglu"}));
}

TEST(Plan, HashBindsConfiguration) {
  const Dataset d = TinyDataset();
  const ExperimentPlan plan = TinyPlan(d, Protocol::kBenchmark, {"simlp"});
  const std::string h = PlanHash(plan, d);
  EXPECT_EQ(h, PlanHash(plan, d));
  ExperimentPlan other = plan;
  other.train_config.learning_rate = 2e-2;
  EXPECT_NE(PlanHash(other, d), h);
  other = plan;
  other.seeds = {0, 2};
  EXPECT_NE(PlanHash(other, d), h);
  other = TinyPlan(d, Protocol::kBenchmark, {"linear"});
  EXPECT_NE(PlanHash(other, d), h);
  // Parallelism is not part of the plan identity.
  other = plan;
  other.jobs = 3;
  EXPECT_EQ(PlanHash(other, d), h);
  const Dataset shifted = TinyDataset({"A"}, 0.5);
  EXPECT_NE(PlanHash(plan, shifted), h);
}

TEST(Benchmark, CardinalityAndPairing) {
  const Dataset d = TinyDataset();
  ExperimentPlan plan = TinyPlan(d, Protocol::kBenchmark, {"simlp"});
  plan.seeds = {0};
  const auto one = RunExperiment(plan, d);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_TRUE(one[0].ok) << one[0].failure;
  EXPECT_EQ(one[0].report.n_test, 12u);
  EXPECT_GT(one[0].report.roc_auc.point, 0.0);
  EXPECT_GT(one[0].report.weighted_f1.point, 0.0);

  plan = TinyPlan(d, Protocol::kBenchmark, {"simlp", "linear"});
  const auto two = RunExperiment(plan, d);
  ASSERT_EQ(two.size(), 4u);
  const RenderedTable paired = PairedSeedTable(two);
  ASSERT_EQ(paired.csv.rows.size(), 2u);
  EXPECT_EQ(paired.csv.header, (std::vector<std::string>{"seed", "simlp", "linear"}));
}

TEST(Benchmark, LowSignalCorpusSharesSplits) {
  const Dataset d = TinyDataset({"A"}, 0.1);
  const auto records = RunExperiment(TinyPlan(d, Protocol::kBenchmark, {"simlp", "linear"}), d);
  ASSERT_EQ(records.size(), 4u);
  for (const RunRecord& r : records) {
    EXPECT_TRUE(r.ok) << r.failure;
    EXPECT_EQ(r.train_hash, records[0].train_hash);
    EXPECT_EQ(r.test_hash, records[0].test_hash);
  }
}

TEST(FewShot, RecordsPerShotShareTestSet) {
  const Dataset d = TinyDataset();
  ExperimentPlan plan = TinyPlan(d, Protocol::kFewShot, {"simlp", "linear"});
  plan.seeds = {0};
  plan.shots = {1};
  EXPECT_EQ(RunExperiment(plan, d).size(), 2u);
  plan.seeds = {0, 1};
  plan.shots = {1, 2, 20};
  const auto records = RunExperiment(plan, d);
  ASSERT_EQ(records.size(), 2u * 2u * 3u);
  std::set<std::string> test_hashes, cells;
  for (const RunRecord& r : records) {
    test_hashes.insert(r.test_hash);
    cells.insert(r.cell);
    if (r.cell == "K=1") {
      EXPECT_EQ(r.n_train, 3u);
    }
    if (r.cell == "K=20") {
      EXPECT_EQ(r.n_train, 24u);
      EXPECT_EQ(r.warnings.size(), 3u);
    }
  }
  EXPECT_EQ(test_hashes.size(), 1u);
  EXPECT_EQ(cells, (std::set<std::string>{"K=1", "K=2", "K=20"}));
  const RenderedTable curve = FewShotCurveTable(records);
  EXPECT_EQ(curve.csv.rows.size(), 6u);
}

TEST(Transfer, TenSeedsPerMethodPerCohort) {
  const Dataset d = TinyDataset({"A", "B"});
  ExperimentPlan plan = TinyPlan(d, Protocol::kTransfer, {"linear", "simlp"});
  plan.seeds = DefaultSeeds(Protocol::kTransfer);
  plan.train_config.epochs = 1;
  plan.train_cohort = "A";
  plan.test_cohorts = {"A", "B"};
  const auto records = RunExperiment(plan, d);
  std::map<std::pair<std::string, std::string>, int> counts;
  for (const RunRecord& r : records) {
    EXPECT_TRUE(r.ok) << r.failure;
    ++counts[{r.method, r.test_name}];
    EXPECT_EQ(r.internal, r.test_name == "A");
  }
  EXPECT_EQ(counts.size(), 4u);
  for (const auto& [key, n] : counts) EXPECT_EQ(n, 10) << key.first << "/" << key.second;
  const RenderedTable stability = TransferStabilityTable(records);
  EXPECT_EQ(stability.csv.rows.size(), 4u);
}

TEST(Ablation, TwelveRunsSixCells) {
  const Dataset d = TinyDataset();
  ExperimentPlan plan = TinyPlan(d, Protocol::kAblation, AblationGridMethods());
  plan.train_config.epochs = 1;
  const auto records = RunExperiment(plan, d);
  EXPECT_EQ(records.size(), 12u);
  const RenderedTable table = AblationTable(records);
  ASSERT_EQ(table.text.rows.size(), 6u);
  EXPECT_EQ(table.text.rows[0][0], "Mean + ReLU");
  EXPECT_EQ(table.text.rows[5][0], "Max + SwiGLU");
  EXPECT_EQ(TablesToText(RenderSummary(records)), TablesToText(RenderSummary(RunExperiment(plan, d))));
}

// Property: reruns are bitwise identical and parallelism changes nothing.
TEST(HarnessProperty, DeterministicAcrossRunsAndJobs) {
  const Dataset d = TinyDataset();
  ExperimentPlan plan = TinyPlan(d, Protocol::kBenchmark, {"simlp", "abmil", "max+gelu"});
  const auto a = RunExperiment(plan, d);
  const auto b = RunExperiment(plan, d);
  plan.jobs = 3;
  const auto c = RunExperiment(plan, d);
  EXPECT_EQ(Log(a), Log(b));
  EXPECT_EQ(Log(a), Log(c));
  for (const RunRecord& r : a) EXPECT_FALSE(r.checkpoint_digest.empty());
}

TEST(Harness, CheckpointsWrittenAndMatchDigest) {
  const Dataset d = TinyDataset();
  ExperimentPlan plan = TinyPlan(d, Protocol::kBenchmark, {"simlp"});
  plan.output_dir = testing::TempDir("harness_ckpt");
  const auto records = RunExperiment(plan, d);
  for (const RunRecord& r : records) {
    ASSERT_TRUE(std::filesystem::exists(r.checkpoint_path)) << r.checkpoint_path;
    std::ifstream in(r.checkpoint_path, std::ios::binary);
    const std::string bytes((std::istreambuf_iterator<char>(in)), {});
    EXPECT_EQ(HexDigest(Fnv1a64(bytes)), r.checkpoint_digest);
  }
}

TEST(Harness, FailedRunsAreRecordedNotFatal) {
  const Dataset d = TinyDataset();
  ExperimentPlan plan = TinyPlan(d, Protocol::kBenchmark, {"simlp"});
  const auto dir = testing::TempDir("harness_fail");
  plan.output_dir = dir / "not_a_dir";
  std::ofstream(plan.output_dir) << "occupied";
  const auto records = RunExperiment(plan, d);
  ASSERT_EQ(records.size(), 2u);
  for (const RunRecord& r : records) {
    EXPECT_FALSE(r.ok);
    EXPECT_FALSE(r.failure.empty());
  }
  const auto tables = RenderSummary(records);
  EXPECT_NE(TablesToText(tables).find("gap"), std::string::npos);
}

TEST(Records, JsonRoundTripAndLog) {
  const Dataset d = TinyDataset();
  const auto records = RunExperiment(TinyPlan(d, Protocol::kBenchmark, {"linear"}), d);
  for (const RunRecord& r : records) {
    const std::string line = RecordToJsonLine(r);
    EXPECT_EQ(line.find('\n'), std::string::npos);
    EXPECT_EQ(RecordToJsonLine(RecordFromJsonLine(line)), line);
  }
  EXPECT_THROW(RecordFromJsonLine("{not json"), ConfigError);
  const auto dir = testing::TempDir("records");
  EXPECT_THROW(ReadRecords(dir / "records.jsonl"), Error);
  AppendRecords(dir / "records.jsonl", records);
  AppendRecords(dir / "records.jsonl", records);
  const auto back = ReadRecords(dir / "records.jsonl");
  EXPECT_EQ(back.size(), 4u);
  // Reruns of the same plan collapse to the latest copy of each run.
  EXPECT_EQ(Log(LatestPlanRecords(back)), Log(records));
  const std::string timings = TimingsCsv(records);
  EXPECT_EQ(timings.substr(0, timings.find('\n')), "protocol,method,seed,cell,test,wall_time_seconds");
}

// Property: tables are a pure function of the record set.
TEST(ReportProperty, RerenderFromLogMatches) {
  const Dataset d = TinyDataset();
  const auto records = RunExperiment(TinyPlan(d, Protocol::kBenchmark, {"simlp", "linear"}), d);
  const std::string direct = TablesToText(RenderSummary(records));
  std::vector<RunRecord> parsed;
  for (const RunRecord& r : records) parsed.push_back(RecordFromJsonLine(RecordToJsonLine(r)));
  EXPECT_EQ(TablesToText(RenderSummary(parsed)), direct);
  for (const auto& t : RenderSummary(records)) EXPECT_FALSE(t.csv.ToCsv().empty()) << t.name;
}

TEST(Report, EmptyAndMixedInputs) {
  try {
    RenderSummary(std::vector<RunRecord>{});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("no records"), std::string::npos);
  }
  const Dataset d = TinyDataset();
  auto a = RunExperiment(TinyPlan(d, Protocol::kBenchmark, {"linear"}), d);
  ExperimentPlan other = TinyPlan(d, Protocol::kBenchmark, {"linear"});
  other.train_config.epochs = 2;
  const auto b = RunExperiment(other, d);
  a.insert(a.end(), b.begin(), b.end());
  EXPECT_THROW(RenderSummary(a), ConfigError);
  EXPECT_EQ(LatestPlanRecords(a).size(), 2u);
}

TEST(Report, BenchmarkTableRanksAndFormats) {
  const Dataset d = TinyDataset();
  const auto records = RunExperiment(TinyPlan(d, Protocol::kBenchmark, {"linear", "simlp"}), d);
  const RenderedTable t = BenchmarkTable(records);
  ASSERT_EQ(t.csv.rows.size(), 2u);
  EXPECT_EQ(t.csv.rows[0][0], "1");
  const std::string cell = t.text.rows[0][3];
  EXPECT_NE(cell.find('('), std::string::npos) << cell;
  EXPECT_NE(cell.find('-'), std::string::npos) << cell;
}

}  // namespace
}  // namespace slidetune
