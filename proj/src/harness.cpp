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

#include "slidetune/harness.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_set>

#include <json.hpp>

#include "slidetune/errors.hpp"
#include "slidetune/sampling.hpp"

namespace slidetune {
namespace {

using nlohmann::json;

struct TestSet {
  std::string name;
  bool internal = true;
  std::vector<std::size_t> indices;
};

// One training job and the test sets it is evaluated on.
struct RunTask {
  const MethodEntry* method = nullptr;
  std::uint64_t seed = 0;
  std::string cell;
  std::vector<std::size_t> train;
  std::vector<std::string> warnings;
  const std::vector<TestSet>* tests = nullptr;
};

std::string Slug(std::string_view text) {
  std::string out;
  for (char c : text) {
    const bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                      (c >= '0' && c <= '9') || c == '-' || c == '_';
    out.push_back(keep ? c : '_');
  }
  return out;
}

void CheckDisjoint(const Dataset& dataset, std::span<const std::size_t> train,
                   std::span<const std::size_t> test) {
  std::unordered_set<std::string_view> ids;
  for (std::size_t i : train) ids.insert(dataset.manifest().entries[i].slide_id);
  for (std::size_t i : test) {
    const std::string& id = dataset.manifest().entries[i].slide_id;
    if (ids.count(id)) throw StateError("slide '" + id + "' is in both train and test");
  }
}

std::vector<RunRecord> ExecuteTask(const ExperimentPlan& plan,
                                   const Dataset& dataset,
                                   const std::string& plan_hash,
                                   const RunTask& task) {
  const auto start = std::chrono::steady_clock::now();
  const std::vector<TestSet>& tests = *task.tests;

  RunRecord base;
  base.plan_hash = plan_hash;
  base.protocol = plan.protocol;
  base.method = task.method->name;
  base.spec = task.method->spec.ToCanonicalText();
  base.seed = task.seed;
  base.cell = task.cell;
  base.train_hash = HexDigest(SelectionHash(dataset.manifest(), task.train));
  base.n_train = task.train.size();
  base.warnings = task.warnings;

  std::vector<RunRecord> out;
  for (const TestSet& t : tests) {
    RunRecord r = base;
    r.test_name = t.name;
    r.internal = t.internal;
    r.test_hash = HexDigest(SelectionHash(dataset.manifest(), t.indices));
    out.push_back(std::move(r));
  }

  try {
    for (const TestSet& t : tests) CheckDisjoint(dataset, task.train, t.indices);
    SlideModel model = BuildModel(task.method->spec, task.seed);
    TrainConfig config = plan.train_config;
    config.seed = task.seed;
    const std::vector<LabeledSlide> split = dataset.Select(task.train);
    const TrainResult trained = Train(model, split, config);
    const double final_loss =
        trained.trace.empty() ? 0.0 : trained.trace.back().mean_loss;

    const std::string bytes = SerializeCheckpoint(model);
    const std::string digest = HexDigest(Fnv1a64(bytes));
    std::string ckpt_path;
    if (!plan.output_dir.empty()) {
      std::string name = std::string(ProtocolName(plan.protocol)) + "_" +
                         Slug(task.method->name);
      if (!task.cell.empty() && task.cell != task.method->name) name += "_" + Slug(task.cell);
      name += "_seed" + std::to_string(task.seed) + ".ckpt";
      const auto dir = plan.output_dir / "checkpoints";
      std::filesystem::create_directories(dir);
      SaveCheckpoint(dir / name, model);
      ckpt_path = (dir / name).string();
    }

    BootstrapOptions bootstrap;
    bootstrap.resamples = plan.bootstrap_resamples;
    bootstrap.seed = task.seed;
    for (std::size_t i = 0; i < tests.size(); ++i) {
      RunRecord& r = out[i];
      r.final_train_loss = final_loss;
      r.checkpoint_digest = digest;
      r.checkpoint_path = ckpt_path;
      try {
        const PredictionSet set = PredictSelection(model, dataset, tests[i].indices);
        r.report = MakeEvalReport(set, task.seed, bootstrap);
      } catch (const Error& e) {
        r.ok = false;
        r.failure = std::string(ErrorCodeName(e.code())) + ": " + e.what();
      }
    }
  } catch (const std::exception& e) {
    const auto* err = dynamic_cast<const Error*>(&e);
    const std::string cause =
        (err ? std::string(ErrorCodeName(err->code())) : std::string("error")) +
        ": " + e.what();
    for (RunRecord& r : out) {
      r.ok = false;
      r.failure = cause;
    }
  }

  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  for (RunRecord& r : out) r.wall_time_seconds = seconds;
  return out;
}

// Runs tasks on plan.jobs workers; results keep task order.
std::vector<RunRecord> ExecuteAll(const ExperimentPlan& plan, const Dataset& dataset,
                                  const std::vector<RunTask>& tasks) {
  const std::string plan_hash = PlanHash(plan, dataset);
  std::vector<std::vector<RunRecord>> slots(tasks.size());
  const std::size_t workers = std::min<std::size_t>(plan.jobs, tasks.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i)
      slots[i] = ExecuteTask(plan, dataset, plan_hash, tasks[i]);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++)
          slots[i] = ExecuteTask(plan, dataset, plan_hash, tasks[i]);
      });
    }
    for (std::thread& t : pool) t.join();
  }
  std::vector<RunRecord> records;
  for (auto& slot : slots)
    for (RunRecord& r : slot) records.push_back(std::move(r));
  return records;
}

void RequireProtocol(const ExperimentPlan& plan, Protocol expected) {
  if (plan.protocol != expected) {
    throw ConfigError(std::string("plan protocol is ") + ProtocolName(plan.protocol) +
                      ", expected " + ProtocolName(expected));
  }
  plan.Validate();
}

void RequireCompatible(const ExperimentPlan& plan, const Dataset& dataset) {
  for (const MethodEntry& m : plan.methods) {
    if (m.spec.input_dim != dataset.feature_dim()) {
      throw ConfigError("method '" + m.name + "' expects input_dim " +
                        std::to_string(m.spec.input_dim) + ", dataset has " +
                        std::to_string(dataset.feature_dim()));
    }
    if (m.spec.num_classes != dataset.num_classes()) {
      throw ConfigError("method '" + m.name + "' expects " +
                        std::to_string(m.spec.num_classes) + " classes, dataset has " +
                        std::to_string(dataset.num_classes()));
    }
  }
}

std::vector<TestSet> DefaultTestSplit(const Dataset& dataset) {
  std::vector<TestSet> tests{{"test", true, dataset.manifest().IndicesFor(Split::kTest)}};
  if (tests[0].indices.empty()) throw ConfigError("manifest has no test slides");
  return tests;
}

json EstimateJson(const MetricEstimate& e) {
  return json::array({e.point, e.lower, e.upper});
}

MetricEstimate EstimateFromJson(const json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

}  // namespace

const char* ProtocolName(Protocol protocol) {
  switch (protocol) {
    case Protocol::kBenchmark: return "benchmark";
    case Protocol::kFewShot: return "fewshot";
    case Protocol::kTransfer: return "transfer";
    case Protocol::kAblation: return "ablation";
  }
  return "?";
}

Protocol ParseProtocol(std::string_view name) {
  if (name == "benchmark") return Protocol::kBenchmark;
  if (name == "fewshot") return Protocol::kFewShot;
  if (name == "transfer") return Protocol::kTransfer;
  if (name == "ablation") return Protocol::kAblation;
  throw ConfigError("unknown protocol '" + std::string(name) + "'");
}

std::vector<MethodEntry> MakeMethods(const std::vector<std::string>& names,
                                     std::size_t input_dim,
                                     std::size_t num_classes,
                                     const MethodOptions& options) {
  std::vector<MethodEntry> out;
  for (const std::string& n : names)
    out.push_back({n, SpecForMethod(n, input_dim, num_classes, options)});
  return out;
}

std::vector<std::string> AblationGridMethods() {
  return {"mean+relu", "mean+gelu", "mean+swiglu", "max+relu", "max+gelu", "max+swiglu"};
}

std::vector<std::uint64_t> DefaultSeeds(Protocol protocol) {
  const std::uint64_t n = protocol == Protocol::kTransfer ? 10 : 5;
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 0; s < n; ++s) seeds.push_back(s);
  return seeds;
}

void ExperimentPlan::Validate() const {
  if (seeds.empty()) throw ConfigError("plan has no seeds");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
    throw ConfigError("plan seeds must be distinct");
  if (methods.empty()) throw ConfigError("plan has no methods");
  std::set<std::string> names;
  for (const MethodEntry& m : methods) {
    if (m.name.empty()) throw ConfigError("method name is empty");
    if (!names.insert(m.name).second)
      throw ConfigError("method '" + m.name + "' listed twice");
    m.spec.Validate();
  }
  train_config.Validate();
  if (bootstrap_resamples < 100)
    throw ConfigError("bootstrap resamples must be >= 100, got " +
                      std::to_string(bootstrap_resamples));
  if (jobs == 0) throw ConfigError("jobs must be >= 1");
  switch (protocol) {
    case Protocol::kBenchmark:
      break;
    case Protocol::kFewShot: {
      if (shots.empty()) throw ConfigError("few-shot plan has no K values");
      if (std::set<std::size_t>(shots.begin(), shots.end()).size() != shots.size())
        throw ConfigError("few-shot K values must be distinct");
      for (std::size_t k : shots)
        if (k == 0) throw ConfigError("few-shot K must be >= 1");
      break;
    }
    case Protocol::kTransfer:
      if (train_cohort.empty()) throw ConfigError("transfer plan has no train cohort");
      if (test_cohorts.empty()) throw ConfigError("transfer plan has no test cohorts");
      break;
    case Protocol::kAblation:
      for (const MethodEntry& m : methods) {
        const auto kind = m.spec.aggregator.kind;
        if ((kind != AggregatorKind::kMean && kind != AggregatorKind::kMax) ||
            m.spec.head != HeadKind::kMlp) {
          throw ConfigError("ablation cell '" + m.name +
                            "' must be a mean or max pool with an MLP head");
        }
      }
      break;
  }
}

std::string PlanHash(const ExperimentPlan& plan, const Dataset& dataset) {
  std::uint64_t h = Fnv1a64(SerializeManifest(dataset.manifest()));
  char word[8];
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    for (double v : dataset.bag(i).features.values()) {
      const auto bits = std::bit_cast<std::uint64_t>(v);
      for (int b = 0; b < 8; ++b) word[b] = static_cast<char>((bits >> (8 * b)) & 0xff);
      h = Fnv1a64(std::string_view(word, 8), h);
    }
  }
  std::ostringstream text;
  TrainConfig config = plan.train_config;
  config.seed = 0;
  text << "protocol=" << ProtocolName(plan.protocol) << "\n"
       << "train " << config.ToCanonicalText() << "\n"
       << "bootstrap=" << plan.bootstrap_resamples << "\n";
  for (const MethodEntry& m : plan.methods)
    text << "method " << m.name << " " << m.spec.ToCanonicalText() << "\n";
  text << "seeds";
  for (auto s : plan.seeds) text << " " << s;
  text << "\n";
  if (plan.protocol == Protocol::kFewShot) {
    text << "shots";
    for (auto k : plan.shots) text << " " << k;
    text << "\n";
  }
  if (plan.protocol == Protocol::kTransfer) {
    text << "train_cohort " << plan.train_cohort << "\ntest_cohorts";
    for (const auto& c : plan.test_cohorts) text << " " << c;
    text << "\n";
  }
  return HexDigest(Fnv1a64(text.str(), h));
}

PredictionSet PredictSelection(const SlideModel& model, const Dataset& dataset,
                               std::span<const std::size_t> indices) {
  if (indices.empty()) throw ConfigError("cannot evaluate an empty selection");
  PredictionSet set;
  set.num_classes = model.spec().num_classes;
  set.scores = Matrix(indices.size(), set.num_classes);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const Prediction p = model.Predict(dataset.bag(indices[r]));
    set.labels.push_back(dataset.label(indices[r]));
    set.predictions.push_back(p.label);
    std::copy(p.probabilities.begin(), p.probabilities.end(), set.scores.row(r).begin());
  }
  return set;
}

std::vector<RunRecord> RunBenchmark(const ExperimentPlan& plan, const Dataset& dataset) {
  RequireProtocol(plan, Protocol::kBenchmark);
  RequireCompatible(plan, dataset);
  const std::vector<TestSet> tests = DefaultTestSplit(dataset);
  const std::vector<std::size_t> train = dataset.manifest().IndicesFor(Split::kTrain);
  if (train.empty()) throw ConfigError("manifest has no train slides");
  std::vector<RunTask> tasks;
  for (const MethodEntry& m : plan.methods)
    for (std::uint64_t seed : plan.seeds) tasks.push_back({&m, seed, "", train, {}, &tests});
  return ExecuteAll(plan, dataset, tasks);
}

std::vector<RunRecord> RunFewShot(const ExperimentPlan& plan, const Dataset& dataset) {
  RequireProtocol(plan, Protocol::kFewShot);
  RequireCompatible(plan, dataset);
  const std::vector<TestSet> tests = DefaultTestSplit(dataset);
  std::vector<RunTask> tasks;
  for (std::size_t k : plan.shots) {
    for (const MethodEntry& m : plan.methods) {
      for (std::uint64_t seed : plan.seeds) {
        FewShotSelection sel = FewShotSample(dataset.manifest(), k, seed);
        tasks.push_back({&m, seed, "K=" + std::to_string(k), std::move(sel.indices),
                         std::move(sel.warnings), &tests});
      }
    }
  }
  return ExecuteAll(plan, dataset, tasks);
}

std::vector<RunRecord> RunTransfer(const ExperimentPlan& plan, const Dataset& dataset) {
  RequireProtocol(plan, Protocol::kTransfer);
  RequireCompatible(plan, dataset);
  if (dataset.manifest().Cohorts().size() < 2)
    throw ConfigError("transfer needs a manifest with at least 2 cohorts");
  const TransferSplits splits =
      SplitByCohort(dataset.manifest(), plan.train_cohort, plan.test_cohorts);
  std::vector<TestSet> tests;
  for (const CohortTestSet& t : splits.tests) {
    if (t.indices.empty())
      throw ConfigError("cohort '" + t.cohort + "' has no test slides");
    tests.push_back({t.cohort, t.internal, t.indices});
  }
  std::vector<RunTask> tasks;
  for (const MethodEntry& m : plan.methods)
    for (std::uint64_t seed : plan.seeds)
      tasks.push_back({&m, seed, "train=" + plan.train_cohort, splits.train, {}, &tests});
  return ExecuteAll(plan, dataset, tasks);
}

std::vector<RunRecord> RunAblation(const ExperimentPlan& plan, const Dataset& dataset) {
  RequireProtocol(plan, Protocol::kAblation);
  RequireCompatible(plan, dataset);
  const std::vector<TestSet> tests = DefaultTestSplit(dataset);
  const std::vector<std::size_t> train = dataset.manifest().IndicesFor(Split::kTrain);
  if (train.empty()) throw ConfigError("manifest has no train slides");
  std::vector<RunTask> tasks;
  for (const MethodEntry& m : plan.methods)
    for (std::uint64_t seed : plan.seeds)
      tasks.push_back({&m, seed, m.name, train, {}, &tests});
  return ExecuteAll(plan, dataset, tasks);
}

std::vector<RunRecord> RunExperiment(const ExperimentPlan& plan, const Dataset& dataset) {
  switch (plan.protocol) {
    case Protocol::kBenchmark: return RunBenchmark(plan, dataset);
    case Protocol::kFewShot: return RunFewShot(plan, dataset);
    case Protocol::kTransfer: return RunTransfer(plan, dataset);
    case Protocol::kAblation: return RunAblation(plan, dataset);
  }
  throw ConfigError("unknown protocol");
}

std::string RecordToJsonLine(const RunRecord& r) {
  json j;
  j["plan_hash"] = r.plan_hash;
  j["protocol"] = ProtocolName(r.protocol);
  j["method"] = r.method;
  j["spec"] = r.spec;
  j["seed"] = r.seed;
  j["cell"] = r.cell;
  j["train_hash"] = r.train_hash;
  j["n_train"] = r.n_train;
  j["test"] = r.test_name;
  j["internal"] = r.internal;
  j["test_hash"] = r.test_hash;
  j["checkpoint"] = r.checkpoint_path;
  j["checkpoint_digest"] = r.checkpoint_digest;
  j["final_train_loss"] = r.final_train_loss;
  j["ok"] = r.ok;
  j["failure"] = r.failure;
  j["warnings"] = r.warnings;
  if (r.ok) {
    const EvalReport& e = r.report;
    json rep;
    rep["balanced_accuracy"] = EstimateJson(e.balanced_accuracy);
    rep["roc_auc"] = EstimateJson(e.roc_auc);
    rep["weighted_f1"] = EstimateJson(e.weighted_f1);
    rep["n_test"] = e.n_test;
    rep["num_classes"] = e.num_classes;
    json recall = json::array();
    for (const auto& v : e.per_class_recall) recall.push_back(v ? json(*v) : json(nullptr));
    rep["per_class_recall"] = recall;
    rep["confusion"] = e.confusion;
    rep["absent_classes"] = e.absent_classes;
    rep["seed"] = e.seed;
    rep["bootstrap_resamples"] = e.bootstrap_resamples;
    rep["bootstrap_seed"] = e.bootstrap_seed;
    rep["confidence"] = e.confidence;
    rep["ci_method"] = kCiMethod;
    rep["auc_averaging"] = kAucAveraging;
    j["report"] = rep;
  }
  return j.dump();
}

RunRecord RecordFromJsonLine(std::string_view line) {
  try {
    const json j = json::parse(line);
    RunRecord r;
    r.plan_hash = j.at("plan_hash").get<std::string>();
    r.protocol = ParseProtocol(j.at("protocol").get<std::string>());
    r.method = j.at("method").get<std::string>();
    r.spec = j.at("spec").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.cell = j.at("cell").get<std::string>();
    r.train_hash = j.at("train_hash").get<std::string>();
    r.n_train = j.at("n_train").get<std::size_t>();
    r.test_name = j.at("test").get<std::string>();
    r.internal = j.at("internal").get<bool>();
    r.test_hash = j.at("test_hash").get<std::string>();
    r.checkpoint_path = j.at("checkpoint").get<std::string>();
    r.checkpoint_digest = j.at("checkpoint_digest").get<std::string>();
    r.final_train_loss = j.at("final_train_loss").get<double>();
    r.ok = j.at("ok").get<bool>();
    r.failure = j.at("failure").get<std::string>();
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    if (r.ok) {
      const json& rep = j.at("report");
      EvalReport& e = r.report;
      e.balanced_accuracy = EstimateFromJson(rep.at("balanced_accuracy"));
      e.roc_auc = EstimateFromJson(rep.at("roc_auc"));
      e.weighted_f1 = EstimateFromJson(rep.at("weighted_f1"));
      e.n_test = rep.at("n_test").get<std::size_t>();
      e.num_classes = rep.at("num_classes").get<std::size_t>();
      for (const json& v : rep.at("per_class_recall")) {
        e.per_class_recall.push_back(v.is_null() ? std::nullopt
                                                 : std::optional<double>(v.get<double>()));
      }
      e.confusion = rep.at("confusion").get<std::vector<std::vector<std::size_t>>>();
      e.absent_classes = rep.at("absent_classes").get<std::vector<std::size_t>>();
      e.seed = rep.at("seed").get<std::uint64_t>();
      e.bootstrap_resamples = rep.at("bootstrap_resamples").get<std::size_t>();
      e.bootstrap_seed = rep.at("bootstrap_seed").get<std::uint64_t>();
      e.confidence = rep.at("confidence").get<double>();
    }
    return r;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed record: ") + e.what());
  }
}

void AppendRecords(const std::filesystem::path& path,
                   std::span<const RunRecord> records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw Error(ErrorCode::kIo, "cannot open record log " + path.string());
  for (const RunRecord& r : records) out << RecordToJsonLine(r) << "\n";
  if (!out) throw Error(ErrorCode::kIo, "failed writing record log " + path.string());
}

std::vector<RunRecord> ReadRecords(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingFile, "cannot open record log " + path.string());
  std::vector<RunRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      records.push_back(RecordFromJsonLine(line));
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return records;
}

std::string TimingsCsv(std::span<const RunRecord> records) {
  std::ostringstream out;
  out << "protocol,method,seed,cell,test,wall_time_seconds\n";
  char buf[32];
  for (const RunRecord& r : records) {
    std::snprintf(buf, sizeof(buf), "%.6f", r.wall_time_seconds);
    out << ProtocolName(r.protocol) << "," << r.method << "," << r.seed << ","
        << r.cell << "," << r.test_name << "," << buf << "\n";
  }
  return out.str();
}

}  // namespace slidetune
