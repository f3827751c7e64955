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

// slidetune command-line entry point.
//
// Exit codes: 0 success, 1 config/validation error, 2 runtime/numeric
// failure (including any failed run inside an experiment suite).
// Default output root: $SLIDETUNE_OUT, else ./slidetune_out.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "slidetune/dataset.hpp"
#include "slidetune/errors.hpp"
#include "slidetune/gradcheck.hpp"
#include "slidetune/harness.hpp"
#include "slidetune/metrics.hpp"
#include "slidetune/model.hpp"
#include "slidetune/optim.hpp"
#include "slidetune/report.hpp"
#include "slidetune/synth.hpp"

namespace fs = std::filesystem;
using namespace slidetune;

namespace {

fs::path DefaultOut(const std::string& sub) {
  const char* root = std::getenv("SLIDETUNE_OUT");
  return fs::path(root && *root ? root : "slidetune_out") / sub;
}

void WriteText(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

bool NonEmptyDir(const fs::path& dir) {
  return fs::exists(dir) && (!fs::is_directory(dir) || !fs::is_empty(dir));
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string config_path;
  std::string out;
  bool force = false;
  std::optional<std::string> task;
  std::optional<std::size_t> classes, dim, train_per_class, test_per_class;
  std::optional<std::size_t> patches_min, patches_max;
  std::optional<double> separation, noise, informative, cohort_shift;
  std::optional<std::vector<std::string>> cohorts;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> dtype;
};

SynthConfig LoadSynthConfig(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open synth config " + path.string(), ErrorCode::kMissingFile);
  SynthConfig c;
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    for (const auto& [key, value] : j.items()) {
      if (key == "task") c.task_name = value.get<std::string>();
      else if (key == "classes") c.num_classes = value.get<std::size_t>();
      else if (key == "dim") c.feature_dim = value.get<std::size_t>();
      else if (key == "train_per_class") c.train_per_class = value.get<std::size_t>();
      else if (key == "test_per_class") c.test_per_class = value.get<std::size_t>();
      else if (key == "patches_min") c.patches_min = value.get<std::size_t>();
      else if (key == "patches_max") c.patches_max = value.get<std::size_t>();
      else if (key == "separation") c.class_separation = value.get<double>();
      else if (key == "noise") c.noise_scale = value.get<double>();
      else if (key == "informative") c.informative_fraction = value.get<double>();
      else if (key == "cohort_shift") c.cohort_shift = value.get<double>();
      else if (key == "cohorts") c.cohorts = value.get<std::vector<std::string>>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "dtype") c.dtype = ParseDtype(value.get<std::string>());
      else throw ConfigError("unknown synth config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad synth config " + path.string() + ": " + e.what());
  }
  return c;
}

int RunSynth(const SynthArgs& a) {
  SynthConfig c = a.config_path.empty() ? SynthConfig{} : LoadSynthConfig(a.config_path);
  if (a.task) c.task_name = *a.task;
  if (a.classes) c.num_classes = *a.classes;
  if (a.dim) c.feature_dim = *a.dim;
  if (a.train_per_class) c.train_per_class = *a.train_per_class;
  if (a.test_per_class) c.test_per_class = *a.test_per_class;
  if (a.patches_min) c.patches_min = *a.patches_min;
  if (a.patches_max) c.patches_max = *a.patches_max;
  if (a.separation) c.class_separation = *a.separation;
  if (a.noise) c.noise_scale = *a.noise;
  if (a.informative) c.informative_fraction = *a.informative;
  if (a.cohort_shift) c.cohort_shift = *a.cohort_shift;
  if (a.cohorts) c.cohorts = *a.cohorts;
  if (a.seed) c.seed = *a.seed;
  if (a.dtype) c.dtype = ParseDtype(*a.dtype);
  c.Validate();

  const fs::path out = a.out.empty() ? DefaultOut("corpus") : fs::path(a.out);
  if (NonEmptyDir(out)) {
    if (!a.force) {
      throw ConfigError("output directory " + out.string() +
                        " is not empty; pass --force to overwrite");
    }
    fs::remove_all(out / "embeddings");
    fs::remove(out / kManifestFileName);
  }
  const SyntheticCorpus corpus = GenerateSyntheticCorpus(c);
  fs::create_directories(out);
  WriteSyntheticCorpus(corpus, out, c.dtype);

  std::cout << "wrote " << corpus.manifest.entries.size() << " slides to " << out.string()
            << "\n"
            << "classes=" << c.num_classes << " dim=" << c.feature_dim
            << " slides=" << corpus.manifest.entries.size()
            << " informative_fraction=" << c.informative_fraction << " cohorts=";
  for (std::size_t i = 0; i < c.cohorts.size(); ++i) std::cout << (i ? "," : "") << c.cohorts[i];
  std::cout << "\n" << c.ToCanonicalText() << "\n";
  return 0;
}

// ---------------------------------------------------------------- train

struct ModelArgs {
  std::size_t hidden_width = 512;
  std::size_t attention_hidden = 256;
  MethodOptions options() const { return {hidden_width, attention_hidden}; }
};

struct TrainArgs {
  std::string manifest;
  std::string method = "simlp";
  std::uint64_t seed = 0;
  std::string out;
  bool force = false;
  bool track_accuracy = false;
  TrainConfig config;
  ModelArgs model;
};

void AddTrainConfigFlags(CLI::App* cmd, TrainConfig& c) {
  cmd->add_option("--epochs", c.epochs, "Training epochs")->capture_default_str();
  cmd->add_option("--lr", c.learning_rate, "AdamW learning rate")->capture_default_str();
  cmd->add_option("--beta1", c.beta1, "AdamW beta1")->capture_default_str();
  cmd->add_option("--beta2", c.beta2, "AdamW beta2")->capture_default_str();
  cmd->add_option("--weight-decay", c.weight_decay, "Decoupled weight decay")
      ->capture_default_str();
  cmd->add_option("--batch-size", c.batch_size, "Slides per step (only 1 supported)")
      ->capture_default_str();
}

void AddModelFlags(CLI::App* cmd, ModelArgs& m) {
  cmd->add_option("--hidden-width", m.hidden_width, "MLP hidden width")->capture_default_str();
  cmd->add_option("--attention-hidden", m.attention_hidden, "Gated attention width")
      ->capture_default_str();
}

int RunTrain(TrainArgs a) {
  a.config.seed = a.seed;
  a.config.Validate();
  const DatasetManifest manifest = LoadManifest(a.manifest);
  const ModelSpec spec = SpecForMethod(a.method, manifest.feature_dim,
                                       manifest.classes.size(), a.model.options());
  const fs::path out = a.out.empty() ? DefaultOut("train") : fs::path(a.out);
  const fs::path ckpt = out / "model.ckpt";
  if (fs::exists(ckpt) && !a.force) {
    throw ConfigError(ckpt.string() + " exists; pass --force to overwrite");
  }
  const Dataset dataset = Dataset::Load(manifest);
  const std::vector<std::size_t> train = manifest.IndicesFor(Split::kTrain);
  SlideModel model = BuildModel(spec, a.seed);
  TrainOptions options;
  options.track_train_accuracy = a.track_accuracy;
  const TrainResult result = Train(model, dataset.Select(train), a.config, options);

  fs::create_directories(out);
  SaveCheckpoint(ckpt, model);
  WriteLossTraceCsv(out / "loss_trace.csv", result.trace);
  const double final_loss = result.trace.empty() ? 0.0 : result.trace.back().mean_loss;
  std::printf("method=%s seed=%llu train_slides=%zu epochs=%zu steps=%llu\n",
              a.method.c_str(), static_cast<unsigned long long>(a.seed), train.size(),
              a.config.epochs, static_cast<unsigned long long>(result.steps));
  if (result.trace.empty()) {
    std::printf("final_train_loss=n/a (no epochs)\n");
  } else {
    std::printf("final_train_loss=%.6f\n", final_loss);
  }
  std::printf("parameters=%zu\ncheckpoint=%s\n", model.parameter_count(), ckpt.string().c_str());
  return 0;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string manifest;
  std::string checkpoint;
  std::size_t bootstrap = 1000;
  std::uint64_t seed = 0;
  std::string split = "test";
  std::string out;
};

int RunEval(const EvalArgs& a) {
  if (a.split != "train" && a.split != "test" && a.split != "all") {
    throw ConfigError("--split must be train, test or all");
  }
  if (a.bootstrap < 100) throw ConfigError("--bootstrap must be >= 100");
  const DatasetManifest manifest = LoadManifest(a.manifest);
  const SlideModel model = LoadCheckpoint(a.checkpoint);
  const ModelSpec& spec = model.spec();
  if (spec.num_classes != manifest.classes.size()) {
    throw ConfigError("checkpoint has " + std::to_string(spec.num_classes) +
                      " classes, manifest has " + std::to_string(manifest.classes.size()));
  }
  if (spec.input_dim != manifest.feature_dim) {
    throw ConfigError("checkpoint expects dim " + std::to_string(spec.input_dim) +
                          ", manifest has " + std::to_string(manifest.feature_dim),
                      ErrorCode::kDimMismatch);
  }
  const Dataset dataset = Dataset::Load(manifest);
  std::vector<std::size_t> indices;
  if (a.split == "all") {
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) indices.push_back(i);
  } else {
    indices = manifest.IndicesFor(ParseSplit(a.split));
  }
  const PredictionSet set = PredictSelection(model, dataset, indices);
  BootstrapOptions bootstrap;
  bootstrap.resamples = a.bootstrap;
  bootstrap.seed = a.seed;
  const EvalReport report = MakeEvalReport(set, a.seed, bootstrap);

  const std::string text = "split=" + a.split + "\n" + ToCanonicalText(report);
  std::cout << text;
  const fs::path out =
      a.out.empty() ? fs::path(a.checkpoint).parent_path() : fs::path(a.out);
  WriteText(out / ("eval_" + a.split + ".txt"), text);
  WriteText(out / ("eval_" + a.split + ".csv"), ToCsv(report));
  return 0;
}

// ---------------------------------------------------------- experiments

struct ExperimentArgs {
  std::string manifest;
  std::vector<std::string> methods;
  std::vector<std::uint64_t> seeds;
  std::vector<std::size_t> shots;
  std::string train_cohort;
  std::vector<std::string> test_cohorts;
  std::size_t bootstrap = 1000;
  std::size_t jobs = 1;
  std::string out;
  bool no_checkpoints = false;
  TrainConfig config;
  ModelArgs model;
};

void AddExperimentFlags(CLI::App* cmd, ExperimentArgs& a) {
  cmd->add_option("--manifest", a.manifest, "Dataset manifest")->required();
  cmd->add_option("--seeds", a.seeds, "Seed list (defaults: 0..4, transfer 0..9)");
  cmd->add_option("--bootstrap", a.bootstrap, "Bootstrap resamples per evaluation")
      ->capture_default_str();
  cmd->add_option("--jobs", a.jobs, "Parallel training runs")->capture_default_str();
  cmd->add_option("--out", a.out, "Output directory (default $SLIDETUNE_OUT/<command>)");
  cmd->add_flag("--no-checkpoints", a.no_checkpoints, "Do not save per-run checkpoints");
  AddTrainConfigFlags(cmd, a.config);
  AddModelFlags(cmd, a.model);
}

int RunSuite(Protocol protocol, ExperimentArgs a, const std::string& command) {
  const DatasetManifest manifest = LoadManifest(a.manifest);
  ExperimentPlan plan;
  plan.protocol = protocol;
  if (a.methods.empty()) {
    a.methods = protocol == Protocol::kAblation
                    ? AblationGridMethods()
                    : std::vector<std::string>{"simlp", "linear", "abmil"};
  }
  plan.methods = MakeMethods(a.methods, manifest.feature_dim, manifest.classes.size(),
                             a.model.options());
  plan.seeds = a.seeds.empty() ? DefaultSeeds(protocol) : a.seeds;
  plan.shots = a.shots.empty() ? kDefaultShots : a.shots;
  if (protocol == Protocol::kTransfer) {
    const std::vector<std::string> cohorts = manifest.Cohorts();
    plan.train_cohort = a.train_cohort.empty() ? cohorts.front() : a.train_cohort;
    plan.test_cohorts = a.test_cohorts.empty() ? cohorts : a.test_cohorts;
  }
  plan.train_config = a.config;
  plan.bootstrap_resamples = a.bootstrap;
  plan.jobs = a.jobs;
  const fs::path out = a.out.empty() ? DefaultOut(command) : fs::path(a.out);
  if (!a.no_checkpoints) plan.output_dir = out;
  plan.Validate();

  const Dataset dataset = Dataset::Load(manifest);
  const std::vector<RunRecord> records = RunExperiment(plan, dataset);
  AppendRecords(out / "records.jsonl", records);
  const std::string hash = records.empty() ? "none" : records.front().plan_hash;
  WriteText(out / ("timings_" + hash + ".csv"), TimingsCsv(records));
  const std::vector<RenderedTable> tables = RenderSummary(records);
  WriteTables(out, tables);

  std::cout << "plan " << hash << ": " << records.size() << " records -> "
            << (out / "records.jsonl").string() << "\n\n"
            << TablesToText(tables);
  std::size_t failed = 0;
  for (const RunRecord& r : records) {
    for (const std::string& w : r.warnings) {
      std::cerr << "warning: " << r.method << " seed " << r.seed << " " << r.cell << ": " << w
                << "\n";
    }
    if (!r.ok) {
      ++failed;
      std::cerr << "failed: " << r.method << " seed " << r.seed << " " << r.cell << " "
                << r.test_name << ": " << r.failure << "\n";
    }
  }
  return failed ? 2 : 0;
}

// --------------------------------------------------------------- report

struct ReportArgs {
  std::string records;
  std::string plan_hash;
  std::string out;
};

int RunReport(const ReportArgs& a) {
  fs::path path = a.records;
  if (fs::is_directory(path)) path /= "records.jsonl";
  const std::vector<RunRecord> all = ReadRecords(path);
  if (all.empty()) throw ConfigError("no records in " + path.string());
  std::vector<RunRecord> selected;
  if (a.plan_hash.empty()) {
    selected = LatestPlanRecords(all);
  } else {
    std::vector<RunRecord> matching;
    for (const RunRecord& r : all)
      if (r.plan_hash == a.plan_hash) matching.push_back(r);
    if (matching.empty()) throw ConfigError("no records for plan " + a.plan_hash);
    selected = LatestPlanRecords(matching);
  }
  const std::vector<RenderedTable> tables = RenderSummary(selected);
  if (!a.out.empty()) WriteTables(a.out, tables);
  std::cout << "plan " << selected.front().plan_hash << ": " << selected.size()
            << " records\n\n"
            << TablesToText(tables);
  return 0;
}

// ------------------------------------------------------------ gradcheck

struct GradCheckArgs {
  std::vector<std::string> methods;
  std::size_t inits = 5;
  std::uint64_t first_seed = 0;
  double tolerance = 1e-4;
  double step = 1e-5;
  std::string checkpoint;
  std::uint64_t init_seed = 0;
};

// Compares a checkpoint against a fresh initialization of its own spec.
int CompareWithInit(const GradCheckArgs& a) {
  SlideModel loaded = LoadCheckpoint(a.checkpoint);
  SlideModel fresh = BuildModel(loaded.spec(), a.init_seed);
  const auto lp = loaded.Parameters();
  const auto fp = fresh.Parameters();
  double max_diff = 0.0;
  bool identical = lp.size() == fp.size();
  for (std::size_t k = 0; identical && k < lp.size(); ++k) {
    double diff = 0.0;
    for (std::size_t i = 0; i < lp[k].value.size(); ++i)
      diff = std::max(diff, std::abs(lp[k].value[i] - fp[k].value[i]));
    std::printf("%-24s max_abs_diff=%.3e\n", lp[k].name.c_str(), diff);
    max_diff = std::max(max_diff, diff);
    if (diff != 0.0) identical = false;
  }
  std::printf("checkpoint %s initialization for seed %llu (max_abs_diff=%.3e)\n",
              identical ? "equals" : "differs from",
              static_cast<unsigned long long>(a.init_seed), max_diff);
  return identical ? 0 : 2;
}

int RunGradCheck(const GradCheckArgs& a) {
  if (!a.checkpoint.empty()) return CompareWithInit(a);
  if (a.inits == 0) throw ConfigError("--inits must be >= 1");
  const std::vector<std::string> methods = a.methods.empty() ? GradCheckMethods() : a.methods;
  ModelGradCheckConfig config;
  GradCheckOptions options;
  options.tolerance = a.tolerance;
  options.step = a.step;
  const MethodOptions mopts{config.hidden_width, config.attention_hidden};
  bool all_passed = true;
  std::printf("%-12s %-6s %-14s %s\n", "method", "inits", "max_rel_error", "status");
  for (const std::string& m : methods) {
    const ModelSpec spec = SpecForMethod(m, config.input_dim, config.num_classes, mopts);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.inits; ++i) {
      const GradCheckReport r = CheckModelGradients(spec, a.first_seed + i, config, options);
      worst = std::max(worst, r.max_rel_error);
    }
    const bool ok = worst <= a.tolerance;
    all_passed = all_passed && ok;
    std::printf("%-12s %-6zu %-14.3e %s\n", m.c_str(), a.inits, worst, ok ? "ok" : "FAIL");
  }
  std::printf("tolerance %.1e, step %.1e: %s\n", a.tolerance, a.step,
              all_passed ? "all passed" : "FAILED");
  return all_passed ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"slidetune: slide-level heads on precomputed patch embeddings"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic embedding corpus");
  synth_cmd->add_option("--config", synth.config_path, "JSON file with synth settings");
  synth_cmd->add_option("--out", synth.out, "Output directory (default $SLIDETUNE_OUT/corpus)");
  synth_cmd->add_flag("--force", synth.force, "Overwrite a non-empty output directory");
  synth_cmd->add_option("--task", synth.task, "Task name [synthetic]");
  synth_cmd->add_option("--classes", synth.classes, "Number of classes [10]");
  synth_cmd->add_option("--dim", synth.dim, "Feature dimension [64]");
  synth_cmd->add_option("--train-per-class", synth.train_per_class, "Train slides per class [50]");
  synth_cmd->add_option("--test-per-class", synth.test_per_class, "Test slides per class [20]");
  synth_cmd->add_option("--patches-min", synth.patches_min, "Fewest patches per slide [16]");
  synth_cmd->add_option("--patches-max", synth.patches_max, "Most patches per slide [48]");
  synth_cmd->add_option("--separation", synth.separation, "Class separation [3]");
  synth_cmd->add_option("--noise", synth.noise, "Patch noise scale [1]");
  synth_cmd->add_option("--informative", synth.informative, "Informative fraction rho [1]");
  synth_cmd->add_option("--cohort-shift", synth.cohort_shift, "Per-cohort offset norm [0]");
  synth_cmd->add_option("--cohorts", synth.cohorts, "Cohort names [A]");
  synth_cmd->add_option("--seed", synth.seed, "Corpus seed [0]");
  synth_cmd->add_option("--dtype", synth.dtype, "Embedding dtype f32|f64 [f64]");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train one model on the train split");
  train_cmd->add_option("--manifest", train.manifest, "Dataset manifest")->required();
  train_cmd->add_option("--method", train.method,
                        "simlp|linear|abmil|mean+<act>|max+<act>|max+linear")
      ->capture_default_str();
  train_cmd->add_option("--seed", train.seed, "Init and shuffle seed")->capture_default_str();
  train_cmd->add_option("--out", train.out, "Output directory (default $SLIDETUNE_OUT/train)");
  train_cmd->add_flag("--force", train.force, "Overwrite an existing checkpoint");
  train_cmd->add_flag("--track-accuracy", train.track_accuracy,
                      "Record train balanced accuracy per epoch");
  AddTrainConfigFlags(train_cmd, train.config);
  AddModelFlags(train_cmd, train.model);

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint with bootstrap CIs");
  eval_cmd->add_option("--manifest", eval.manifest, "Dataset manifest")->required();
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--bootstrap", eval.bootstrap, "Bootstrap resamples")
      ->capture_default_str();
  eval_cmd->add_option("--seed", eval.seed, "Bootstrap seed")->capture_default_str();
  eval_cmd->add_option("--split", eval.split, "train|test|all")->capture_default_str();
  eval_cmd->add_option("--out", eval.out, "Report directory (default: checkpoint directory)");

  ExperimentArgs bench;
  auto* bench_cmd = app.add_subcommand("benchmark", "Methods x seeds on the train/test split");
  AddExperimentFlags(bench_cmd, bench);
  bench_cmd->add_option("--methods", bench.methods, "Methods [simlp linear abmil]");

  ExperimentArgs fewshot;
  auto* fewshot_cmd = app.add_subcommand("fewshot", "Few-shot curve over K slides per class");
  AddExperimentFlags(fewshot_cmd, fewshot);
  fewshot_cmd->add_option("--methods", fewshot.methods, "Methods [simlp linear abmil]");
  fewshot_cmd->add_option("--shots", fewshot.shots, "K values [1 5 10 20 50]");

  ExperimentArgs transfer;
  auto* transfer_cmd = app.add_subcommand("transfer", "Train on one cohort, test on others");
  AddExperimentFlags(transfer_cmd, transfer);
  transfer_cmd->add_option("--methods", transfer.methods, "Methods [simlp linear abmil]");
  transfer_cmd->add_option("--train-cohort", transfer.train_cohort,
                           "Training cohort (default: first in manifest)");
  transfer_cmd->add_option("--test-cohorts", transfer.test_cohorts,
                           "Test cohorts (default: all)");

  ExperimentArgs ablate;
  auto* ablate_cmd = app.add_subcommand("ablate", "Pooling x activation grid");
  AddExperimentFlags(ablate_cmd, ablate);
  ablate_cmd->add_option("--methods", ablate.methods, "Grid cells [mean|max x relu|gelu|swiglu]");

  ReportArgs report;
  auto* report_cmd = app.add_subcommand("report", "Re-render tables from a record log");
  report_cmd->add_option("--records", report.records, "records.jsonl or its directory")
      ->required();
  report_cmd->add_option("--plan-hash", report.plan_hash, "Plan to render (default: latest)");
  report_cmd->add_option("--out", report.out, "Write CSV/text tables here");

  GradCheckArgs grad;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  grad_cmd->add_option("--methods", grad.methods, "Methods (default: all heads)");
  grad_cmd->add_option("--inits", grad.inits, "Random initializations per method")
      ->capture_default_str();
  grad_cmd->add_option("--seed", grad.first_seed, "First init seed")->capture_default_str();
  grad_cmd->add_option("--tolerance", grad.tolerance, "Max relative error")
      ->capture_default_str();
  grad_cmd->add_option("--step", grad.step, "Central-difference step")->capture_default_str();
  grad_cmd->add_option("--checkpoint", grad.checkpoint,
                       "Instead: compare this checkpoint with its initialization");
  grad_cmd->add_option("--init-seed", grad.init_seed, "Seed for --checkpoint comparison")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*synth_cmd) return RunSynth(synth);
    if (*train_cmd) return RunTrain(train);
    if (*eval_cmd) return RunEval(eval);
    if (*bench_cmd) return RunSuite(Protocol::kBenchmark, bench, "benchmark");
    if (*fewshot_cmd) return RunSuite(Protocol::kFewShot, fewshot, "fewshot");
    if (*transfer_cmd) return RunSuite(Protocol::kTransfer, transfer, "transfer");
    if (*ablate_cmd) return RunSuite(Protocol::kAblation, ablate, "ablate");
    if (*report_cmd) return RunReport(report);
    if (*grad_cmd) return RunGradCheck(grad);
  } catch (const Error& e) {
    std::cerr << "error [" << ErrorCodeName(e.code()) << "]: " << e.what() << "\n";
    return ExitCodeFor(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error [io]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
