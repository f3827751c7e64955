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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <string>
#include <vector>

#include "slidetune/aggregate.hpp"
#include "slidetune/dataset.hpp"
#include "slidetune/embedding.hpp"
#include "slidetune/errors.hpp"
#include "slidetune/gradcheck.hpp"
#include "slidetune/harness.hpp"
#include "slidetune/layers.hpp"
#include "slidetune/metrics.hpp"
#include "slidetune/model.hpp"
#include "slidetune/optim.hpp"
#include "slidetune/report.hpp"
#include "slidetune/synth.hpp"

namespace py = pybind11;
using namespace slidetune;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using IndexArray = py::array_t<std::size_t, py::array::c_style | py::array::forcecast>;

Matrix ToMatrix(const Array& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-d array, got " + std::to_string(a.ndim()) + "-d");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto cols = static_cast<std::size_t>(a.shape(1));
  return Matrix(rows, cols, std::vector<double>(a.data(), a.data() + rows * cols));
}

Vector ToVector(const Array& a) {
  if (a.ndim() != 1) throw ShapeError("expected a 1-d array, got " + std::to_string(a.ndim()) + "-d");
  return Vector(a.data(), a.data() + a.shape(0));
}

std::vector<std::size_t> ToIndices(const IndexArray& a) {
  if (a.ndim() != 1) throw ShapeError("expected a 1-d label array");
  return std::vector<std::size_t>(a.data(), a.data() + a.shape(0));
}

py::array_t<double> FromVector(const Vector& v) {
  py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::array_t<double> FromMatrix(const Matrix& m) {
  py::array_t<double> out({static_cast<py::ssize_t>(m.rows()), static_cast<py::ssize_t>(m.cols())});
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

SlideBag ToBag(const Array& features) { return {"input", ToMatrix(features)}; }

PredictionSet MakeSet(const IndexArray& labels, const IndexArray& predictions,
                      const Array& scores) {
  PredictionSet set;
  set.labels = ToIndices(labels);
  set.predictions = ToIndices(predictions);
  set.scores = ToMatrix(scores);
  set.num_classes = set.scores.cols();
  set.Validate();
  return set;
}

// Python-owned model; training state lives with it.
class PyModel {
 public:
  PyModel(const std::string& method, std::size_t input_dim, std::size_t num_classes,
          std::uint64_t seed, std::size_t hidden_width, std::size_t attention_hidden)
      : model_(BuildModel(SpecForMethod(method, input_dim, num_classes,
                                        {hidden_width, attention_hidden}),
                          seed)) {}
  explicit PyModel(SlideModel model) : model_(std::move(model)) {}

  std::string spec() const { return model_.spec().ToCanonicalText(); }
  std::size_t parameter_count() const { return model_.parameter_count(); }

  py::array_t<double> Forward(const Array& features) const {
    return FromVector(model_.Forward(ToBag(features)));
  }

  py::tuple Predict(const Array& features) const {
    const Prediction p = model_.Predict(ToBag(features));
    return py::make_tuple(p.label, FromVector(p.probabilities));
  }

  py::tuple LossAndBackward(const Array& features, std::size_t target) {
    model_.ZeroGrad();
    Matrix grad;
    const double loss = model_.LossAndBackward(ToBag(features), target, &grad);
    return py::make_tuple(loss, FromMatrix(grad));
  }

  py::dict Parameters(bool gradients) {
    py::dict out;
    for (const ParamView& p : model_.Parameters()) {
      const auto src = gradients ? p.grad : p.value;
      out[py::str(p.name)] = FromVector(Vector(src.begin(), src.end()));
    }
    return out;
  }

  std::vector<double> Fit(const std::filesystem::path& manifest_path, std::size_t epochs,
                          double learning_rate, double weight_decay, std::uint64_t seed) {
    const Dataset dataset = Dataset::Load(LoadManifest(manifest_path));
    TrainConfig config;
    config.epochs = epochs;
    config.learning_rate = learning_rate;
    config.weight_decay = weight_decay;
    config.seed = seed;
    TrainResult result;
    {
      py::gil_scoped_release release;
      result = Train(model_, dataset.Select(dataset.manifest().IndicesFor(Split::kTrain)), config);
    }
    std::vector<double> losses;
    for (const EpochStats& e : result.trace) losses.push_back(e.mean_loss);
    return losses;
  }

  void Save(const std::filesystem::path& path) { SaveCheckpoint(path, model_); }

 private:
  SlideModel model_;
};

std::vector<std::string> RunExperimentLines(
    const std::string& protocol, const std::filesystem::path& manifest_path,
    const std::vector<std::string>& methods, std::optional<std::vector<std::uint64_t>> seeds,
    std::optional<std::vector<std::size_t>> shots, const std::string& train_cohort,
    std::optional<std::vector<std::string>> test_cohorts, std::size_t epochs,
    std::size_t bootstrap, std::size_t jobs, std::size_t hidden_width,
    std::size_t attention_hidden, const std::optional<std::filesystem::path>& output_dir) {
  const DatasetManifest manifest = LoadManifest(manifest_path);
  ExperimentPlan plan;
  plan.protocol = ParseProtocol(protocol);
  plan.methods = MakeMethods(methods, manifest.feature_dim, manifest.classes.size(),
                             {hidden_width, attention_hidden});
  plan.seeds = seeds ? *seeds : DefaultSeeds(plan.protocol);
  plan.shots = shots ? *shots : kDefaultShots;
  if (plan.protocol == Protocol::kTransfer) {
    plan.train_cohort = train_cohort.empty() ? manifest.Cohorts().front() : train_cohort;
    plan.test_cohorts = test_cohorts ? *test_cohorts : manifest.Cohorts();
  }
  plan.train_config.epochs = epochs;
  plan.bootstrap_resamples = bootstrap;
  plan.jobs = jobs;
  if (output_dir) plan.output_dir = *output_dir;
  plan.Validate();
  const Dataset dataset = Dataset::Load(manifest);
  std::vector<RunRecord> records;
  {
    py::gil_scoped_release release;
    records = RunExperiment(plan, dataset);
  }
  std::vector<std::string> lines;
  for (const RunRecord& r : records) lines.push_back(RecordToJsonLine(r));
  return lines;
}

std::string RenderLines(const std::vector<std::string>& lines) {
  std::vector<RunRecord> records;
  for (const std::string& l : lines) records.push_back(RecordFromJsonLine(l));
  return TablesToText(RenderSummary(records));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "slidetune core: pooling, heads, training, metrics and experiment harness";

  // Registered base first: later translators take priority.
  static auto& base = py::register_exception<Error>(m, "SlidetuneError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());

  m.def("mean_pool", [](const Array& f) { return FromVector(MeanPool(ToMatrix(f))); },
        py::arg("features"));
  m.def("max_pool", [](const Array& f) { return FromVector(MaxPool(ToMatrix(f))); },
        py::arg("features"));
  m.def(
      "gated_attention_pool",
      [](const Array& features, const Array& V, const Array& U, const Array& w) {
        GatedAttentionParams params(static_cast<std::size_t>(V.shape(0)),
                                    static_cast<std::size_t>(V.ndim() == 2 ? V.shape(1) : 0));
        params.V = ToMatrix(V);
        params.U = ToMatrix(U);
        params.w = ToVector(w);
        const AttentionPooling out = GatedAttentionPool(params, ToBag(features));
        return py::make_tuple(FromVector(out.representation), FromVector(out.attention));
      },
      py::arg("features"), py::arg("V"), py::arg("U"), py::arg("w"),
      "Returns (representation, attention weights).");
  m.def(
      "softmax_cross_entropy",
      [](const Array& logits, std::size_t target) {
        const LossAndGrad lg = SoftmaxCrossEntropy(ToVector(logits), target);
        return py::make_tuple(lg.loss, FromVector(lg.grad_logits));
      },
      py::arg("logits"), py::arg("target"));

  py::class_<PyModel>(m, "Model")
      .def(py::init<const std::string&, std::size_t, std::size_t, std::uint64_t, std::size_t,
                    std::size_t>(),
           py::arg("method"), py::arg("input_dim"), py::arg("num_classes"), py::arg("seed") = 0,
           py::arg("hidden_width") = 512, py::arg("attention_hidden") = 256)
      .def_property_readonly("spec", &PyModel::spec)
      .def_property_readonly("parameter_count", &PyModel::parameter_count)
      .def("forward", &PyModel::Forward, py::arg("features"))
      .def("predict", &PyModel::Predict, py::arg("features"),
           "Returns (label, class probabilities).")
      .def("loss_and_backward", &PyModel::LossAndBackward, py::arg("features"),
           py::arg("target"), "Zeroes gradients, then returns (loss, d loss / d features).")
      .def("parameters", &PyModel::Parameters, py::arg("gradients") = false)
      .def("fit", &PyModel::Fit, py::arg("manifest"), py::arg("epochs") = 20,
           py::arg("learning_rate") = 1e-4, py::arg("weight_decay") = 1e-4, py::arg("seed") = 0,
           "Trains on the manifest's train split; returns per-epoch mean loss.")
      .def("save", &PyModel::Save, py::arg("path"))
      .def_static(
          "load", [](const std::filesystem::path& path) { return PyModel(LoadCheckpoint(path)); },
          py::arg("path"));

  m.def(
      "balanced_accuracy",
      [](const IndexArray& labels, const IndexArray& predictions, std::size_t num_classes) {
        return BalancedAccuracy(ToIndices(labels), ToIndices(predictions), num_classes).value;
      },
      py::arg("labels"), py::arg("predictions"), py::arg("num_classes"));
  m.def(
      "weighted_f1",
      [](const IndexArray& labels, const IndexArray& predictions, std::size_t num_classes) {
        return WeightedF1(ToIndices(labels), ToIndices(predictions), num_classes).value;
      },
      py::arg("labels"), py::arg("predictions"), py::arg("num_classes"));
  m.def(
      "roc_auc",
      [](const IndexArray& labels, const Array& scores) {
        return RocAuc(ToIndices(labels), ToMatrix(scores)).value;
      },
      py::arg("labels"), py::arg("scores"));
  m.def(
      "bootstrap_ci",
      [](const IndexArray& labels, const IndexArray& predictions, const Array& scores,
         const std::string& metric, std::size_t resamples, std::uint64_t seed, double confidence) {
        const ConfidenceInterval ci =
            BootstrapCi(MakeSet(labels, predictions, scores), ParseMetric(metric),
                        {resamples, seed, confidence});
        return py::make_tuple(ci.lower, ci.upper);
      },
      py::arg("labels"), py::arg("predictions"), py::arg("scores"),
      py::arg("metric") = "balanced_accuracy", py::arg("resamples") = 1000, py::arg("seed") = 0,
      py::arg("confidence") = 0.95);

  m.def(
      "write_embedding",
      [](const std::filesystem::path& path, const Array& features, const std::string& dtype) {
        WriteEmbedding(path, ToMatrix(features), ParseDtype(dtype));
      },
      py::arg("path"), py::arg("features"), py::arg("dtype") = "f64");
  m.def(
      "read_embedding",
      [](const std::filesystem::path& path) { return FromMatrix(ReadEmbedding(path)); },
      py::arg("path"));

  m.def(
      "synthesize",
      [](const std::filesystem::path& out_dir, std::size_t num_classes, std::size_t feature_dim,
         std::size_t train_per_class, std::size_t test_per_class, std::size_t patches_min,
         std::size_t patches_max, double class_separation, double noise_scale,
         double informative_fraction, double cohort_shift, std::vector<std::string> cohorts,
         std::uint64_t seed, const std::string& dtype) {
        SynthConfig c;
        c.num_classes = num_classes;
        c.feature_dim = feature_dim;
        c.train_per_class = train_per_class;
        c.test_per_class = test_per_class;
        c.patches_min = patches_min;
        c.patches_max = patches_max;
        c.class_separation = class_separation;
        c.noise_scale = noise_scale;
        c.informative_fraction = informative_fraction;
        c.cohort_shift = cohort_shift;
        c.cohorts = std::move(cohorts);
        c.seed = seed;
        c.dtype = ParseDtype(dtype);
        c.Validate();
        std::filesystem::create_directories(out_dir);
        WriteSyntheticCorpus(GenerateSyntheticCorpus(c), out_dir, c.dtype);
        return out_dir / kManifestFileName;
      },
      py::arg("out_dir"), py::arg("num_classes") = 10, py::arg("feature_dim") = 64,
      py::arg("train_per_class") = 50, py::arg("test_per_class") = 20,
      py::arg("patches_min") = 16, py::arg("patches_max") = 48,
      py::arg("class_separation") = 3.0, py::arg("noise_scale") = 1.0,
      py::arg("informative_fraction") = 1.0, py::arg("cohort_shift") = 0.0,
      py::arg("cohorts") = std::vector<std::string>{"A"}, py::arg("seed") = 0,
      py::arg("dtype") = "f64", "Writes a synthetic corpus and returns the manifest path.");

  m.def(
      "gradcheck",
      [](const std::string& method, std::uint64_t seed) {
        ModelGradCheckConfig c;
        const ModelSpec spec = SpecForMethod(method, c.input_dim, c.num_classes,
                                             {c.hidden_width, c.attention_hidden});
        return CheckModelGradients(spec, seed, c).max_rel_error;
      },
      py::arg("method"), py::arg("seed") = 0,
      "Max relative error between analytic and central-difference gradients.");

  m.def("run_experiment", &RunExperimentLines, py::arg("protocol"), py::arg("manifest"),
        py::arg("methods"), py::arg("seeds") = py::none(), py::arg("shots") = py::none(),
        py::arg("train_cohort") = "", py::arg("test_cohorts") = py::none(),
        py::arg("epochs") = 20, py::arg("bootstrap") = 1000, py::arg("jobs") = 1,
        py::arg("hidden_width") = 512, py::arg("attention_hidden") = 256,
        py::arg("output_dir") = py::none(),
        "Runs a suite and returns one JSON record per line.");
  m.def("render_tables", &RenderLines, py::arg("records"),
        "Renders summary tables from JSON record lines.");
}
