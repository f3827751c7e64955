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

#include "slidetune/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <variant>

#include "slidetune/rng.hpp"

namespace slidetune {
namespace {

constexpr std::uint64_t kBagStream = 0x6c4ec;

// Moves each ReLU pre-activation at least `margin` away from zero on every
// bag by adjusting the bias of the layer feeding the ReLU.
void NudgeReluKinks(SlideModel& model, const std::vector<SlideBag>& bags, double margin) {
  if (!model.has_parameter_free_aggregator()) return;
  auto& layers = model.head().layers();
  if (layers.size() < 2) return;
  auto* linear = std::get_if<LayerParams>(&layers[0]);
  const auto* act = std::get_if<ActivationKind>(&layers[1]);
  if (!linear || !act || *act != ActivationKind::kReLU) return;
  std::vector<Vector> reps;
  for (const SlideBag& b : bags) reps.push_back(model.Pool(b));
  for (std::size_t k = 0; k < linear->out_dim(); ++k) {
    for (int attempt = 0; attempt < 64; ++attempt) {
      bool clear = true;
      for (const Vector& x : reps) {
        double z = linear->bias[k];
        for (std::size_t j = 0; j < x.size(); ++j) z += linear->weight(k, j) * x[j];
        if (std::abs(z) < margin) clear = false;
      }
      if (clear) break;
      linear->bias[k] += 2.0 * margin;
    }
  }
}

}  // namespace

GradCheckReport FiniteDifferenceCheck(std::span<const ParamView> params,
                                      const std::function<double()>& loss,
                                      const std::function<void()>& analytic,
                                      const GradCheckOptions& options) {
  analytic();
  std::vector<Vector> grads;
  grads.reserve(params.size());
  for (const ParamView& p : params) grads.emplace_back(p.grad.begin(), p.grad.end());

  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const ParamView& p = params[k];
    ParamCheck check;
    check.name = p.name;
    check.count = p.value.size();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + options.step;
      const double plus = loss();
      p.value[i] = saved - options.step;
      const double minus = loss();
      p.value[i] = saved;

      const double numeric = (plus - minus) / (2.0 * options.step);
      const double a = grads[k][i];
      const double abs_err = std::abs(a - numeric);
      const double denom = std::max(
          {std::abs(a), std::abs(numeric), options.denominator_floor});
      const double rel = abs_err / denom;
      if (rel > check.max_rel_error || !std::isfinite(rel)) {
        check.max_rel_error = std::isfinite(rel) ? rel : INFINITY;
        check.worst_index = i;
      }
      check.max_abs_error = std::max(check.max_abs_error, abs_err);
    }
    report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
    report.params.push_back(std::move(check));
  }
  report.passed = report.max_rel_error <= options.tolerance;
  return report;
}

std::vector<std::string> GradCheckMethods() {
  return {"linear",   "simlp",    "mean+gelu", "mean+swiglu",
          "abmil",    "max+relu", "max+gelu",  "max+swiglu"};
}

GradCheckReport CheckModelGradients(const ModelSpec& spec, std::uint64_t seed,
                                    const ModelGradCheckConfig& config,
                                    const GradCheckOptions& options) {
  spec.Validate();
  SlideModel model = BuildModel(spec, seed);
  std::vector<SlideBag> bags;
  std::vector<std::size_t> targets;
  for (std::size_t b = 0; b < config.num_bags; ++b) {
    CounterRng rng(seed, StreamKey({kBagStream, b}));
    Matrix features(config.patches, spec.input_dim);
    for (double& v : features.values()) v = rng.Normal();
    bags.push_back({"bag" + std::to_string(b), std::move(features)});
    targets.push_back(b % spec.num_classes);
  }
  NudgeReluKinks(model, bags, config.relu_margin);

  std::vector<ParamView> params = model.Parameters();
  std::vector<Matrix> input_grads(bags.size());
  for (std::size_t b = 0; b < bags.size(); ++b) {
    input_grads[b] = Matrix(config.patches, spec.input_dim);
    params.push_back({"input.bag" + std::to_string(b), bags[b].features.values(),
                      input_grads[b].values()});
  }

  auto loss = [&] {
    double total = 0.0;
    for (std::size_t b = 0; b < bags.size(); ++b) {
      total += SoftmaxCrossEntropy(model.Forward(bags[b]), targets[b]).loss;
    }
    return total;
  };
  auto analytic = [&] {
    model.ZeroGrad();
    for (std::size_t b = 0; b < bags.size(); ++b) {
      Matrix g;
      model.LossAndBackward(bags[b], targets[b], &g);
      std::copy(g.values().begin(), g.values().end(), input_grads[b].values().begin());
    }
  };
  return FiniteDifferenceCheck(params, loss, analytic, options);
}

}  // namespace slidetune
