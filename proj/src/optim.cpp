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

#include "slidetune/optim.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "byteio.hpp"
#include "slidetune/errors.hpp"
#include "slidetune/metrics.hpp"
#include "slidetune/rng.hpp"

namespace slidetune {
namespace {

constexpr std::uint64_t kShuffleStream = 0x5417f;

std::string FormatDouble(double v) { return FormatNumber(v); }

}  // namespace

void TrainConfig::Validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be > 0");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("betas must lie in [0, 1)");
  }
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  if (batch_size != 1) {
    throw ConfigError("only batch_size 1 is supported, got " +
                      std::to_string(batch_size));
  }
}

std::string TrainConfig::ToCanonicalText() const {
  return "lr=" + FormatDouble(learning_rate) + " beta1=" + FormatDouble(beta1) +
         " beta2=" + FormatDouble(beta2) +
         " weight_decay=" + FormatDouble(weight_decay) +
         " epsilon=" + FormatDouble(epsilon) +
         " epochs=" + std::to_string(epochs) +
         " batch_size=" + std::to_string(batch_size) +
         " seed=" + std::to_string(seed);
}

void AdamWStep(std::span<const ParamView> params, OptimizerState& state,
               const TrainConfig& config) {
  if (state.first_moment.empty() && !params.empty()) {
    state.first_moment.resize(params.size());
    state.second_moment.resize(params.size());
    for (std::size_t k = 0; k < params.size(); ++k) {
      state.first_moment[k].assign(params[k].value.size(), 0.0);
      state.second_moment[k].assign(params[k].value.size(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ShapeError("optimizer state holds " +
                     std::to_string(state.first_moment.size()) +
                     " tensors, got " + std::to_string(params.size()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const ParamView& p = params[k];
    if (p.grad.size() != p.value.size() ||
        state.first_moment[k].size() != p.value.size()) {
      throw ShapeError("parameter '" + p.name + "' has " +
                       std::to_string(p.value.size()) + " values, " +
                       std::to_string(p.grad.size()) + " gradients and " +
                       std::to_string(state.first_moment[k].size()) +
                       " optimizer slots");
    }
    for (std::size_t i = 0; i < p.grad.size(); ++i) {
      if (!std::isfinite(p.grad[i])) {
        throw NumericError("non-finite gradient " + std::to_string(p.grad[i]) +
                           " in parameter '" + p.name + "' at index " +
                           std::to_string(i));
      }
    }
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double b1 = config.beta1;
  const double b2 = config.beta2;
  const double correction1 = 1.0 - std::pow(b1, t);
  const double correction2 = 1.0 - std::pow(b2, t);
  const double inv_correction1 = 1.0 / correction1;
  const double inv_correction2 = 1.0 / correction2;
  const double lr = config.learning_rate;
  const double wd = config.weight_decay;
  const double eps = config.epsilon;

  for (std::size_t k = 0; k < params.size(); ++k) {
    const ParamView& p = params[k];
    double* m = state.first_moment[k].data();
    double* v = state.second_moment[k].data();
    double* value = p.value.data();
    const double* grad = p.grad.data();
    const std::size_t n = p.value.size();
    for (std::size_t i = 0; i < n; ++i) {
      const double g = grad[i];
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      const double m_hat = m[i] * inv_correction1;
      const double v_hat = v[i] * inv_correction2;
      const double theta = value[i];
      value[i] = theta - lr * (m_hat / (std::sqrt(v_hat) + eps) + wd * theta);
    }
  }
}

TrainResult Train(SlideModel& model, std::span<const LabeledSlide> split,
                  const TrainConfig& config, const TrainOptions& options) {
  config.Validate();
  if (split.empty()) throw ConfigError("training split is empty");
  const std::size_t num_classes = model.spec().num_classes;
  for (const LabeledSlide& s : split) {
    if (s.bag == nullptr) throw ConfigError("training split holds a null slide");
    if (s.bag->dim() != model.spec().input_dim) {
      throw ShapeError("slide '" + s.bag->slide_id + "' has feature dim " +
                       std::to_string(s.bag->dim()) + ", model expects " +
                       std::to_string(model.spec().input_dim));
    }
    if (s.label >= num_classes) {
      throw IndexError("slide '" + s.bag->slide_id + "' has label " +
                       std::to_string(s.label) + " but the model has " +
                       std::to_string(num_classes) + " classes");
    }
  }

  // Parameter-free aggregators give a fixed representation per slide.
  std::vector<Vector> pooled;
  if (model.has_parameter_free_aggregator()) {
    pooled.reserve(split.size());
    for (const LabeledSlide& s : split) pooled.push_back(model.Pool(*s.bag));
  }

  TrainResult result;
  OptimizerState state;
  const std::vector<ParamView> params = model.Parameters();
  std::vector<std::size_t> order(split.size());
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    CounterRng rng(config.seed, StreamKey({kShuffleStream, epoch}));
    Shuffle(order, rng);

    double loss_sum = 0.0;
    for (std::size_t idx : order) {
      const LabeledSlide& s = split[idx];
      model.ZeroGrad();
      const double loss = pooled.empty()
                              ? model.LossAndBackward(*s.bag, s.label)
                              : model.LossAndBackwardPooled(pooled[idx], s.label);
      if (!std::isfinite(loss)) {
        throw NumericError("training diverged at epoch " +
                           std::to_string(epoch) + " on slide '" +
                           s.bag->slide_id + "' (loss " +
                           std::to_string(loss) + ")");
      }
      try {
        AdamWStep(params, state, config);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " (epoch " +
                           std::to_string(epoch) + ", slide '" +
                           s.bag->slide_id + "')");
      }
      loss_sum += loss;
    }
    model.ZeroGrad();

    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = loss_sum / static_cast<double>(split.size());
    if (options.track_train_accuracy) {
      std::vector<std::size_t> labels;
      std::vector<std::size_t> preds;
      for (std::size_t i = 0; i < split.size(); ++i) {
        labels.push_back(split[i].label);
        const Vector logits = pooled.empty() ? model.Forward(*split[i].bag)
                                             : model.HeadLogits(pooled[i]);
        preds.push_back(ArgMax(logits));
      }
      stats.train_balanced_accuracy =
          BalancedAccuracy(labels, preds, num_classes).value;
    }
    result.trace.push_back(stats);
  }
  result.steps = state.step;
  return result;
}

std::string LossTraceCsv(std::span<const EpochStats> trace) {
  std::ostringstream out;
  out << "epoch,mean_loss,train_bal_acc\n";
  for (const EpochStats& e : trace) {
    out << e.epoch << ',' << FormatNumber(e.mean_loss) << ',';
    if (e.train_balanced_accuracy) out << FormatNumber(*e.train_balanced_accuracy);
    out << '\n';
  }
  return out.str();
}

void WriteLossTraceCsv(const std::filesystem::path& path,
                       std::span<const EpochStats> trace) {
  internal::WriteFileBytes(path, LossTraceCsv(trace));
}

}  // namespace slidetune
