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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slidetune/layers.hpp"
#include "slidetune/model.hpp"

namespace slidetune {

// Defaults are the reference fine-tuning recipe: AdamW, lr 1e-4,
// betas (0.9, 0.98), weight decay 1e-4, batch size 1, 20 epochs, constant
// learning rate.
struct TrainConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double weight_decay = 1e-4;
  double epsilon = 1e-8;
  std::size_t epochs = 20;
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void Validate() const;
  std::string ToCanonicalText() const;
};

// First/second moment buffers, one per parameter tensor.
struct OptimizerState {
  std::vector<Vector> first_moment;
  std::vector<Vector> second_moment;
  std::uint64_t step = 0;
};

// One AdamW update with decoupled weight decay:
//   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g²
//   θ <- θ - lr (m̂ / (√v̂ + ε) + wd θ)
// Initializes `state` on first use. Throws NumericError naming the
// parameter if any gradient is non-finite; nothing is updated in that case.
void AdamWStep(std::span<const ParamView> params, OptimizerState& state,
               const TrainConfig& config);

struct LabeledSlide {
  const SlideBag* bag = nullptr;
  std::size_t label = 0;
};

struct EpochStats {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  std::optional<double> train_balanced_accuracy;
};

struct TrainOptions {
  bool track_train_accuracy = false;
};

struct TrainResult {
  std::vector<EpochStats> trace;
  std::uint64_t steps = 0;
};

// Batch size 1: one AdamW step per slide, slides visited in a per-epoch
// shuffle derived from (config.seed, epoch). No schedule, no early stopping;
// the model after the last epoch is the result.
//
// Throws ConfigError for an empty split or batch_size != 1, ShapeError for
// dim mismatches, NumericError when the loss diverges (with epoch/slide).
TrainResult Train(SlideModel& model, std::span<const LabeledSlide> split,
                  const TrainConfig& config, const TrainOptions& options = {});

// "epoch,mean_loss,train_bal_acc" with one row per epoch; the accuracy
// column is empty when it was not tracked.
std::string LossTraceCsv(std::span<const EpochStats> trace);
void WriteLossTraceCsv(const std::filesystem::path& path,
                       std::span<const EpochStats> trace);

}  // namespace slidetune
