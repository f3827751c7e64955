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
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "slidetune/layers.hpp"
#include "slidetune/model.hpp"

namespace slidetune {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Relative error is |a - n| / max(|a|, |n|, denominator_floor), so
  // gradients that are zero up to rounding are compared absolutely.
  double denominator_floor = 1e-6;
};

struct ParamCheck {
  std::string name;
  std::size_t count = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_index = 0;
};

struct GradCheckReport {
  std::vector<ParamCheck> params;
  double max_rel_error = 0.0;
  bool passed = true;
};

// Compares analytic gradients against central differences
// (L(θ+h) - L(θ-h)) / 2h, one coordinate at a time.
//
// `analytic` must zero every grad buffer in `params` and fill it with the
// gradient of `loss` at the current parameter values. `loss` must be a pure
// function of the values referenced by `params`. Parameter values are
// restored exactly before returning.
GradCheckReport FiniteDifferenceCheck(std::span<const ParamView> params,
                                      const std::function<double()>& loss,
                                      const std::function<void()>& analytic,
                                      const GradCheckOptions& options = {});

// Small random problem used to check a whole model.
struct ModelGradCheckConfig {
  std::size_t input_dim = 6;
  std::size_t num_classes = 3;
  std::size_t hidden_width = 8;
  std::size_t attention_hidden = 5;
  std::size_t num_bags = 3;
  std::size_t patches = 4;
  // ReLU pre-activations closer than this to 0 are pushed away through the
  // bias before checking, so the finite difference never straddles the kink.
  double relu_margin = 1e-3;
};

// linear, simlp, mean+gelu, mean+swiglu, abmil, then the max-pool heads.
std::vector<std::string> GradCheckMethods();

// Builds `spec` from `seed`, draws bags and targets from the same seed, and
// checks every parameter plus the gradient with respect to each input bag
// (reported as "input.bag<i>") on the summed cross-entropy loss.
GradCheckReport CheckModelGradients(const ModelSpec& spec, std::uint64_t seed,
                                    const ModelGradCheckConfig& config = {},
                                    const GradCheckOptions& options = {});

}  // namespace slidetune
