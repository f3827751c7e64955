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

// Slide-level models: an aggregator composed with a classification head.
//
//   linear probe : mean pool -> affine
//   SiMLP        : mean pool -> affine -> activation -> affine
//   ABMIL        : gated attention pool -> affine
//
// The MLP head is exactly two affine layers with one activation between
// them. With SwiGLU the first layer emits 2 * hidden_width units which the
// activation splits into value and gate halves.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "slidetune/aggregate.hpp"
#include "slidetune/layers.hpp"

namespace slidetune {

enum class HeadKind { kLinear, kMlp };

const char* HeadName(HeadKind kind);

struct ModelSpec {
  AggregatorSpec aggregator;
  HeadKind head = HeadKind::kMlp;
  std::size_t hidden_width = 512;
  ActivationKind activation = ActivationKind::kReLU;
  std::size_t input_dim = 0;
  std::size_t num_classes = 0;

  // Throws ConfigError for K < 2, zero dims, or zero hidden widths.
  void Validate() const;

  // Single line, fixed key order, e.g.
  // "aggregator=mean attention_hidden=256 head=mlp hidden_width=512
  //  activation=relu input_dim=64 num_classes=10" (one line).
  std::string ToCanonicalText() const;
  static ModelSpec FromCanonicalText(std::string_view text);

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct MethodOptions {
  std::size_t hidden_width = 512;
  std::size_t attention_hidden = 256;
};

// Maps a method name onto a spec:
//   simlp         mean + mlp(relu)
//   linear        mean + linear
//   abmil         gated_attention + linear
//   mean+<act>    mean + mlp(<act>)     (<act> in relu, gelu, swiglu)
//   max+<act>     max + mlp(<act>)
//   max+linear    max + linear
// Throws ConfigError for unknown names.
ModelSpec SpecForMethod(std::string_view method, std::size_t input_dim,
                        std::size_t num_classes,
                        const MethodOptions& options = {});

// Total scalar parameter count implied by a spec.
std::size_t ParameterCount(const ModelSpec& spec);

// Lowest index among the maxima.
std::size_t ArgMax(std::span<const double> values);

struct Prediction {
  std::size_t label = 0;
  Vector probabilities;
  Vector logits;
};

Prediction PredictFromLogits(std::span<const double> logits);

class SlideModel {
 public:
  explicit SlideModel(const ModelSpec& spec);

  const ModelSpec& spec() const noexcept { return spec_; }

  // Slide representation produced by the aggregator.
  Vector Pool(const SlideBag& bag) const;
  // Head applied to an already pooled representation.
  Vector HeadLogits(std::span<const double> representation) const;
  // Logits for a bag. Read-only; safe to call concurrently.
  Vector Forward(const SlideBag& bag) const;
  Prediction Predict(const SlideBag& bag) const;

  // Cross-entropy loss for one slide; accumulates parameter gradients
  // (without zeroing them first). When `grad_features` is non-null it
  // receives dL/d(bag features).
  double LossAndBackward(const SlideBag& bag, std::size_t target,
                         Matrix* grad_features = nullptr);
  // Same, starting from a cached pooled representation. Only valid for
  // parameter-free aggregators.
  double LossAndBackwardPooled(std::span<const double> representation,
                               std::size_t target);

  bool has_parameter_free_aggregator() const noexcept {
    return !attention_.has_value();
  }

  void ZeroGrad();
  // Declaration order: aggregator tensors, then head layers.
  std::vector<ParamView> Parameters();
  std::size_t parameter_count() const;

  GatedAttention* attention() { return attention_ ? &*attention_ : nullptr; }
  Sequential& head() { return head_; }
  const Sequential& head() const { return head_; }

 private:
  ModelSpec spec_;
  std::optional<GatedAttention> attention_;
  Sequential head_;
};

// Weights ~ U[-1/√fan_in, +1/√fan_in] from a counter-based stream keyed by
// (seed, tensor index); biases zero. Deterministic across platforms.
SlideModel BuildModel(const ModelSpec& spec, std::uint64_t seed);

// Checkpoint container, all integers and floats little-endian:
//   "SLIDECKP"  magic, 8 bytes
//   u8          format version (1)
//   u32, bytes  ModelSpec canonical text
//   u32         tensor count
//   per tensor: u32 name length, name, u64 element count, f64 values
// Tensors appear in SlideModel::Parameters() order.
inline constexpr std::string_view kCheckpointMagic = "SLIDECKP";
inline constexpr std::uint8_t kCheckpointVersion = 1;

std::string SerializeCheckpoint(SlideModel& model);
SlideModel DeserializeCheckpoint(std::string_view bytes);
void SaveCheckpoint(const std::filesystem::path& path, SlideModel& model);
SlideModel LoadCheckpoint(const std::filesystem::path& path);

}  // namespace slidetune
