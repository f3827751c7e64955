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

// Bag aggregators: map an n x d matrix of patch embeddings to one length-d
// slide representation. Patch features are used as-is (no per-patch
// transformation before aggregation).

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "slidetune/layers.hpp"
#include "slidetune/matrix.hpp"

namespace slidetune {

// One slide: its id and patch-embedding matrix (n patches x d dims).
struct SlideBag {
  std::string slide_id;
  Matrix features;

  std::size_t num_patches() const noexcept { return features.rows(); }
  std::size_t dim() const noexcept { return features.cols(); }
};

enum class AggregatorKind { kMean, kMax, kGatedAttention };

const char* AggregatorName(AggregatorKind kind);
// Accepts "mean", "max", "gated_attention" (alias "abmil").
AggregatorKind ParseAggregator(std::string_view name);

// Mean and max pooling have no parameters; only gated attention reads
// `attention_hidden`.
struct AggregatorSpec {
  AggregatorKind kind = AggregatorKind::kMean;
  std::size_t attention_hidden = 256;

  friend bool operator==(const AggregatorSpec&, const AggregatorSpec&) = default;
};

// Always d: every aggregator returns a convex combination or an
// elementwise extreme of the patch rows.
std::size_t AggregatorOutputDim(const AggregatorSpec& spec,
                                std::size_t input_dim);

// Column means. Each column is summed in ascending value order, which makes
// the result bitwise invariant to row permutations of the bag.
Vector MeanPool(const SlideBag& bag);
Vector MeanPool(const Matrix& features);

// Column maxima.
Vector MaxPool(const SlideBag& bag);
Vector MaxPool(const Matrix& features);

// Input gradients of the pooling operators. Max routes each column's
// gradient to the lowest row index attaining the maximum.
Matrix MeanPoolBackward(std::size_t num_patches,
                        std::span<const double> grad_out);
Matrix MaxPoolBackward(const Matrix& features,
                       std::span<const double> grad_out);

struct GatedAttentionParams {
  GatedAttentionParams() = default;
  GatedAttentionParams(std::size_t hidden, std::size_t input_dim)
      : V(hidden, input_dim),
        U(hidden, input_dim),
        w(hidden, 0.0),
        grad_V(hidden, input_dim),
        grad_U(hidden, input_dim),
        grad_w(hidden, 0.0) {}

  std::size_t hidden() const noexcept { return V.rows(); }
  std::size_t input_dim() const noexcept { return V.cols(); }
  std::size_t parameter_count() const noexcept {
    return V.size() + U.size() + w.size();
  }
  void ZeroGrad();

  Matrix V;  // tanh branch, h x d
  Matrix U;  // sigmoid gate branch, h x d
  Vector w;  // score projection, h
  Matrix grad_V;
  Matrix grad_U;
  Vector grad_w;
};

struct AttentionPooling {
  Vector representation;  // s = Σ a_i p_i
  Vector attention;       // a, sums to 1
};

// a = softmax_i(wᵀ(tanh(V p_i) ⊙ σ(U p_i))), s = Σ a_i p_i (summed in
// ascending patch order).
AttentionPooling GatedAttentionPool(const GatedAttentionParams& params,
                                    const SlideBag& bag);

// Stateful wrapper that records the forward pass so Backward can produce
// gradients for V, U, w and the bag.
class GatedAttention {
 public:
  GatedAttention() = default;
  explicit GatedAttention(GatedAttentionParams params)
      : params_(std::move(params)) {}

  AttentionPooling Forward(const SlideBag& bag);
  AttentionPooling Evaluate(const SlideBag& bag) const;
  // Accumulates into the parameter grad buffers and returns dL/d(features).
  // Throws StateError without a pending Forward.
  // With want_input_grad false the returned matrix is empty (0 x 0).
  Matrix Backward(std::span<const double> grad_representation,
                  bool want_input_grad = true);

  std::vector<ParamView> Parameters(const std::string& prefix);
  void ZeroGrad() { params_.ZeroGrad(); }

  GatedAttentionParams& params() { return params_; }
  const GatedAttentionParams& params() const { return params_; }

 private:
  struct Tape {
    Matrix features;
    Matrix tanh_branch;  // n x h
    Matrix gate_branch;  // n x h
    Vector attention;
  };

  GatedAttentionParams params_;
  std::optional<Tape> tape_;
};

}  // namespace slidetune
