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

// Differentiable building blocks. Every layer has a forward and a
// hand-derived backward; there is no general autodiff graph.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "slidetune/matrix.hpp"

namespace slidetune {

enum class ActivationKind { kReLU, kGeLU, kSwiGLU };

const char* ActivationName(ActivationKind kind);
// Accepts "relu", "gelu", "swiglu" (case-insensitive). Throws ConfigError.
ActivationKind ParseActivation(std::string_view name);

// SwiGLU halves its input (value half, gate half); the others preserve width.
std::size_t ActivationOutputWidth(ActivationKind kind, std::size_t in_width);
std::size_t ActivationInputWidth(ActivationKind kind, std::size_t out_width);

// Mutable view of one parameter tensor and its gradient buffer.
struct ParamView {
  std::string name;
  std::span<double> value;
  std::span<double> grad;
};

// Affine layer y = W x + b with gradient buffers of matching shape.
struct LayerParams {
  LayerParams() = default;
  LayerParams(std::size_t out_dim, std::size_t in_dim)
      : weight(out_dim, in_dim),
        bias(out_dim, 0.0),
        grad_weight(out_dim, in_dim),
        grad_bias(out_dim, 0.0) {}

  std::size_t in_dim() const noexcept { return weight.cols(); }
  std::size_t out_dim() const noexcept { return weight.rows(); }
  std::size_t parameter_count() const noexcept {
    return weight.size() + bias.size();
  }
  void ZeroGrad();

  Matrix weight;
  Vector bias;
  Matrix grad_weight;
  Vector grad_bias;
};

// Returns W x + b. Throws ShapeError when x.size() != in_dim.
Vector LinearForward(const LayerParams& params, std::span<const double> x);

// Accumulates dW += g xᵀ and db += g; returns Wᵀ g.
Vector LinearBackward(LayerParams& params, std::span<const double> x,
                      std::span<const double> grad_out);

// ReLU max(0,x); exact GeLU x·Φ(x); SwiGLU value ⊙ SiLU(gate) where the
// first half of x is the value and the second half the gate.
Vector ActivationForward(ActivationKind kind, std::span<const double> x);

// Gradient w.r.t. the activation input `x`. ReLU uses 0 at x == 0.
Vector ActivationBackward(ActivationKind kind, std::span<const double> x,
                          std::span<const double> grad_out);

double Sigmoid(double x);
double StandardNormalCdf(double x);

// Max-subtracted softmax.
Vector Softmax(std::span<const double> logits);

struct LossAndGrad {
  double loss = 0.0;
  Vector grad_logits;
};

// loss = -log softmax(logits)[target]; grad = softmax(logits) - onehot.
// Throws IndexError when target is out of range.
LossAndGrad SoftmaxCrossEntropy(std::span<const double> logits,
                                std::size_t target);

// Ordered stack of affine and activation layers. Forward() records the
// intermediate inputs; Backward() consumes that record, so each Backward must
// be preceded by exactly one Forward.
class Sequential {
 public:
  using Layer = std::variant<LayerParams, ActivationKind>;

  void AddLinear(LayerParams params);
  void AddActivation(ActivationKind kind);

  // Recording forward pass.
  Vector Forward(std::span<const double> x);
  // Non-recording forward pass; safe to call concurrently.
  Vector Evaluate(std::span<const double> x) const;
  // Throws StateError if no forward pass is pending or `grad_out` does not
  // match the recorded output width.
  Vector Backward(std::span<const double> grad_out);

  bool has_pending_forward() const noexcept { return tape_.has_value(); }
  void ClearTape() { tape_.reset(); }

  void ZeroGrad();
  std::vector<ParamView> Parameters(const std::string& prefix);
  std::size_t parameter_count() const;

  std::size_t input_dim() const;
  std::size_t output_dim() const;

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

 private:
  struct Tape {
    std::vector<Vector> inputs;  // input to each layer
    std::size_t output_dim = 0;
  };

  std::vector<Layer> layers_;
  std::optional<Tape> tape_;
};

}  // namespace slidetune
