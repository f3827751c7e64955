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

#include "slidetune/layers.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>

#include "slidetune/errors.hpp"

namespace slidetune {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

std::string Lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

void CheckSameLength(std::span<const double> a, std::span<const double> b,
                     const char* what) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(what) + ": input has length " +
                     std::to_string(a.size()) + " but upstream gradient has " +
                     std::to_string(b.size()));
  }
}

}  // namespace

const char* ActivationName(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::kReLU: return "relu";
    case ActivationKind::kGeLU: return "gelu";
    case ActivationKind::kSwiGLU: return "swiglu";
  }
  return "?";
}

ActivationKind ParseActivation(std::string_view name) {
  const std::string n = Lower(name);
  if (n == "relu") return ActivationKind::kReLU;
  if (n == "gelu") return ActivationKind::kGeLU;
  if (n == "swiglu") return ActivationKind::kSwiGLU;
  throw ConfigError("unknown activation '" + std::string(name) +
                    "' (expected relu, gelu or swiglu)");
}

std::size_t ActivationOutputWidth(ActivationKind kind, std::size_t in_width) {
  return kind == ActivationKind::kSwiGLU ? in_width / 2 : in_width;
}

std::size_t ActivationInputWidth(ActivationKind kind, std::size_t out_width) {
  return kind == ActivationKind::kSwiGLU ? out_width * 2 : out_width;
}

void LayerParams::ZeroGrad() {
  grad_weight.Fill(0.0);
  std::fill(grad_bias.begin(), grad_bias.end(), 0.0);
}

Vector LinearForward(const LayerParams& params, std::span<const double> x) {
  if (x.size() != params.in_dim()) {
    throw ShapeError("linear layer with weight " +
                     params.weight.ShapeString() +
                     " applied to input of shape " +
                     ShapeString(x.size(), 1));
  }
  Vector y(params.bias);
  for (std::size_t r = 0; r < params.out_dim(); ++r) {
    const auto w = params.weight.row(r);
    double acc = 0.0;
    for (std::size_t c = 0; c < w.size(); ++c) acc += w[c] * x[c];
    y[r] += acc;
  }
  return y;
}

Vector LinearBackward(LayerParams& params, std::span<const double> x,
                      std::span<const double> grad_out) {
  if (x.size() != params.in_dim() || grad_out.size() != params.out_dim()) {
    throw ShapeError("linear backward with weight " +
                     params.weight.ShapeString() + ": input " +
                     ShapeString(x.size(), 1) + ", upstream gradient " +
                     ShapeString(grad_out.size(), 1));
  }
  Vector grad_in(params.in_dim(), 0.0);
  for (std::size_t r = 0; r < params.out_dim(); ++r) {
    const double g = grad_out[r];
    params.grad_bias[r] += g;
    if (g == 0.0) continue;
    auto gw = params.grad_weight.row(r);
    const auto w = params.weight.row(r);
    for (std::size_t c = 0; c < gw.size(); ++c) {
      gw[c] += g * x[c];
      grad_in[c] += w[c] * g;
    }
  }
  return grad_in;
}

double Sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double StandardNormalCdf(double x) {
  return 0.5 * std::erfc(-x * kInvSqrt2);
}

Vector ActivationForward(ActivationKind kind, std::span<const double> x) {
  switch (kind) {
    case ActivationKind::kReLU: {
      Vector y(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::max(0.0, x[i]);
      return y;
    }
    case ActivationKind::kGeLU: {
      Vector y(x.size());
      for (std::size_t i = 0; i < x.size(); ++i)
        y[i] = x[i] * StandardNormalCdf(x[i]);
      return y;
    }
    case ActivationKind::kSwiGLU: {
      if (x.size() % 2 != 0) {
        throw ShapeError("swiglu needs an even-length input (value|gate), got " +
                         std::to_string(x.size()));
      }
      const std::size_t h = x.size() / 2;
      Vector y(h);
      for (std::size_t i = 0; i < h; ++i) {
        const double gate = x[h + i];
        y[i] = x[i] * gate * Sigmoid(gate);
      }
      return y;
    }
  }
  return {};
}

Vector ActivationBackward(ActivationKind kind, std::span<const double> x,
                          std::span<const double> grad_out) {
  switch (kind) {
    case ActivationKind::kReLU: {
      CheckSameLength(x, grad_out, "relu backward");
      Vector g(x.size());
      for (std::size_t i = 0; i < x.size(); ++i)
        g[i] = x[i] > 0.0 ? grad_out[i] : 0.0;
      return g;
    }
    case ActivationKind::kGeLU: {
      CheckSameLength(x, grad_out, "gelu backward");
      Vector g(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x[i] * x[i]);
        g[i] = grad_out[i] * (StandardNormalCdf(x[i]) + x[i] * pdf);
      }
      return g;
    }
    case ActivationKind::kSwiGLU: {
      if (x.size() % 2 != 0 || grad_out.size() * 2 != x.size()) {
        throw ShapeError("swiglu backward: input length " +
                         std::to_string(x.size()) +
                         " and upstream gradient length " +
                         std::to_string(grad_out.size()) +
                         " are inconsistent");
      }
      const std::size_t h = grad_out.size();
      Vector g(x.size());
      for (std::size_t i = 0; i < h; ++i) {
        const double value = x[i];
        const double gate = x[h + i];
        const double s = Sigmoid(gate);
        const double silu = gate * s;
        g[i] = grad_out[i] * silu;
        g[h + i] = grad_out[i] * value * s * (1.0 + gate * (1.0 - s));
      }
      return g;
    }
  }
  return {};
}

Vector Softmax(std::span<const double> logits) {
  if (logits.empty()) throw ShapeError("softmax of an empty vector");
  const double m = *std::max_element(logits.begin(), logits.end());
  Vector p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

LossAndGrad SoftmaxCrossEntropy(std::span<const double> logits,
                                std::size_t target) {
  if (target >= logits.size()) {
    throw IndexError("target class " + std::to_string(target) +
                     " out of range for " + std::to_string(logits.size()) +
                     " logits");
  }
  RequireFinite(logits, "logits");
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - m);
  const double log_sum = std::log(sum);

  LossAndGrad out;
  out.loss = log_sum - (logits[target] - m);
  out.grad_logits.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i)
    out.grad_logits[i] = std::exp(logits[i] - m) / sum;
  out.grad_logits[target] -= 1.0;
  return out;
}

void Sequential::AddLinear(LayerParams params) {
  layers_.emplace_back(std::move(params));
  tape_.reset();
}

void Sequential::AddActivation(ActivationKind kind) {
  layers_.emplace_back(kind);
  tape_.reset();
}

Vector Sequential::Forward(std::span<const double> x) {
  Tape tape;
  tape.inputs.reserve(layers_.size());
  Vector h(x.begin(), x.end());
  for (const Layer& layer : layers_) {
    tape.inputs.push_back(h);
    if (const auto* p = std::get_if<LayerParams>(&layer)) {
      h = LinearForward(*p, h);
    } else {
      h = ActivationForward(std::get<ActivationKind>(layer), h);
    }
  }
  tape.output_dim = h.size();
  tape_ = std::move(tape);
  return h;
}

Vector Sequential::Evaluate(std::span<const double> x) const {
  Vector h(x.begin(), x.end());
  for (const Layer& layer : layers_) {
    if (const auto* p = std::get_if<LayerParams>(&layer)) {
      h = LinearForward(*p, h);
    } else {
      h = ActivationForward(std::get<ActivationKind>(layer), h);
    }
  }
  return h;
}

Vector Sequential::Backward(std::span<const double> grad_out) {
  if (!tape_) {
    throw StateError("backward called without a matching forward pass");
  }
  if (grad_out.size() != tape_->output_dim) {
    throw StateError("backward upstream gradient has length " +
                     std::to_string(grad_out.size()) +
                     " but the recorded forward produced " +
                     std::to_string(tape_->output_dim));
  }
  Vector g(grad_out.begin(), grad_out.end());
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const Vector& input = tape_->inputs[i];
    if (auto* p = std::get_if<LayerParams>(&layers_[i])) {
      g = LinearBackward(*p, input, g);
    } else {
      g = ActivationBackward(std::get<ActivationKind>(layers_[i]), input, g);
    }
  }
  tape_.reset();
  return g;
}

void Sequential::ZeroGrad() {
  for (Layer& layer : layers_) {
    if (auto* p = std::get_if<LayerParams>(&layer)) p->ZeroGrad();
  }
}

std::vector<ParamView> Sequential::Parameters(const std::string& prefix) {
  std::vector<ParamView> views;
  std::size_t index = 0;
  for (Layer& layer : layers_) {
    if (auto* p = std::get_if<LayerParams>(&layer)) {
      const std::string base = prefix + "linear" + std::to_string(index);
      views.push_back({base + ".weight", p->weight.values(),
                       p->grad_weight.values()});
      views.push_back({base + ".bias", p->bias, p->grad_bias});
      ++index;
    }
  }
  return views;
}

std::size_t Sequential::parameter_count() const {
  std::size_t n = 0;
  for (const Layer& layer : layers_) {
    if (const auto* p = std::get_if<LayerParams>(&layer))
      n += p->parameter_count();
  }
  return n;
}

std::size_t Sequential::input_dim() const {
  for (const Layer& layer : layers_) {
    if (const auto* p = std::get_if<LayerParams>(&layer)) return p->in_dim();
    // A leading activation does not fix the width.
    return 0;
  }
  return 0;
}

std::size_t Sequential::output_dim() const {
  std::size_t width = 0;
  for (const Layer& layer : layers_) {
    if (const auto* p = std::get_if<LayerParams>(&layer)) {
      width = p->out_dim();
    } else {
      width = ActivationOutputWidth(std::get<ActivationKind>(layer), width);
    }
  }
  return width;
}

}  // namespace slidetune
