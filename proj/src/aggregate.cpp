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

#include "slidetune/aggregate.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "slidetune/errors.hpp"

namespace slidetune {
namespace {

void RequireNonEmpty(const Matrix& features) {
  if (features.rows() == 0) {
    throw EmptyBagError("bag has no patches");
  }
}

void RequireNonEmpty(const SlideBag& bag) {
  if (bag.features.rows() == 0) {
    throw EmptyBagError("slide '" + bag.slide_id + "' has no patches");
  }
}

void CheckAttentionShapes(const GatedAttentionParams& params,
                          const SlideBag& bag) {
  RequireNonEmpty(bag);
  if (params.U.rows() != params.hidden() || params.U.cols() != params.input_dim() ||
      params.w.size() != params.hidden()) {
    throw ShapeError("gated attention parameters inconsistent: V " +
                     params.V.ShapeString() + ", U " + params.U.ShapeString() +
                     ", w " + ShapeString(params.w.size(), 1));
  }
  if (bag.dim() != params.input_dim()) {
    throw ShapeError("gated attention with V " + params.V.ShapeString() +
                     " applied to bag '" + bag.slide_id + "' of shape " +
                     bag.features.ShapeString());
  }
}

// Fills tanh(V p_i) and σ(U p_i) per patch and returns the softmax-normalized
// attention.
Vector AttentionWeights(const GatedAttentionParams& params,
                        const Matrix& features, Matrix& tanh_branch,
                        Matrix& gate_branch) {
  const std::size_t n = features.rows();
  const std::size_t h = params.hidden();
  const std::size_t d = params.input_dim();
  tanh_branch = Matrix(n, h);
  gate_branch = Matrix(n, h);
  Vector scores(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = features.row(i);
    double score = 0.0;
    for (std::size_t k = 0; k < h; ++k) {
      const auto v = params.V.row(k);
      const auto u = params.U.row(k);
      double zv = 0.0;
      double zu = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        zv += v[j] * p[j];
        zu += u[j] * p[j];
      }
      const double t = std::tanh(zv);
      const double g = Sigmoid(zu);
      tanh_branch(i, k) = t;
      gate_branch(i, k) = g;
      score += params.w[k] * t * g;
    }
    scores[i] = score;
  }
  return Softmax(scores);
}

Vector WeightedSum(const Matrix& features, std::span<const double> weights) {
  Vector s(features.cols(), 0.0);
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const auto p = features.row(i);
    for (std::size_t j = 0; j < s.size(); ++j) s[j] += weights[i] * p[j];
  }
  return s;
}

}  // namespace

const char* AggregatorName(AggregatorKind kind) {
  switch (kind) {
    case AggregatorKind::kMean: return "mean";
    case AggregatorKind::kMax: return "max";
    case AggregatorKind::kGatedAttention: return "gated_attention";
  }
  return "?";
}

AggregatorKind ParseAggregator(std::string_view name) {
  std::string n(name);
  std::transform(n.begin(), n.end(), n.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (n == "mean") return AggregatorKind::kMean;
  if (n == "max") return AggregatorKind::kMax;
  if (n == "gated_attention" || n == "abmil") return AggregatorKind::kGatedAttention;
  throw ConfigError("unknown aggregator '" + std::string(name) +
                    "' (expected mean, max or gated_attention)");
}

std::size_t AggregatorOutputDim(const AggregatorSpec& /*spec*/,
                                std::size_t input_dim) {
  return input_dim;
}

Vector MeanPool(const Matrix& features) {
  RequireNonEmpty(features);
  const std::size_t n = features.rows();
  Vector out(features.cols());
  std::vector<double> column(n);
  for (std::size_t j = 0; j < features.cols(); ++j) {
    for (std::size_t i = 0; i < n; ++i) column[i] = features(i, j);
    std::sort(column.begin(), column.end());
    double sum = 0.0;
    for (double v : column) sum += v;
    out[j] = sum / static_cast<double>(n);
  }
  return out;
}

Vector MeanPool(const SlideBag& bag) {
  RequireNonEmpty(bag);
  return MeanPool(bag.features);
}

Vector MaxPool(const Matrix& features) {
  RequireNonEmpty(features);
  Vector out(features.row(0).begin(), features.row(0).end());
  for (std::size_t i = 1; i < features.rows(); ++i) {
    const auto p = features.row(i);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = std::max(out[j], p[j]);
  }
  return out;
}

Vector MaxPool(const SlideBag& bag) {
  RequireNonEmpty(bag);
  return MaxPool(bag.features);
}

Matrix MeanPoolBackward(std::size_t num_patches,
                        std::span<const double> grad_out) {
  if (num_patches == 0) throw EmptyBagError("bag has no patches");
  Matrix g(num_patches, grad_out.size());
  const double scale = 1.0 / static_cast<double>(num_patches);
  for (std::size_t i = 0; i < num_patches; ++i) {
    auto row = g.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = grad_out[j] * scale;
  }
  return g;
}

Matrix MaxPoolBackward(const Matrix& features,
                       std::span<const double> grad_out) {
  RequireNonEmpty(features);
  if (grad_out.size() != features.cols()) {
    throw ShapeError("max pool backward: features " + features.ShapeString() +
                     ", upstream gradient " + ShapeString(grad_out.size(), 1));
  }
  Matrix g(features.rows(), features.cols());
  for (std::size_t j = 0; j < features.cols(); ++j) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < features.rows(); ++i) {
      if (features(i, j) > features(arg, j)) arg = i;
    }
    g(arg, j) = grad_out[j];
  }
  return g;
}

void GatedAttentionParams::ZeroGrad() {
  grad_V.Fill(0.0);
  grad_U.Fill(0.0);
  std::fill(grad_w.begin(), grad_w.end(), 0.0);
}

AttentionPooling GatedAttentionPool(const GatedAttentionParams& params,
                                    const SlideBag& bag) {
  CheckAttentionShapes(params, bag);
  Matrix tanh_branch;
  Matrix gate_branch;
  AttentionPooling out;
  out.attention = AttentionWeights(params, bag.features, tanh_branch, gate_branch);
  out.representation = WeightedSum(bag.features, out.attention);
  return out;
}

AttentionPooling GatedAttention::Forward(const SlideBag& bag) {
  CheckAttentionShapes(params_, bag);
  Tape tape;
  tape.features = bag.features;
  AttentionPooling out;
  out.attention = AttentionWeights(params_, bag.features, tape.tanh_branch,
                                   tape.gate_branch);
  out.representation = WeightedSum(bag.features, out.attention);
  tape.attention = out.attention;
  tape_ = std::move(tape);
  return out;
}

AttentionPooling GatedAttention::Evaluate(const SlideBag& bag) const {
  return GatedAttentionPool(params_, bag);
}

Matrix GatedAttention::Backward(std::span<const double> grad_representation,
                                bool want_input_grad) {
  if (!tape_) {
    throw StateError("gated attention backward without a matching forward");
  }
  const Tape& tape = *tape_;
  const Matrix& P = tape.features;
  const std::size_t n = P.rows();
  const std::size_t d = P.cols();
  const std::size_t h = params_.hidden();
  if (grad_representation.size() != d) {
    throw StateError("gated attention backward got gradient of length " +
                     std::to_string(grad_representation.size()) +
                     ", recorded representation has length " +
                     std::to_string(d));
  }

  // dL/da_i = <ds, p_i>; softmax Jacobian gives dL/de_i.
  Vector grad_attention(n, 0.0);
  double weighted = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = P.row(i);
    double dot = 0.0;
    for (std::size_t j = 0; j < d; ++j) dot += grad_representation[j] * p[j];
    grad_attention[i] = dot;
    weighted += tape.attention[i] * dot;
  }

  Matrix grad_input = want_input_grad ? Matrix(n, d) : Matrix();
  Vector dzv(h);
  Vector dzu(h);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = tape.attention[i];
    const double de = a * (grad_attention[i] - weighted);
    const auto p = P.row(i);
    if (want_input_grad) {
      auto gp = grad_input.row(i);
      for (std::size_t j = 0; j < d; ++j) gp[j] = a * grad_representation[j];
    }

    for (std::size_t k = 0; k < h; ++k) {
      const double t = tape.tanh_branch(i, k);
      const double g = tape.gate_branch(i, k);
      params_.grad_w[k] += de * t * g;
      dzv[k] = de * params_.w[k] * g * (1.0 - t * t);
      dzu[k] = de * params_.w[k] * t * g * (1.0 - g);
    }
    for (std::size_t k = 0; k < h; ++k) {
      auto gv = params_.grad_V.row(k);
      auto gu = params_.grad_U.row(k);
      const auto v = params_.V.row(k);
      const auto u = params_.U.row(k);
      for (std::size_t j = 0; j < d; ++j) {
        gv[j] += dzv[k] * p[j];
        gu[j] += dzu[k] * p[j];
      }
      if (want_input_grad) {
        auto gp = grad_input.row(i);
        for (std::size_t j = 0; j < d; ++j) gp[j] += v[j] * dzv[k] + u[j] * dzu[k];
      }
    }
  }
  tape_.reset();
  return grad_input;
}

std::vector<ParamView> GatedAttention::Parameters(const std::string& prefix) {
  return {
      {prefix + "attention.V", params_.V.values(), params_.grad_V.values()},
      {prefix + "attention.U", params_.U.values(), params_.grad_U.values()},
      {prefix + "attention.w", params_.w, params_.grad_w},
  };
}

}  // namespace slidetune
