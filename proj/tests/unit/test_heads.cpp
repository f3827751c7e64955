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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "slidetune/errors.hpp"
#include "slidetune/gradcheck.hpp"
#include "slidetune/model.hpp"

namespace slidetune {
namespace {

using testing::LVec;

SlideBag Bag(Matrix m) { return {"s", std::move(m)}; }

LVec ReferenceLogits(const SlideModel& model, const Matrix& f) {
  LVec rep;
  const ModelSpec& spec = model.spec();
  if (spec.aggregator.kind == AggregatorKind::kMean) {
    rep = testing::RefColumnMean(f);
  } else if (spec.aggregator.kind == AggregatorKind::kMax) {
    rep.assign(f.cols(), -INFINITY);
    for (std::size_t r = 0; r < f.rows(); ++r)
      for (std::size_t c = 0; c < f.cols(); ++c) rep[c] = std::max<long double>(rep[c], f(r, c));
  } else {
    auto* att = const_cast<SlideModel&>(model).attention();
    const GatedAttentionParams& p = att->params();
    LVec scores(f.rows());
    for (std::size_t i = 0; i < f.rows(); ++i) {
      long double s = 0;
      for (std::size_t j = 0; j < p.hidden(); ++j) {
        long double v = 0, u = 0;
        for (std::size_t c = 0; c < f.cols(); ++c) v += p.V(j, c) * (long double)f(i, c), u += p.U(j, c) * (long double)f(i, c);
        s += p.w[j] * std::tanh(v) / (1 + std::exp(-u));
      }
      scores[i] = s;
    }
    const LVec a = testing::RefSoftmax(scores);
    rep.assign(f.cols(), 0);
    for (std::size_t i = 0; i < f.rows(); ++i)
      for (std::size_t c = 0; c < f.cols(); ++c) rep[c] += a[i] * f(i, c);
  }
  LVec x = rep;
  for (const auto& layer : model.head().layers()) {
    if (const auto* lin = std::get_if<LayerParams>(&layer)) {
      x = testing::Affine(lin->weight, lin->bias, x);
    } else {
      const auto kind = std::get<ActivationKind>(layer);
      x = testing::RefActivation(kind == ActivationKind::kReLU   ? "relu"
                                 : kind == ActivationKind::kGeLU ? "gelu"
                                                                 : "swiglu",
                                 x);
    }
  }
  return x;
}

TEST(ModelSpec, ParameterCountGoldenValues) {
  EXPECT_EQ(ParameterCount(SpecForMethod("linear", 4, 3)), 15u);
  EXPECT_EQ(ParameterCount(SpecForMethod("simlp", 4, 3, {8, 256})), 67u);
  EXPECT_EQ(BuildModel(SpecForMethod("simlp", 4, 3, {8, 256}), 0).parameter_count(), 67u);
  // SwiGLU doubles the first layer: 4*16+16 + 8*3+3.
  EXPECT_EQ(ParameterCount(SpecForMethod("mean+swiglu", 4, 3, {8, 256})), 107u);
  // Gated attention: V, U (h x d) and w (h), plus the linear head.
  EXPECT_EQ(ParameterCount(SpecForMethod("abmil", 4, 3, {8, 5})), 5u * 4 * 2 + 5 + 15);
}

TEST(ModelSpec, MethodMapping) {
  const ModelSpec simlp = SpecForMethod("simlp", 64, 10);
  EXPECT_EQ(simlp.aggregator.kind, AggregatorKind::kMean);
  EXPECT_EQ(simlp.head, HeadKind::kMlp);
  EXPECT_EQ(simlp.activation, ActivationKind::kReLU);
  EXPECT_EQ(simlp.hidden_width, 512u);
  EXPECT_EQ(SpecForMethod("linear", 64, 10).head, HeadKind::kLinear);
  const ModelSpec abmil = SpecForMethod("abmil", 64, 10);
  EXPECT_EQ(abmil.aggregator.kind, AggregatorKind::kGatedAttention);
  EXPECT_EQ(abmil.aggregator.attention_hidden, 256u);
  EXPECT_EQ(SpecForMethod("max+gelu", 64, 10).aggregator.kind, AggregatorKind::kMax);
  EXPECT_EQ(SpecForMethod("max+gelu", 64, 10).activation, ActivationKind::kGeLU);
  EXPECT_THROW(SpecForMethod("diffmil", 64, 10), ConfigError);
}

TEST(ModelSpec, CanonicalTextRoundTrip) {
  for (const std::string& m : GradCheckMethods()) {
    const ModelSpec s = SpecForMethod(m, 17, 4, {33, 9});
    EXPECT_EQ(ModelSpec::FromCanonicalText(s.ToCanonicalText()), s) << m;
  }
}

TEST(ModelSpec, InvalidSpecsRejected) {
  EXPECT_THROW(BuildModel(SpecForMethod("simlp", 4, 1), 0), ConfigError);
  EXPECT_THROW(BuildModel(SpecForMethod("simlp", 0, 3), 0), ConfigError);
  EXPECT_THROW(BuildModel(SpecForMethod("simlp", 4, 3, {0, 256}), 0), ConfigError);
}

TEST(BuildModel, DeterministicAndBounded) {
  const ModelSpec spec = SpecForMethod("abmil", 12, 3, {16, 7});
  SlideModel a = BuildModel(spec, 42), b = BuildModel(spec, 42), c = BuildModel(spec, 43);
  EXPECT_EQ(SerializeCheckpoint(a), SerializeCheckpoint(b));
  EXPECT_NE(SerializeCheckpoint(a), SerializeCheckpoint(c));
  auto bounded = [](const Matrix& w) {
    const double limit = 1.0 / std::sqrt(static_cast<double>(w.cols()));
    for (double v : w.values()) EXPECT_LE(std::abs(v), limit);
  };
  bounded(a.attention()->params().V);
  bounded(a.attention()->params().U);
  for (const auto& layer : a.head().layers()) {
    const auto& lin = std::get<LayerParams>(layer);
    bounded(lin.weight);
    EXPECT_EQ(lin.bias, Vector(lin.out_dim(), 0.0));
  }
}

TEST(Forward, ZeroLinearHeadPredictsClassZero) {
  SlideModel model = BuildModel(SpecForMethod("linear", 3, 4), 0);
  for (const ParamView& p : model.Parameters())
    for (double& v : p.value) v = 0.0;
  const Prediction pred = model.Predict(Bag(Matrix::FromRows({{1, 2, 3}, {4, 5, 6}})));
  EXPECT_EQ(pred.logits, Vector(4, 0.0));
  EXPECT_EQ(pred.label, 0u);
}

TEST(Forward, MeanAggregatorEqualsMeanPatch) {
  std::mt19937_64 gen(6);
  SlideModel model = BuildModel(SpecForMethod("simlp", 5, 3, {10, 4}), 1);
  const Matrix f = testing::RandomMatrix(gen, 9, 5);
  const Vector mean = MeanPool(f);
  const Vector a = model.Forward(Bag(f));
  const Vector b = model.Forward(Bag(Matrix(1, 5, mean)));
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(a[k], b[k], 1e-14);
}

TEST(Forward, MatchesExtendedPrecisionReevaluation) {
  std::mt19937_64 gen(7);
  for (const std::string& m : GradCheckMethods()) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      SlideModel model = BuildModel(SpecForMethod(m, 6, 4, {12, 5}), seed);
      const Matrix f = testing::RandomMatrix(gen, 7, 6);
      const Vector logits = model.Forward(Bag(f));
      const LVec ref = ReferenceLogits(model, f);
      ASSERT_EQ(logits.size(), ref.size());
      for (std::size_t k = 0; k < ref.size(); ++k)
        EXPECT_NEAR(logits[k], static_cast<double>(ref[k]), 1e-10) << m;
    }
  }
}

TEST(Forward, DimMismatchIsShapeError) {
  SlideModel model = BuildModel(SpecForMethod("simlp", 5, 3, {8, 4}), 0);
  EXPECT_THROW(model.Forward(Bag(Matrix(3, 4))), ShapeError);
}

TEST(Predict, WorkedLogits) {
  EXPECT_EQ(PredictFromLogits(Vector{0, 0, 0}).label, 0u);
  const Prediction p = PredictFromLogits(Vector{1, 3, 2});
  EXPECT_EQ(p.label, 1u);
  double sum = 0;
  for (double v : p.probabilities) sum += v;
  EXPECT_NEAR(sum, 1.0, 1e-12);
  const Prediction q = PredictFromLogits(Vector{8, 10, 9});
  EXPECT_EQ(q.label, 1u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(p.probabilities[i], q.probabilities[i], 1e-12);
}

// Property: argmax survives shifts and positive scalings of the logits.
TEST(PredictProperty, MonotoneTransformKeepsClass) {
  std::mt19937_64 gen(31);
  std::uniform_real_distribution<double> shift(-100, 100), scale(0.01, 100);
  for (int trial = 0; trial < 500; ++trial) {
    const Vector z = testing::RandomMatrix(gen, 1, 2 + trial % 9, 3.0).data();
    const std::size_t label = PredictFromLogits(z).label;
    Vector t = z;
    const double a = scale(gen), b = shift(gen);
    for (double& v : t) v = a * v + b;
    EXPECT_EQ(PredictFromLogits(t).label, label);
  }
}

// Property: the linear probe is an affine map of the bag mean.
TEST(HeadProperty, LinearProbeIsAffineInMean) {
  std::mt19937_64 gen(12);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SlideModel model = BuildModel(SpecForMethod("linear", 8, 5), seed);
    auto& layer = std::get<LayerParams>(model.head().layers()[0]);
    layer.bias = testing::RandomMatrix(gen, 1, 5).data();
    const Matrix f = testing::RandomMatrix(gen, 3 + seed, 8);
    const LVec ref = testing::Affine(layer.weight, layer.bias, testing::RefColumnMean(f));
    const Vector z = model.Forward(Bag(f));
    for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(z[k], static_cast<double>(ref[k]), 1e-12);
  }
}

// Property: whole-model gradients, every method, five initializations.
TEST(ModelGradient, AllMethodsMatchFiniteDifferences) {
  for (const std::string& m : GradCheckMethods()) {
    const ModelGradCheckConfig config;
    const ModelSpec spec =
        SpecForMethod(m, config.input_dim, config.num_classes, {config.hidden_width, config.attention_hidden});
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const GradCheckReport r = CheckModelGradients(spec, seed, config);
      EXPECT_TRUE(r.passed) << m << " seed " << seed << " err " << r.max_rel_error;
      bool saw_input = false;
      for (const ParamCheck& p : r.params) saw_input |= p.name.rfind("input.bag", 0) == 0;
      EXPECT_TRUE(saw_input) << m;
    }
  }
}

TEST(Checkpoint, RoundTripIsBitwise) {
  for (const std::string& m : GradCheckMethods()) {
    SlideModel model = BuildModel(SpecForMethod(m, 6, 3, {8, 5}), 9);
    const std::string bytes = SerializeCheckpoint(model);
    SlideModel back = DeserializeCheckpoint(bytes);
    EXPECT_EQ(back.spec(), model.spec());
    EXPECT_EQ(SerializeCheckpoint(back), bytes) << m;
  }
}

TEST(Checkpoint, RejectsCorruption) {
  SlideModel model = BuildModel(SpecForMethod("simlp", 6, 3, {8, 5}), 9);
  const std::string bytes = SerializeCheckpoint(model);
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(DeserializeCheckpoint(bad_magic), FormatError);
  EXPECT_THROW(DeserializeCheckpoint(bytes.substr(0, bytes.size() - 3)), FormatError);
  EXPECT_THROW(DeserializeCheckpoint(bytes + "extra"), FormatError);
}

}  // namespace
}  // namespace slidetune
