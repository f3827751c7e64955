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
#include <limits>
#include <random>

#include "oracles.hpp"
#include "slidetune/errors.hpp"
#include "slidetune/metrics.hpp"
#include "slidetune/model.hpp"
#include "slidetune/optim.hpp"

namespace slidetune {
namespace {

struct Tensor {
  Vector value;
  Vector grad;
  std::vector<ParamView> View(const std::string& name = "theta") {
    return {{name, value, grad}};
  }
};

// Two well separated classes along the first axis.
std::vector<SlideBag> SeparableBags(std::mt19937_64& gen, std::size_t per_class, std::size_t d) {
  std::vector<SlideBag> bags;
  std::normal_distribution<double> noise(0.0, 0.5);
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      Matrix f(6, d);
      for (std::size_t r = 0; r < 6; ++r)
        for (std::size_t j = 0; j < d; ++j) f(r, j) = noise(gen) + (j == 0 ? (c ? 3.0 : -3.0) : 0.0);
      bags.push_back({"s" + std::to_string(bags.size()), f});
    }
  }
  return bags;
}

std::vector<LabeledSlide> Label(const std::vector<SlideBag>& bags) {
  std::vector<LabeledSlide> out;
  for (std::size_t i = 0; i < bags.size(); ++i) out.push_back({&bags[i], i * 2 / bags.size()});
  return out;
}

TEST(TrainConfig, DefaultsAndValidation) {
  const TrainConfig c;
  EXPECT_EQ(c.learning_rate, 1e-4);
  EXPECT_EQ(c.beta1, 0.9);
  EXPECT_EQ(c.beta2, 0.98);
  EXPECT_EQ(c.weight_decay, 1e-4);
  EXPECT_EQ(c.epsilon, 1e-8);
  EXPECT_EQ(c.epochs, 20u);
  EXPECT_EQ(c.batch_size, 1u);
  EXPECT_NO_THROW(c.Validate());
  TrainConfig bad = c;
  bad.beta1 = 1.0;
  EXPECT_THROW(bad.Validate(), ConfigError);
  bad = c;
  bad.learning_rate = 0.0;
  EXPECT_THROW(bad.Validate(), ConfigError);
  bad = c;
  bad.beta2 = -0.1;
  EXPECT_THROW(bad.Validate(), ConfigError);
}

TEST(AdamW, FirstStepByHand) {
  Tensor t{{0.0}, {1.0}};
  OptimizerState state;
  AdamWStep(t.View(), state, TrainConfig{});
  EXPECT_NEAR(t.value[0], -1e-4 * (1.0 / (1.0 + 1e-8)), 1e-18);
  EXPECT_EQ(state.step, 1u);
}

TEST(AdamW, FixedPoints) {
  Tensor zero{{0.0, 0.0}, {0.0, 0.0}};
  OptimizerState s1;
  AdamWStep(zero.View(), s1, TrainConfig{});
  EXPECT_EQ(zero.value, (Vector{0.0, 0.0}));

  Tensor any{{1.5, -2.25}, {0.0, 0.0}};
  TrainConfig no_decay;
  no_decay.weight_decay = 0.0;
  OptimizerState s2;
  for (int i = 0; i < 3; ++i) AdamWStep(any.View(), s2, no_decay);
  EXPECT_EQ(any.value, (Vector{1.5, -2.25}));
  EXPECT_EQ(s2.step, 3u);
}

TEST(AdamW, NonFiniteGradientNamesParameterAndLeavesValues) {
  Tensor a{{1.0, 2.0}, {0.5, 0.5}};
  Tensor b{{3.0}, {std::numeric_limits<double>::quiet_NaN()}};
  std::vector<ParamView> views{{"head.0.weight", a.value, a.grad}, {"head.0.bias", b.value, b.grad}};
  OptimizerState state;
  try {
    AdamWStep(views, state, TrainConfig{});
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("head.0.bias"), std::string::npos) << e.what();
  }
  EXPECT_EQ(a.value, (Vector{1.0, 2.0}));
  EXPECT_EQ(b.value, (Vector{3.0}));
}

// Property: with no decay, AdamW follows an independent Adam reference.
TEST(AdamWProperty, NoDecayMatchesAdamReference) {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> n(0.0, 1.0);
  TrainConfig config;
  config.weight_decay = 0.0;
  config.learning_rate = 1e-2;
  for (int trial = 0; trial < 20; ++trial) {
    Tensor t{Vector(7), Vector(7)};
    for (double& v : t.value) v = n(gen);
    std::vector<long double> theta(t.value.begin(), t.value.end()), m(7, 0), v(7, 0);
    OptimizerState state;
    for (int step = 1; step <= 50; ++step) {
      for (double& g : t.grad) g = n(gen);
      AdamWStep(t.View(), state, config);
      for (std::size_t i = 0; i < 7; ++i) {
        const long double g = t.grad[i];
        m[i] = 0.9L * m[i] + 0.1L * g;
        v[i] = 0.98L * v[i] + 0.02L * g * g;
        const long double mh = m[i] / (1 - std::pow(0.9L, step));
        const long double vh = v[i] / (1 - std::pow(0.98L, step));
        theta[i] -= 1e-2L * mh / (std::sqrt(vh) + 1e-8L);
      }
    }
    for (std::size_t i = 0; i < 7; ++i) EXPECT_NEAR(t.value[i], static_cast<double>(theta[i]), 1e-12);
  }
}

TEST(Train, ZeroEpochsLeavesModelUnchanged) {
  std::mt19937_64 gen(1);
  const auto bags = SeparableBags(gen, 4, 5);
  SlideModel model = BuildModel(SpecForMethod("simlp", 5, 2, {8, 4}), 3);
  const std::string before = SerializeCheckpoint(model);
  TrainConfig config;
  config.epochs = 0;
  const TrainResult r = Train(model, Label(bags), config);
  EXPECT_EQ(SerializeCheckpoint(model), before);
  EXPECT_EQ(r.steps, 0u);
}

TEST(Train, SameSeedIsBitwiseReproducible) {
  std::mt19937_64 gen(2);
  const auto bags = SeparableBags(gen, 5, 5);
  for (const char* m : {"simlp", "abmil", "max+swiglu"}) {
    TrainConfig config;
    config.epochs = 3;
    config.seed = 11;
    SlideModel a = BuildModel(SpecForMethod(m, 5, 2, {8, 4}), 0);
    SlideModel b = BuildModel(SpecForMethod(m, 5, 2, {8, 4}), 0);
    const TrainResult ra = Train(a, Label(bags), config);
    const TrainResult rb = Train(b, Label(bags), config);
    EXPECT_EQ(SerializeCheckpoint(a), SerializeCheckpoint(b)) << m;
    EXPECT_EQ(ra.trace.back().mean_loss, rb.trace.back().mean_loss) << m;
  }
}

TEST(Train, StepCountIsEpochsTimesSlides) {
  std::mt19937_64 gen(3);
  const auto bags = SeparableBags(gen, 6, 4);
  SlideModel model = BuildModel(SpecForMethod("linear", 4, 2), 0);
  TrainConfig config;
  config.epochs = 7;
  const TrainResult r = Train(model, Label(bags), config);
  EXPECT_EQ(r.steps, 7u * 12u);
  ASSERT_EQ(r.trace.size(), 7u);
  for (std::size_t e = 0; e < 7; ++e) EXPECT_EQ(r.trace[e].epoch, e);
}

TEST(Train, RejectsEmptySplitAndBatchSize) {
  SlideModel model = BuildModel(SpecForMethod("linear", 4, 2), 0);
  EXPECT_THROW(Train(model, std::vector<LabeledSlide>{}, TrainConfig{}), ConfigError);
  std::mt19937_64 gen(3);
  const auto bags = SeparableBags(gen, 2, 4);
  TrainConfig config;
  config.batch_size = 4;
  EXPECT_THROW(Train(model, Label(bags), config), ConfigError);
}

TEST(Train, SeparableCorpusLinearProbeFitsTrainSplit) {
  std::mt19937_64 gen(4);
  const auto bags = SeparableBags(gen, 25, 8);
  const auto split = Label(bags);
  // Oracle first: nearest class centroid of bag means.
  Vector centroid[2] = {Vector(8, 0.0), Vector(8, 0.0)};
  for (const auto& s : split) {
    const Vector m = MeanPool(*s.bag);
    for (std::size_t j = 0; j < 8; ++j) centroid[s.label][j] += m[j] / 25.0;
  }
  std::vector<std::size_t> labels, oracle;
  for (const auto& s : split) {
    const Vector m = MeanPool(*s.bag);
    double d[2] = {0, 0};
    for (int c = 0; c < 2; ++c)
      for (std::size_t j = 0; j < 8; ++j) d[c] += (m[j] - centroid[c][j]) * (m[j] - centroid[c][j]);
    labels.push_back(s.label);
    oracle.push_back(d[1] < d[0] ? 1 : 0);
  }
  ASSERT_EQ(BalancedAccuracy(labels, oracle, 2).value, 1.0);

  SlideModel model = BuildModel(SpecForMethod("linear", 8, 2), 0);
  TrainOptions options;
  options.track_train_accuracy = true;
  const TrainResult r = Train(model, split, TrainConfig{}, options);
  ASSERT_TRUE(r.trace.back().train_balanced_accuracy.has_value());
  EXPECT_EQ(*r.trace.back().train_balanced_accuracy, 1.0);
  std::vector<std::size_t> preds;
  for (const auto& s : split) preds.push_back(model.Predict(*s.bag).label);
  EXPECT_EQ(BalancedAccuracy(labels, preds, 2).value, 1.0);
}

// Property: one epoch on a single slide lowers that slide's loss.
TEST(TrainProperty, SingleSlideEpochReducesLoss) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 gen(seed + 500);
    const SlideBag bag{"one", testing::RandomMatrix(gen, 5, 6)};
    SlideModel model = BuildModel(SpecForMethod("mean+gelu", 6, 3, {16, 4}), seed);
    const std::size_t target = seed % 3;
    const double before = SoftmaxCrossEntropy(model.Forward(bag), target).loss;
    TrainConfig config;
    config.epochs = 1;
    Train(model, std::vector<LabeledSlide>{{&bag, target}}, config);
    const double after = SoftmaxCrossEntropy(model.Forward(bag), target).loss;
    EXPECT_LT(after, before) << "seed " << seed;
  }
}

TEST(LossTrace, CsvLayout) {
  std::vector<EpochStats> trace{{1, 0.5, std::nullopt}, {2, 0.25, 0.75}};
  EXPECT_EQ(LossTraceCsv(trace), "epoch,mean_loss,train_bal_acc\n1,0.5,\n2,0.25,0.75\n");
}

}  // namespace
}  // namespace slidetune
