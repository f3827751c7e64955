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

#include "slidetune/model.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include "byteio.hpp"
#include "slidetune/errors.hpp"
#include "slidetune/rng.hpp"

namespace slidetune {
namespace {

constexpr std::uint64_t kInitStream = 0x1a17;

std::size_t ParseCount(std::string_view key, std::string_view value) {
  std::size_t out = 0;
  const auto [ptr, ec] =
      std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("model spec field '" + std::string(key) +
                      "' is not a count: '" + std::string(value) + "'");
  }
  return out;
}

HeadKind ParseHead(std::string_view name) {
  if (name == "linear") return HeadKind::kLinear;
  if (name == "mlp") return HeadKind::kMlp;
  throw ConfigError("unknown head '" + std::string(name) +
                    "' (expected linear or mlp)");
}

void InitUniform(std::span<double> values, std::size_t fan_in,
                 std::uint64_t seed, std::uint64_t tensor_index) {
  CounterRng rng(seed, StreamKey({kInitStream, tensor_index}));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : values) v = rng.Uniform(-bound, bound);
}

}  // namespace

const char* HeadName(HeadKind kind) {
  return kind == HeadKind::kLinear ? "linear" : "mlp";
}

void ModelSpec::Validate() const {
  if (num_classes < 2) {
    throw ConfigError("model spec needs at least 2 classes, got " +
                      std::to_string(num_classes));
  }
  if (input_dim == 0) throw ConfigError("model spec input_dim must be >= 1");
  if (head == HeadKind::kMlp && hidden_width == 0) {
    throw ConfigError("mlp head hidden_width must be >= 1");
  }
  if (aggregator.kind == AggregatorKind::kGatedAttention &&
      aggregator.attention_hidden == 0) {
    throw ConfigError("gated attention hidden width must be >= 1");
  }
}

std::string ModelSpec::ToCanonicalText() const {
  std::ostringstream out;
  out << "aggregator=" << AggregatorName(aggregator.kind)
      << " attention_hidden=" << aggregator.attention_hidden
      << " head=" << HeadName(head) << " hidden_width=" << hidden_width
      << " activation=" << ActivationName(activation)
      << " input_dim=" << input_dim << " num_classes=" << num_classes;
  return out.str();
}

ModelSpec ModelSpec::FromCanonicalText(std::string_view text) {
  std::map<std::string, std::string, std::less<>> fields;
  std::size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos])))
      ++pos;
    if (pos >= text.size()) break;
    std::size_t end = pos;
    while (end < text.size() && !std::isspace(static_cast<unsigned char>(text[end])))
      ++end;
    const std::string_view token = text.substr(pos, end - pos);
    const auto eq = token.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("model spec token '" + std::string(token) +
                        "' is not key=value");
    }
    fields[std::string(token.substr(0, eq))] = std::string(token.substr(eq + 1));
    pos = end;
  }
  auto take = [&](const char* key) -> std::string {
    auto it = fields.find(key);
    if (it == fields.end()) {
      throw ConfigError(std::string("model spec is missing '") + key + "'");
    }
    std::string v = it->second;
    fields.erase(it);
    return v;
  };
  ModelSpec spec;
  spec.aggregator.kind = ParseAggregator(take("aggregator"));
  spec.aggregator.attention_hidden =
      ParseCount("attention_hidden", take("attention_hidden"));
  spec.head = ParseHead(take("head"));
  spec.hidden_width = ParseCount("hidden_width", take("hidden_width"));
  spec.activation = ParseActivation(take("activation"));
  spec.input_dim = ParseCount("input_dim", take("input_dim"));
  spec.num_classes = ParseCount("num_classes", take("num_classes"));
  if (!fields.empty()) {
    throw ConfigError("model spec has unknown field '" + fields.begin()->first +
                      "'");
  }
  spec.Validate();
  return spec;
}

ModelSpec SpecForMethod(std::string_view method, std::size_t input_dim,
                        std::size_t num_classes, const MethodOptions& options) {
  std::string m(method);
  std::transform(m.begin(), m.end(), m.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  ModelSpec spec;
  spec.input_dim = input_dim;
  spec.num_classes = num_classes;
  spec.hidden_width = options.hidden_width;
  spec.aggregator.attention_hidden = options.attention_hidden;

  if (m == "simlp") {
    spec.aggregator.kind = AggregatorKind::kMean;
    spec.head = HeadKind::kMlp;
    spec.activation = ActivationKind::kReLU;
  } else if (m == "linear") {
    spec.aggregator.kind = AggregatorKind::kMean;
    spec.head = HeadKind::kLinear;
  } else if (m == "abmil") {
    spec.aggregator.kind = AggregatorKind::kGatedAttention;
    spec.head = HeadKind::kLinear;
  } else if (const auto plus = m.find('+'); plus != std::string::npos) {
    const std::string pool = m.substr(0, plus);
    const std::string rest = m.substr(plus + 1);
    if (pool != "mean" && pool != "max") {
      throw ConfigError("unknown method '" + std::string(method) + "'");
    }
    spec.aggregator.kind = ParseAggregator(pool);
    if (rest == "linear") {
      spec.head = HeadKind::kLinear;
    } else {
      spec.head = HeadKind::kMlp;
      spec.activation = ParseActivation(rest);
    }
  } else {
    throw ConfigError("unknown method '" + std::string(method) +
                      "' (expected simlp, linear, abmil, mean+<act>, "
                      "max+<act>)");
  }
  spec.Validate();
  return spec;
}

std::size_t ParameterCount(const ModelSpec& spec) {
  spec.Validate();
  const std::size_t d = spec.input_dim;
  const std::size_t k = spec.num_classes;
  std::size_t n = 0;
  if (spec.aggregator.kind == AggregatorKind::kGatedAttention) {
    const std::size_t h = spec.aggregator.attention_hidden;
    n += 2 * h * d + h;
  }
  if (spec.head == HeadKind::kLinear) {
    n += d * k + k;
  } else {
    const std::size_t first = ActivationInputWidth(spec.activation, spec.hidden_width);
    n += d * first + first + spec.hidden_width * k + k;
  }
  return n;
}

std::size_t ArgMax(std::span<const double> values) {
  if (values.empty()) throw ShapeError("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

Prediction PredictFromLogits(std::span<const double> logits) {
  Prediction p;
  p.label = ArgMax(logits);
  p.probabilities = Softmax(logits);
  p.logits.assign(logits.begin(), logits.end());
  return p;
}

SlideModel::SlideModel(const ModelSpec& spec) : spec_(spec) {
  spec_.Validate();
  const std::size_t d = spec_.input_dim;
  if (spec_.aggregator.kind == AggregatorKind::kGatedAttention) {
    attention_.emplace(
        GatedAttentionParams(spec_.aggregator.attention_hidden, d));
  }
  if (spec_.head == HeadKind::kLinear) {
    head_.AddLinear(LayerParams(spec_.num_classes, d));
  } else {
    const std::size_t first =
        ActivationInputWidth(spec_.activation, spec_.hidden_width);
    head_.AddLinear(LayerParams(first, d));
    head_.AddActivation(spec_.activation);
    head_.AddLinear(LayerParams(spec_.num_classes, spec_.hidden_width));
  }
}

Vector SlideModel::Pool(const SlideBag& bag) const {
  if (bag.dim() != spec_.input_dim) {
    throw ShapeError("model expects feature dim " +
                     std::to_string(spec_.input_dim) + " but slide '" +
                     bag.slide_id + "' has shape " + bag.features.ShapeString());
  }
  switch (spec_.aggregator.kind) {
    case AggregatorKind::kMean: return MeanPool(bag);
    case AggregatorKind::kMax: return MaxPool(bag);
    case AggregatorKind::kGatedAttention:
      return attention_->Evaluate(bag).representation;
  }
  return {};
}

Vector SlideModel::HeadLogits(std::span<const double> representation) const {
  return head_.Evaluate(representation);
}

Vector SlideModel::Forward(const SlideBag& bag) const {
  return HeadLogits(Pool(bag));
}

Prediction SlideModel::Predict(const SlideBag& bag) const {
  return PredictFromLogits(Forward(bag));
}

double SlideModel::LossAndBackward(const SlideBag& bag, std::size_t target,
                                   Matrix* grad_features) {
  if (bag.dim() != spec_.input_dim) {
    throw ShapeError("model expects feature dim " +
                     std::to_string(spec_.input_dim) + " but slide '" +
                     bag.slide_id + "' has shape " + bag.features.ShapeString());
  }
  Vector rep;
  if (attention_) {
    rep = attention_->Forward(bag).representation;
  } else {
    rep = Pool(bag);
  }
  const Vector logits = head_.Forward(rep);
  const LossAndGrad lg = SoftmaxCrossEntropy(logits, target);
  const Vector grad_rep = head_.Backward(lg.grad_logits);

  if (attention_) {
    Matrix g = attention_->Backward(grad_rep, grad_features != nullptr);
    if (grad_features) *grad_features = std::move(g);
  } else if (grad_features) {
    *grad_features = spec_.aggregator.kind == AggregatorKind::kMean
                         ? MeanPoolBackward(bag.num_patches(), grad_rep)
                         : MaxPoolBackward(bag.features, grad_rep);
  }
  return lg.loss;
}

double SlideModel::LossAndBackwardPooled(std::span<const double> representation,
                                         std::size_t target) {
  if (attention_) {
    throw StateError(
        "pooled training path is only valid for parameter-free aggregators");
  }
  const Vector logits = head_.Forward(representation);
  const LossAndGrad lg = SoftmaxCrossEntropy(logits, target);
  head_.Backward(lg.grad_logits);
  return lg.loss;
}

void SlideModel::ZeroGrad() {
  if (attention_) attention_->ZeroGrad();
  head_.ZeroGrad();
}

std::vector<ParamView> SlideModel::Parameters() {
  std::vector<ParamView> views;
  if (attention_) views = attention_->Parameters("");
  for (ParamView& v : head_.Parameters("head.")) views.push_back(std::move(v));
  return views;
}

std::size_t SlideModel::parameter_count() const {
  std::size_t n = head_.parameter_count();
  if (attention_) n += attention_->params().parameter_count();
  return n;
}

SlideModel BuildModel(const ModelSpec& spec, std::uint64_t seed) {
  SlideModel model(spec);
  std::uint64_t tensor = 0;
  if (GatedAttention* att = model.attention()) {
    GatedAttentionParams& p = att->params();
    InitUniform(p.V.values(), p.input_dim(), seed, tensor++);
    InitUniform(p.U.values(), p.input_dim(), seed, tensor++);
    InitUniform(p.w, p.hidden(), seed, tensor++);
  }
  for (auto& layer : model.head().layers()) {
    if (auto* lp = std::get_if<LayerParams>(&layer)) {
      InitUniform(lp->weight.values(), lp->in_dim(), seed, tensor++);
      std::fill(lp->bias.begin(), lp->bias.end(), 0.0);
    }
  }
  return model;
}

std::string SerializeCheckpoint(SlideModel& model) {
  internal::ByteWriter w;
  w.PutBytes(kCheckpointMagic);
  w.PutU8(kCheckpointVersion);
  const std::string spec = model.spec().ToCanonicalText();
  w.PutU32(static_cast<std::uint32_t>(spec.size()));
  w.PutBytes(spec);
  const std::vector<ParamView> params = model.Parameters();
  w.PutU32(static_cast<std::uint32_t>(params.size()));
  for (const ParamView& p : params) {
    w.PutU32(static_cast<std::uint32_t>(p.name.size()));
    w.PutBytes(p.name);
    w.PutU64(p.value.size());
    for (double v : p.value) w.PutF64(v);
  }
  return w.Release();
}

SlideModel DeserializeCheckpoint(std::string_view bytes) {
  internal::ByteReader r(bytes);
  const std::string_view magic = r.Bytes(kCheckpointMagic.size(), "checkpoint magic");
  if (magic != kCheckpointMagic) {
    throw FormatError("bad checkpoint magic", 0);
  }
  const std::uint64_t version_at = r.offset();
  const std::uint8_t version = r.U8("checkpoint version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version),
                      version_at);
  }
  const std::uint32_t spec_len = r.U32("spec length");
  const std::uint64_t spec_at = r.offset();
  const std::string_view spec_text = r.Bytes(spec_len, "model spec");
  ModelSpec spec;
  try {
    spec = ModelSpec::FromCanonicalText(spec_text);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("invalid model spec in checkpoint: ") + e.what(),
                      spec_at);
  }

  SlideModel model(spec);
  std::vector<ParamView> params = model.Parameters();
  const std::uint64_t count_at = r.offset();
  const std::uint32_t count = r.U32("tensor count");
  if (count != params.size()) {
    throw FormatError("checkpoint holds " + std::to_string(count) +
                          " tensors, spec implies " +
                          std::to_string(params.size()),
                      count_at);
  }
  for (ParamView& p : params) {
    const std::uint32_t name_len = r.U32("tensor name length");
    const std::uint64_t name_at = r.offset();
    const std::string_view name = r.Bytes(name_len, "tensor name");
    if (name != p.name) {
      throw FormatError("expected tensor '" + p.name + "', found '" +
                            std::string(name) + "'",
                        name_at);
    }
    const std::uint64_t len_at = r.offset();
    const std::uint64_t len = r.U64("tensor length");
    if (len != p.value.size()) {
      throw FormatError("tensor '" + p.name + "' has " + std::to_string(len) +
                            " values, expected " + std::to_string(p.value.size()),
                        len_at);
    }
    r.Require(len * 8, "tensor payload");
    for (double& v : p.value) {
      const std::uint64_t at = r.offset();
      v = r.F64("tensor value");
      if (!std::isfinite(v)) {
        throw FormatError("non-finite value in tensor '" + p.name + "'", at);
      }
    }
  }
  if (r.remaining() != 0) {
    throw FormatError("trailing bytes after checkpoint payload", r.offset());
  }
  return model;
}

void SaveCheckpoint(const std::filesystem::path& path, SlideModel& model) {
  internal::WriteFileBytes(path, SerializeCheckpoint(model));
}

SlideModel LoadCheckpoint(const std::filesystem::path& path) {
  return DeserializeCheckpoint(internal::ReadFileBytes(path));
}

}  // namespace slidetune
