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

#include "slidetune/synth.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "slidetune/errors.hpp"
#include "slidetune/rng.hpp"

namespace slidetune {
namespace {

constexpr std::uint64_t kCenterStream = 0xce47e5;
constexpr std::uint64_t kCohortStream = 0xc0407;
constexpr std::uint64_t kSlideStream = 0x511de;

Vector RandomUnitVector(std::size_t d, CounterRng& rng) {
  Vector v(d);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& x : v) {
      x = rng.Normal();
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

std::string ClassLabel(std::size_t c, std::size_t num_classes) {
  const int width = num_classes > 100 ? 3 : 2;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "class%0*zu", width, c);
  return buf;
}

std::string SlideId(const std::string& cohort, std::size_t c, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "-c%02zu-%04zu", c, i);
  return cohort + buf;
}

std::string Fmt(double v) { return FormatNumber(v); }

}  // namespace

void SynthConfig::Validate() const {
  if (task_name.empty()) throw ConfigError("synth task name is empty");
  if (num_classes < 2) {
    throw ConfigError("synth needs at least 2 classes, got " +
                      std::to_string(num_classes));
  }
  if (feature_dim == 0) throw ConfigError("synth feature_dim must be >= 1");
  if (!(informative_fraction > 0.0 && informative_fraction <= 1.0)) {
    throw ConfigError("informative_fraction must lie in (0, 1], got " +
                      Fmt(informative_fraction));
  }
  if (patches_min < 1 || patches_max < patches_min) {
    throw ConfigError("patch range must satisfy 1 <= min <= max, got [" +
                      std::to_string(patches_min) + ", " +
                      std::to_string(patches_max) + "]");
  }
  if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) {
    throw ConfigError("noise_scale must be finite and >= 0");
  }
  if (!(class_separation >= 0.0) || !std::isfinite(class_separation)) {
    throw ConfigError("class_separation must be finite and >= 0");
  }
  if (!std::isfinite(cohort_shift)) throw ConfigError("cohort_shift must be finite");
  if (train_per_class + test_per_class == 0) {
    throw ConfigError("synth needs at least one slide per class");
  }
  if (cohorts.empty()) throw ConfigError("synth needs at least one cohort");
  std::set<std::string> seen;
  for (const std::string& c : cohorts) {
    if (c.empty() || c.find_first_of("\t\n\r") != std::string::npos) {
      throw ConfigError("invalid cohort name '" + c + "'");
    }
    if (!seen.insert(c).second) throw ConfigError("cohort '" + c + "' listed twice");
  }
}

std::string SynthConfig::ToCanonicalText() const {
  std::ostringstream out;
  out << "task=" << task_name << " classes=" << num_classes
      << " dim=" << feature_dim << " train_per_class=" << train_per_class
      << " test_per_class=" << test_per_class << " patches=[" << patches_min
      << "," << patches_max << "] separation=" << Fmt(class_separation)
      << " noise=" << Fmt(noise_scale)
      << " informative=" << Fmt(informative_fraction)
      << " cohort_shift=" << Fmt(cohort_shift) << " cohorts=";
  for (std::size_t i = 0; i < cohorts.size(); ++i) out << (i ? "," : "") << cohorts[i];
  out << " seed=" << seed << " dtype=" << DtypeName(dtype);
  return out.str();
}

std::size_t InformativePatchCount(double informative_fraction,
                                  std::size_t num_patches) {
  // The epsilon keeps exact products such as 0.1 * 30 from rounding up.
  const double raw = informative_fraction * static_cast<double>(num_patches);
  const auto count = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::min(num_patches, std::max<std::size_t>(count, 1));
}

SyntheticCorpus GenerateSyntheticCorpus(const SynthConfig& config) {
  config.Validate();
  const std::size_t d = config.feature_dim;
  const std::size_t num_classes = config.num_classes;

  SyntheticCorpus corpus;
  corpus.class_centers = Matrix(num_classes, d);
  for (std::size_t c = 0; c < num_classes; ++c) {
    CounterRng rng(config.seed, StreamKey({kCenterStream, c}));
    const Vector mu = RandomUnitVector(d, rng);
    std::copy(mu.begin(), mu.end(), corpus.class_centers.row(c).begin());
  }
  corpus.cohort_offsets = Matrix(config.cohorts.size(), d);
  for (std::size_t j = 1; j < config.cohorts.size(); ++j) {
    CounterRng rng(config.seed, StreamKey({kCohortStream, j}));
    const Vector u = RandomUnitVector(d, rng);
    for (std::size_t k = 0; k < d; ++k)
      corpus.cohort_offsets(j, k) = config.cohort_shift * u[k];
  }

  DatasetManifest& m = corpus.manifest;
  m.task_name = config.task_name;
  m.feature_dim = d;
  for (std::size_t c = 0; c < num_classes; ++c) m.classes.push_back(ClassLabel(c, num_classes));

  const std::size_t per_class = config.train_per_class + config.test_per_class;
  const std::size_t span = config.patches_max - config.patches_min + 1;
  for (std::size_t j = 0; j < config.cohorts.size(); ++j) {
    const std::string& cohort = config.cohorts[j];
    const auto offset = corpus.cohort_offsets.row(j);
    for (std::size_t c = 0; c < num_classes; ++c) {
      const auto mu = corpus.class_centers.row(c);
      for (std::size_t i = 0; i < per_class; ++i) {
        CounterRng rng(config.seed, StreamKey({kSlideStream, j, c, i}));
        const std::size_t n = config.patches_min + rng.UniformIndex(span);
        const std::size_t informative =
            InformativePatchCount(config.informative_fraction, n);
        Matrix features(n, d);
        for (std::size_t p = 0; p < n; ++p) {
          const double signal = p < informative ? config.class_separation : 0.0;
          auto row = features.row(p);
          for (std::size_t k = 0; k < d; ++k) {
            row[k] = signal * mu[k] + config.noise_scale * rng.Normal() + offset[k];
          }
        }
        ManifestEntry e;
        e.slide_id = SlideId(cohort, c, i);
        e.label = m.classes[c];
        e.cohort = cohort;
        e.split = i < config.train_per_class ? Split::kTrain : Split::kTest;
        e.path = "embeddings/" + e.slide_id + ".emb";
        corpus.bags.push_back({e.slide_id, std::move(features)});
        m.entries.push_back(std::move(e));
      }
    }
  }
  ValidateManifest(m);
  return corpus;
}

DatasetManifest WriteSyntheticCorpus(const SyntheticCorpus& corpus,
                                     const std::filesystem::path& out_dir,
                                     EmbeddingDtype dtype) {
  std::filesystem::create_directories(out_dir / "embeddings");
  DatasetManifest m = corpus.manifest;
  m.base_dir = out_dir;
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    WriteEmbedding(m.EmbeddingPath(m.entries[i]), corpus.bags[i].features, dtype);
  }
  SaveManifest(out_dir / kManifestFileName, m);
  return m;
}

}  // namespace slidetune
