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

#include "slidetune/sampling.hpp"

#include <algorithm>

#include "slidetune/errors.hpp"
#include "slidetune/rng.hpp"

namespace slidetune {
namespace {
constexpr std::uint64_t kFewShotStream = 0xf35407;
}  // namespace

FewShotSelection FewShotSample(const DatasetManifest& manifest, std::size_t k,
                               std::uint64_t seed) {
  if (k == 0) throw ConfigError("few-shot K must be >= 1");
  const std::size_t num_classes = manifest.classes.size();
  std::vector<std::vector<std::size_t>> per_class(num_classes);
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    if (manifest.entries[i].split == Split::kTrain) {
      per_class[manifest.LabelIndex(i)].push_back(i);
    }
  }

  FewShotSelection out;
  for (std::size_t c = 0; c < num_classes; ++c) {
    std::vector<std::size_t>& pool = per_class[c];
    if (pool.empty()) {
      throw ConfigError("class '" + manifest.classes[c] +
                        "' has no train slides to sample from");
    }
    CounterRng rng(seed, StreamKey({kFewShotStream, c}));
    Shuffle(pool, rng);
    const std::size_t take = std::min(k, pool.size());
    if (take < k) {
      out.warnings.push_back("class '" + manifest.classes[c] + "' has only " +
                             std::to_string(pool.size()) +
                             " train slides; K=" + std::to_string(k) +
                             " clamped to " + std::to_string(take));
    }
    out.indices.insert(out.indices.end(), pool.begin(), pool.begin() + take);
  }
  return out;
}

TransferSplits SplitByCohort(const DatasetManifest& manifest,
                             const std::string& train_cohort,
                             const std::vector<std::string>& test_cohorts) {
  const std::vector<std::string> cohorts = manifest.Cohorts();
  auto require = [&](const std::string& name) {
    if (std::find(cohorts.begin(), cohorts.end(), name) == cohorts.end()) {
      throw ConfigError("unknown cohort '" + name + "'");
    }
  };
  require(train_cohort);
  for (const std::string& c : test_cohorts) require(c);

  TransferSplits out;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const ManifestEntry& e = manifest.entries[i];
    if (e.cohort == train_cohort && e.split == Split::kTrain) out.train.push_back(i);
  }
  if (out.train.empty()) {
    throw ConfigError("cohort '" + train_cohort + "' has no train slides");
  }
  for (const std::string& cohort : test_cohorts) {
    CohortTestSet set;
    set.cohort = cohort;
    set.internal = cohort == train_cohort;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
      const ManifestEntry& e = manifest.entries[i];
      if (e.cohort != cohort) continue;
      if (set.internal && e.split != Split::kTest) continue;
      set.indices.push_back(i);
    }
    if (set.indices.empty()) {
      throw ConfigError("cohort '" + cohort + "' has no test slides");
    }
    out.tests.push_back(std::move(set));
  }
  return out;
}

}  // namespace slidetune
