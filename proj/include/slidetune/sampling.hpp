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

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "slidetune/dataset.hpp"

namespace slidetune {

struct FewShotSelection {
  std::vector<std::size_t> indices;   // manifest entry indices
  std::vector<std::string> warnings;  // one per clamped class
};

// Picks min(K, class size) train slides per class. Each class's train slides
// are shuffled with a stream keyed by (seed, class) and the first K taken,
// so for a fixed seed the K=5 sample contains the K=1 sample.
// Throws ConfigError for K == 0 or a class without train slides.
FewShotSelection FewShotSample(const DatasetManifest& manifest, std::size_t k,
                               std::uint64_t seed);

struct CohortTestSet {
  std::string cohort;
  bool internal = false;  // the training cohort's own test split
  std::vector<std::size_t> indices;
};

struct TransferSplits {
  std::vector<std::size_t> train;
  std::vector<CohortTestSet> tests;
};

// Train on the train split of `train_cohort`. A test cohort equal to the
// training cohort contributes its test split; any other cohort contributes
// all of its slides. Throws ConfigError for unknown cohorts or an empty
// training set.
TransferSplits SplitByCohort(const DatasetManifest& manifest,
                             const std::string& train_cohort,
                             const std::vector<std::string>& test_cohorts);

}  // namespace slidetune
