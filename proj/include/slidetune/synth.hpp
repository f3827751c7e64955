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

// Synthetic bag corpora standing in for foundation-model patch features.
//
// Each class c has a unit-norm center μ_c. A slide of class c with n patches
// has ⌈ρ n⌉ informative patches ~ N(σ_sep μ_c, σ_noise² I) and the rest drawn
// from the shared background N(0, σ_noise² I). Every patch of cohort j > 0 is
// offset by cohort_shift · u_j for a fixed unit vector u_j; the first cohort
// is unshifted. The expected bag mean of a class-c slide is therefore
// (⌈ρ n⌉ / n) σ_sep μ_c + offset.
//
// ρ near 1 puts the class signal in the bag mean; small ρ hides it in a few
// patches, which is where attention pooling has room to help.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "slidetune/dataset.hpp"
#include "slidetune/embedding.hpp"

namespace slidetune {

struct SynthConfig {
  std::string task_name = "synthetic";
  std::size_t num_classes = 10;
  std::size_t feature_dim = 64;
  std::size_t train_per_class = 50;  // per cohort
  std::size_t test_per_class = 20;   // per cohort
  std::size_t patches_min = 16;
  std::size_t patches_max = 48;
  double class_separation = 3.0;
  double noise_scale = 1.0;
  double informative_fraction = 1.0;
  double cohort_shift = 0.0;
  std::vector<std::string> cohorts = {"A"};
  std::uint64_t seed = 0;
  EmbeddingDtype dtype = EmbeddingDtype::kF64;

  // Throws ConfigError: C >= 2, d >= 1, ρ in (0, 1], 1 <= n_min <= n_max,
  // noise >= 0, separation >= 0, at least one slide per class, cohort names
  // unique and non-empty.
  void Validate() const;
  std::string ToCanonicalText() const;
};

struct SyntheticCorpus {
  DatasetManifest manifest;
  std::vector<SlideBag> bags;     // aligned with manifest.entries
  Matrix class_centers;           // C x d, unit rows
  Matrix cohort_offsets;          // cohorts x d
};

std::size_t InformativePatchCount(double informative_fraction,
                                  std::size_t num_patches);

// Deterministic in `config` (including seed). Slide ids look like
// "A-c03-0012"; paths point at "embeddings/<id>.emb".
SyntheticCorpus GenerateSyntheticCorpus(const SynthConfig& config);

// Writes manifest.tsv and embeddings/ under `out_dir` (which must exist) and
// returns the manifest with base_dir set.
DatasetManifest WriteSyntheticCorpus(const SyntheticCorpus& corpus,
                                     const std::filesystem::path& out_dir,
                                     EmbeddingDtype dtype);

inline constexpr std::string_view kManifestFileName = "manifest.tsv";

}  // namespace slidetune
