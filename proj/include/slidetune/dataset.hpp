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

// Dataset manifests bind embedding files to a labeled task.
//
// Text format (tab-separated, one record per line):
//
//   slidetune-manifest<TAB>1
//   task<TAB><name>
//   feature_dim<TAB><d>
//   classes<TAB><label 0><TAB><label 1>...
//   slide<TAB><slide_id><TAB><label><TAB><cohort><TAB><train|test><TAB><path>
//
// Paths are relative to the manifest's directory unless absolute.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "slidetune/aggregate.hpp"
#include "slidetune/optim.hpp"

namespace slidetune {

enum class Split { kTrain, kTest };

const char* SplitName(Split split);
Split ParseSplit(std::string_view name);

inline constexpr std::string_view kManifestHeader = "slidetune-manifest";
inline constexpr int kManifestVersion = 1;

struct ManifestEntry {
  std::string slide_id;
  std::string label;
  std::string cohort;
  Split split = Split::kTrain;
  std::string path;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
  std::string task_name;
  std::vector<std::string> classes;
  std::size_t feature_dim = 0;
  std::vector<ManifestEntry> entries;
  // Directory relative paths resolve against; not serialized.
  std::filesystem::path base_dir;

  // Throws ConfigError(kUnknownLabel).
  std::size_t ClassIndex(std::string_view label) const;
  std::size_t LabelIndex(std::size_t entry) const {
    return ClassIndex(entries[entry].label);
  }
  std::filesystem::path EmbeddingPath(const ManifestEntry& entry) const;
  // Cohort names in order of first appearance.
  std::vector<std::string> Cohorts() const;
  std::vector<std::size_t> IndicesFor(Split split) const;
};

std::string SerializeManifest(const DatasetManifest& manifest);
DatasetManifest ParseManifest(std::string_view text,
                              const std::filesystem::path& base_dir = {});
DatasetManifest LoadManifest(const std::filesystem::path& path);
void SaveManifest(const std::filesystem::path& path,
                  const DatasetManifest& manifest);

// Structural checks: classes (>= 2, unique), unique slide ids
// (kDuplicateSlide), labels in the class list (kUnknownLabel), and
// well-formed names. Throws ConfigError with the corresponding code.
void ValidateManifest(const DatasetManifest& manifest);

// Structural checks plus every embedding header: missing files raise
// kMissingFile naming the slide; all dim mismatches are collected and
// reported together as kDimMismatch.
void PreflightManifest(const DatasetManifest& manifest);

// FNV-1a 64 over bytes; used for plan and split hashes.
std::uint64_t Fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string HexDigest(std::uint64_t h);

// Stable hash of a slide selection (the ordered list of slide ids).
std::uint64_t SelectionHash(const DatasetManifest& manifest,
                            std::span<const std::size_t> indices);

// Manifest plus all slide embeddings in memory, index-aligned with
// manifest.entries.
class Dataset {
 public:
  // Preflights the manifest and loads every embedding.
  static Dataset Load(const DatasetManifest& manifest);
  // Adopts bags already in memory (e.g. a freshly generated corpus).
  Dataset(DatasetManifest manifest, std::vector<SlideBag> bags);

  const DatasetManifest& manifest() const noexcept { return manifest_; }
  const SlideBag& bag(std::size_t entry) const { return bags_[entry]; }
  std::size_t label(std::size_t entry) const { return labels_[entry]; }
  std::size_t size() const noexcept { return bags_.size(); }
  std::size_t num_classes() const noexcept { return manifest_.classes.size(); }
  std::size_t feature_dim() const noexcept { return manifest_.feature_dim; }

  std::vector<LabeledSlide> Select(std::span<const std::size_t> indices) const;

 private:
  DatasetManifest manifest_;
  std::vector<SlideBag> bags_;
  std::vector<std::size_t> labels_;
};

}  // namespace slidetune
