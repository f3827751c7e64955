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

#include "slidetune/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <set>
#include <sstream>
#include <unordered_set>

#include "byteio.hpp"
#include "slidetune/embedding.hpp"
#include "slidetune/errors.hpp"

namespace slidetune {
namespace {

std::vector<std::string_view> SplitTabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

void RequireName(std::string_view what, std::string_view value) {
  if (value.empty()) {
    throw ConfigError("manifest " + std::string(what) + " is empty");
  }
  if (value.find_first_of("\t\n\r") != std::string_view::npos) {
    throw ConfigError("manifest " + std::string(what) + " '" +
                      std::string(value) + "' contains tab or newline");
  }
}

}  // namespace

const char* SplitName(Split split) {
  return split == Split::kTrain ? "train" : "test";
}

Split ParseSplit(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "test") return Split::kTest;
  throw ConfigError("unknown split '" + std::string(name) + "' (expected train or test)");
}

std::size_t DatasetManifest::ClassIndex(std::string_view label) const {
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i] == label) return i;
  }
  throw ConfigError("label '" + std::string(label) + "' is not one of the " +
                        std::to_string(classes.size()) + " manifest classes",
                    ErrorCode::kUnknownLabel);
}

std::filesystem::path DatasetManifest::EmbeddingPath(
    const ManifestEntry& entry) const {
  const std::filesystem::path p(entry.path);
  if (p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

std::vector<std::string> DatasetManifest::Cohorts() const {
  std::vector<std::string> out;
  for (const ManifestEntry& e : entries) {
    if (std::find(out.begin(), out.end(), e.cohort) == out.end()) {
      out.push_back(e.cohort);
    }
  }
  return out;
}

std::vector<std::size_t> DatasetManifest::IndicesFor(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].split == split) out.push_back(i);
  }
  return out;
}

std::string SerializeManifest(const DatasetManifest& m) {
  std::ostringstream out;
  out << kManifestHeader << '\t' << kManifestVersion << '\n';
  out << "task\t" << m.task_name << '\n';
  out << "feature_dim\t" << m.feature_dim << '\n';
  out << "classes";
  for (const std::string& c : m.classes) out << '\t' << c;
  out << '\n';
  for (const ManifestEntry& e : m.entries) {
    out << "slide\t" << e.slide_id << '\t' << e.label << '\t' << e.cohort << '\t'
        << SplitName(e.split) << '\t' << e.path << '\n';
  }
  return out.str();
}

DatasetManifest ParseManifest(std::string_view text,
                              const std::filesystem::path& base_dir) {
  DatasetManifest m;
  m.base_dir = base_dir;
  bool saw_header = false;
  bool saw_dim = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    const auto fields = SplitTabs(line);
    const std::string where = "manifest line " + std::to_string(line_no);
    if (!saw_header) {
      if (fields.size() != 2 || fields[0] != kManifestHeader) {
        throw ConfigError(where + ": expected header '" +
                          std::string(kManifestHeader) + "<TAB>version'");
      }
      if (fields[1] != std::to_string(kManifestVersion)) {
        throw ConfigError(where + ": unsupported manifest version '" +
                          std::string(fields[1]) + "'");
      }
      saw_header = true;
      continue;
    }
    const std::string_view kind = fields[0];
    if (kind == "task") {
      if (fields.size() != 2) throw ConfigError(where + ": task takes one field");
      m.task_name = std::string(fields[1]);
    } else if (kind == "feature_dim") {
      if (fields.size() != 2) throw ConfigError(where + ": feature_dim takes one field");
      const auto [ptr, ec] = std::from_chars(
          fields[1].data(), fields[1].data() + fields[1].size(), m.feature_dim);
      if (ec != std::errc() || ptr != fields[1].data() + fields[1].size()) {
        throw ConfigError(where + ": feature_dim is not a count");
      }
      saw_dim = true;
    } else if (kind == "classes") {
      for (std::size_t i = 1; i < fields.size(); ++i)
        m.classes.emplace_back(fields[i]);
    } else if (kind == "slide") {
      if (fields.size() != 6) {
        throw ConfigError(where + ": slide records have 5 fields, got " +
                          std::to_string(fields.size() - 1));
      }
      ManifestEntry e;
      e.slide_id = std::string(fields[1]);
      e.label = std::string(fields[2]);
      e.cohort = std::string(fields[3]);
      e.split = ParseSplit(fields[4]);
      e.path = std::string(fields[5]);
      m.entries.push_back(std::move(e));
    } else {
      throw ConfigError(where + ": unknown record '" + std::string(kind) + "'");
    }
  }
  if (!saw_header) throw ConfigError("manifest is empty");
  if (!saw_dim) throw ConfigError("manifest has no feature_dim record");
  ValidateManifest(m);
  return m;
}

DatasetManifest LoadManifest(const std::filesystem::path& path) {
  std::string text;
  try {
    text = internal::ReadFileBytes(path);
  } catch (const Error& e) {
    throw ConfigError(e.what(), ErrorCode::kMissingFile);
  }
  return ParseManifest(text, path.parent_path());
}

void SaveManifest(const std::filesystem::path& path,
                  const DatasetManifest& manifest) {
  ValidateManifest(manifest);
  internal::WriteFileBytes(path, SerializeManifest(manifest));
}

void ValidateManifest(const DatasetManifest& m) {
  RequireName("task name", m.task_name);
  if (m.feature_dim == 0) throw ConfigError("manifest feature_dim must be >= 1");
  if (m.classes.size() < 2) {
    throw ConfigError("manifest needs at least 2 classes, got " +
                      std::to_string(m.classes.size()));
  }
  std::set<std::string_view> classes;
  for (const std::string& c : m.classes) {
    RequireName("class name", c);
    if (!classes.insert(c).second) {
      throw ConfigError("manifest class '" + c + "' is listed twice");
    }
  }
  std::unordered_set<std::string_view> ids;
  for (const ManifestEntry& e : m.entries) {
    RequireName("slide id", e.slide_id);
    RequireName("cohort", e.cohort);
    RequireName("path of slide '" + e.slide_id + "'", e.path);
    if (!ids.insert(e.slide_id).second) {
      throw ConfigError("slide id '" + e.slide_id + "' appears more than once",
                        ErrorCode::kDuplicateSlide);
    }
    if (!classes.contains(e.label)) {
      throw ConfigError("slide '" + e.slide_id + "' has unknown label '" +
                            e.label + "'",
                        ErrorCode::kUnknownLabel);
    }
  }
}

void PreflightManifest(const DatasetManifest& m) {
  ValidateManifest(m);
  std::vector<std::string> offenders;
  for (const ManifestEntry& e : m.entries) {
    const std::filesystem::path p = m.EmbeddingPath(e);
    if (!std::filesystem::exists(p)) {
      throw ConfigError("embedding file for slide '" + e.slide_id +
                            "' not found: " + p.string(),
                        ErrorCode::kMissingFile);
    }
    const EmbeddingHeader h = ReadEmbeddingHeader(p);
    if (h.dim != m.feature_dim) {
      offenders.push_back(e.slide_id + " (dim " + std::to_string(h.dim) + ")");
    }
  }
  if (!offenders.empty()) {
    std::string list;
    for (std::size_t i = 0; i < offenders.size(); ++i) {
      if (i) list += ", ";
      list += offenders[i];
    }
    throw ConfigError("feature dim mismatch with manifest feature_dim " +
                          std::to_string(m.feature_dim) + ": " + list,
                      ErrorCode::kDimMismatch);
  }
}

std::uint64_t Fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string HexDigest(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t SelectionHash(const DatasetManifest& manifest,
                            std::span<const std::size_t> indices) {
  std::uint64_t h = Fnv1a64("selection");
  for (std::size_t i : indices) {
    h = Fnv1a64(manifest.entries.at(i).slide_id, h);
    h = Fnv1a64(std::string_view("\n", 1), h);
  }
  return h;
}

Dataset Dataset::Load(const DatasetManifest& manifest) {
  PreflightManifest(manifest);
  std::vector<SlideBag> bags;
  bags.reserve(manifest.entries.size());
  for (const ManifestEntry& e : manifest.entries) {
    bags.push_back({e.slide_id, ReadEmbedding(manifest.EmbeddingPath(e))});
  }
  return Dataset(manifest, std::move(bags));
}

Dataset::Dataset(DatasetManifest manifest, std::vector<SlideBag> bags)
    : manifest_(std::move(manifest)), bags_(std::move(bags)) {
  ValidateManifest(manifest_);
  if (bags_.size() != manifest_.entries.size()) {
    throw ShapeError("dataset has " + std::to_string(bags_.size()) +
                     " bags for " + std::to_string(manifest_.entries.size()) +
                     " manifest entries");
  }
  labels_.reserve(bags_.size());
  for (std::size_t i = 0; i < bags_.size(); ++i) {
    const SlideBag& b = bags_[i];
    if (b.num_patches() == 0) {
      throw EmptyBagError("slide '" + b.slide_id + "' has no patches");
    }
    if (b.dim() != manifest_.feature_dim) {
      throw ConfigError("slide '" + b.slide_id + "' has feature dim " +
                            std::to_string(b.dim()) + ", manifest says " +
                            std::to_string(manifest_.feature_dim),
                        ErrorCode::kDimMismatch);
    }
    labels_.push_back(manifest_.LabelIndex(i));
  }
}

std::vector<LabeledSlide> Dataset::Select(
    std::span<const std::size_t> indices) const {
  std::vector<LabeledSlide> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back({&bags_.at(i), labels_.at(i)});
  return out;
}

}  // namespace slidetune
