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

// Patch-embedding file format (one slide per file):
//
//   offset  size  field
//   0       8     magic "SLIDEEMB"
//   8       1     version (1)
//   9       1     dtype: 0 = f32, 1 = f64
//   10      4     n, patch count (u32 LE, >= 1)
//   14      4     d, feature dim (u32 LE, >= 1)
//   18      ...   n*d values, row-major, little-endian
//
// f32 payloads are promoted to f64 on load.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "slidetune/matrix.hpp"

namespace slidetune {

enum class EmbeddingDtype : std::uint8_t { kF32 = 0, kF64 = 1 };

inline constexpr std::string_view kEmbeddingMagic = "SLIDEEMB";
inline constexpr std::uint8_t kEmbeddingVersion = 1;
inline constexpr std::size_t kEmbeddingHeaderSize = 18;

const char* DtypeName(EmbeddingDtype dtype);
EmbeddingDtype ParseDtype(std::string_view name);

struct EmbeddingHeader {
  std::uint8_t version = kEmbeddingVersion;
  EmbeddingDtype dtype = EmbeddingDtype::kF64;
  std::uint32_t num_patches = 0;
  std::uint32_t dim = 0;

  std::uint64_t payload_bytes() const;
};

// Throws ShapeError for empty matrices and NumericError for non-finite
// values (including f64 values that overflow f32).
std::string EncodeEmbedding(const Matrix& features,
                            EmbeddingDtype dtype = EmbeddingDtype::kF64);

// Validates the header before touching the payload; every problem is a
// FormatError with the byte offset where it was found.
EmbeddingHeader DecodeEmbeddingHeader(std::string_view bytes);
Matrix DecodeEmbedding(std::string_view bytes);

void WriteEmbedding(const std::filesystem::path& path, const Matrix& features,
                    EmbeddingDtype dtype = EmbeddingDtype::kF64);
Matrix ReadEmbedding(const std::filesystem::path& path);
// Reads and validates only the 18-byte header.
EmbeddingHeader ReadEmbeddingHeader(const std::filesystem::path& path);

}  // namespace slidetune
