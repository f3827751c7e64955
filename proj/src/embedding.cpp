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

#include "slidetune/embedding.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "byteio.hpp"
#include "slidetune/errors.hpp"

namespace slidetune {

const char* DtypeName(EmbeddingDtype dtype) {
  return dtype == EmbeddingDtype::kF32 ? "f32" : "f64";
}

EmbeddingDtype ParseDtype(std::string_view name) {
  if (name == "f32") return EmbeddingDtype::kF32;
  if (name == "f64") return EmbeddingDtype::kF64;
  throw ConfigError("unknown dtype '" + std::string(name) + "' (expected f32 or f64)");
}

std::uint64_t EmbeddingHeader::payload_bytes() const {
  const std::uint64_t width = dtype == EmbeddingDtype::kF32 ? 4 : 8;
  return static_cast<std::uint64_t>(num_patches) * dim * width;
}

std::string EncodeEmbedding(const Matrix& features, EmbeddingDtype dtype) {
  if (features.rows() == 0 || features.cols() == 0) {
    throw ShapeError("cannot write an empty embedding matrix " +
                     features.ShapeString());
  }
  constexpr std::uint64_t kMaxU32 = std::numeric_limits<std::uint32_t>::max();
  if (features.rows() > kMaxU32 || features.cols() > kMaxU32) {
    throw ShapeError("embedding matrix " + features.ShapeString() +
                     " exceeds the u32 header fields");
  }
  RequireFinite(features.values(), "embedding");

  internal::ByteWriter w;
  w.PutBytes(kEmbeddingMagic);
  w.PutU8(kEmbeddingVersion);
  w.PutU8(static_cast<std::uint8_t>(dtype));
  w.PutU32(static_cast<std::uint32_t>(features.rows()));
  w.PutU32(static_cast<std::uint32_t>(features.cols()));
  for (double v : features.values()) {
    if (dtype == EmbeddingDtype::kF64) {
      w.PutF64(v);
    } else {
      const float f = static_cast<float>(v);
      if (!std::isfinite(f)) {
        throw NumericError("value " + std::to_string(v) +
                           " overflows the f32 embedding dtype");
      }
      w.PutF32(f);
    }
  }
  return w.Release();
}

EmbeddingHeader DecodeEmbeddingHeader(std::string_view bytes) {
  internal::ByteReader r(bytes);
  const std::string_view magic = r.Bytes(kEmbeddingMagic.size(), "embedding magic");
  if (magic != kEmbeddingMagic) {
    throw FormatError("bad embedding magic (expected \"SLIDEEMB\")", 0);
  }
  EmbeddingHeader h;
  h.version = r.U8("embedding version");
  if (h.version != kEmbeddingVersion) {
    throw FormatError("unsupported embedding version " + std::to_string(h.version),
                      8);
  }
  const std::uint8_t dtype = r.U8("embedding dtype");
  if (dtype > 1) {
    throw FormatError("unknown embedding dtype code " + std::to_string(dtype), 9);
  }
  h.dtype = static_cast<EmbeddingDtype>(dtype);
  h.num_patches = r.U32("patch count");
  if (h.num_patches == 0) throw FormatError("embedding holds zero patches", 10);
  h.dim = r.U32("feature dim");
  if (h.dim == 0) throw FormatError("embedding has feature dim 0", 14);
  return h;
}

Matrix DecodeEmbedding(std::string_view bytes) {
  const EmbeddingHeader h = DecodeEmbeddingHeader(bytes);
  const std::uint64_t expected = h.payload_bytes();
  const std::uint64_t actual = bytes.size() - kEmbeddingHeaderSize;
  if (actual < expected) {
    throw FormatError("truncated embedding payload: expected " +
                          std::to_string(expected) + " bytes, got " +
                          std::to_string(actual),
                      kEmbeddingHeaderSize + actual);
  }
  if (actual > expected) {
    throw FormatError("embedding has " + std::to_string(actual - expected) +
                          " trailing bytes after a payload of " +
                          std::to_string(expected),
                      kEmbeddingHeaderSize + expected);
  }

  internal::ByteReader r(bytes.substr(kEmbeddingHeaderSize));
  Matrix m(h.num_patches, h.dim);
  for (double& v : m.values()) {
    const std::uint64_t at = kEmbeddingHeaderSize + r.offset();
    v = h.dtype == EmbeddingDtype::kF64 ? r.F64("payload")
                                        : static_cast<double>(r.F32("payload"));
    if (!std::isfinite(v)) {
      throw FormatError("non-finite value in embedding payload", at);
    }
  }
  return m;
}

void WriteEmbedding(const std::filesystem::path& path, const Matrix& features,
                    EmbeddingDtype dtype) {
  internal::WriteFileBytes(path, EncodeEmbedding(features, dtype));
}

Matrix ReadEmbedding(const std::filesystem::path& path) {
  const std::string bytes = internal::ReadFileBytes(path);
  try {
    return DecodeEmbedding(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.detail(), e.offset());
  }
}

EmbeddingHeader ReadEmbeddingHeader(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kMissingFile,
                "cannot open '" + path.string() + "' for reading");
  }
  std::string header(kEmbeddingHeaderSize, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header.size()));
  header.resize(static_cast<std::size_t>(in.gcount()));
  try {
    return DecodeEmbeddingHeader(header);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.detail(), e.offset());
  }
}

}  // namespace slidetune
