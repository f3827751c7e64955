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

// Little-endian encode/decode helpers, independent of host byte order.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>

#include "slidetune/errors.hpp"

namespace slidetune::internal {

class ByteWriter {
 public:
  void PutBytes(std::string_view bytes) { out_.append(bytes); }
  void PutU8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void PutU32(std::uint32_t v) { PutLE(v, 4); }
  void PutU64(std::uint64_t v) { PutLE(v, 8); }
  void PutF64(double v) { PutLE(std::bit_cast<std::uint64_t>(v), 8); }
  void PutF32(float v) { PutLE(std::bit_cast<std::uint32_t>(v), 4); }

  const std::string& bytes() const noexcept { return out_; }
  std::string Release() { return std::move(out_); }

 private:
  void PutLE(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) {
      out_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
    }
  }

  std::string out_;
};

// Bounds-checked reader; every failure is a FormatError carrying the offset
// at which the missing or invalid data starts.
class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  std::uint64_t offset() const noexcept { return pos_; }
  std::uint64_t remaining() const noexcept { return data_.size() - pos_; }

  void Require(std::uint64_t n, const char* what) const {
    if (remaining() < n) {
      throw FormatError(std::string("truncated ") + what + ": expected " +
                            std::to_string(n) + " bytes, got " +
                            std::to_string(remaining()),
                        pos_);
    }
  }

  std::string_view Bytes(std::uint64_t n, const char* what) {
    Require(n, what);
    std::string_view out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint8_t U8(const char* what) {
    return static_cast<std::uint8_t>(GetLE(1, what));
  }
  std::uint32_t U32(const char* what) {
    return static_cast<std::uint32_t>(GetLE(4, what));
  }
  std::uint64_t U64(const char* what) { return GetLE(8, what); }
  double F64(const char* what) {
    return std::bit_cast<double>(GetLE(8, what));
  }
  float F32(const char* what) {
    return std::bit_cast<float>(static_cast<std::uint32_t>(GetLE(4, what)));
  }

 private:
  std::uint64_t GetLE(int width, const char* what) {
    Require(static_cast<std::uint64_t>(width), what);
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(
               static_cast<unsigned char>(data_[pos_ + i]))
           << (8 * i);
    }
    pos_ += static_cast<std::uint64_t>(width);
    return v;
  }

  std::string_view data_;
  std::uint64_t pos_ = 0;
};

// Whole-file helpers. Throw Error(kIo / kMissingFile).
std::string ReadFileBytes(const std::filesystem::path& path);
void WriteFileBytes(const std::filesystem::path& path, std::string_view bytes);

}  // namespace slidetune::internal
