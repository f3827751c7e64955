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

#include <cstdint>
#include <stdexcept>
#include <string>

namespace slidetune {

// Every failure the library raises carries one of these codes. The CLI maps
// them onto process exit codes (see ExitCodeFor).
enum class ErrorCode {
  kShape,
  kIndex,
  kState,
  kConfig,
  kFormat,
  kEmptyBag,
  kNumeric,
  kUndefinedMetric,
  kDegenerateData,
  kDuplicateSlide,
  kUnknownLabel,
  kDimMismatch,
  kMissingFile,
  kIo,
};

const char* ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& message)
      : Error(ErrorCode::kShape, message) {}
};

class IndexError : public Error {
 public:
  explicit IndexError(const std::string& message)
      : Error(ErrorCode::kIndex, message) {}
};

class StateError : public Error {
 public:
  explicit StateError(const std::string& message)
      : Error(ErrorCode::kState, message) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message,
                       ErrorCode code = ErrorCode::kConfig)
      : Error(code, message) {}
};

class EmptyBagError : public Error {
 public:
  explicit EmptyBagError(const std::string& message)
      : Error(ErrorCode::kEmptyBag, message) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& message)
      : Error(ErrorCode::kNumeric, message) {}
};

class UndefinedMetricError : public Error {
 public:
  explicit UndefinedMetricError(const std::string& message)
      : Error(ErrorCode::kUndefinedMetric, message) {}
};

class DegenerateDataError : public Error {
 public:
  explicit DegenerateDataError(const std::string& message)
      : Error(ErrorCode::kDegenerateData, message) {}
};

// Malformed binary input. `offset` is the byte position where the reader
// detected the problem.
class FormatError : public Error {
 public:
  FormatError(const std::string& message, std::uint64_t offset)
      : Error(ErrorCode::kFormat,
              message + " (at byte offset " + std::to_string(offset) + ")"),
        detail_(message),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }
  // Message without the offset suffix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string detail_;
  std::uint64_t offset_;
};

// 0 success, 1 config/validation error, 2 runtime/numeric failure.
int ExitCodeFor(ErrorCode code);

}  // namespace slidetune
