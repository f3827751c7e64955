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

#include "slidetune/errors.hpp"

namespace slidetune {

const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kIndex: return "index";
    case ErrorCode::kState: return "state";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kEmptyBag: return "empty_bag";
    case ErrorCode::kNumeric: return "numeric";
    case ErrorCode::kUndefinedMetric: return "undefined_metric";
    case ErrorCode::kDegenerateData: return "degenerate_data";
    case ErrorCode::kDuplicateSlide: return "duplicate_slide";
    case ErrorCode::kUnknownLabel: return "unknown_label";
    case ErrorCode::kDimMismatch: return "dim_mismatch";
    case ErrorCode::kMissingFile: return "missing_file";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

int ExitCodeFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNumeric:
    case ErrorCode::kState:
    case ErrorCode::kDegenerateData:
    case ErrorCode::kUndefinedMetric:
    case ErrorCode::kIo:
      return 2;
    default:
      return 1;
  }
}

}  // namespace slidetune
