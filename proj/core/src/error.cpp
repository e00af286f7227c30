// Copyright 2026 The IWR Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
#include "iwr/error.hpp"

namespace iwr {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedHeader: return "malformed header";
    case ErrorCode::kPayloadMismatch: return "payload length mismatch";
    case ErrorCode::kNonFinite: return "non-finite value";
    case ErrorCode::kEmptyDataset: return "empty dataset";
    case ErrorCode::kDimensionMismatch: return "dimension mismatch";
    case ErrorCode::kMetadataInvalid: return "invalid metadata";
    case ErrorCode::kRowCountMismatch: return "row-count mismatch";
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kIndexOutOfRange: return "index out of range";
    case ErrorCode::kMethodMismatch: return "method mismatch";
    case ErrorCode::kFingerprintMismatch: return "fingerprint mismatch";
    case ErrorCode::kCholeskyFailure: return "cholesky failure";
    case ErrorCode::kIo: return "i/o failure";
  }
  return "unknown error";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kCholeskyFailure:
      return 3;
    case ErrorCode::kIo:
      return 4;
    default:
      return 2;
  }
}

}  // namespace iwr
