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
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace iwr {

/// Failure classes raised by the library. Each maps onto one of the process
/// exit codes used by the command-line tool (see exit_code_for).
enum class ErrorCode {
  kMalformedHeader,
  kPayloadMismatch,
  kNonFinite,
  kEmptyDataset,
  kDimensionMismatch,
  kMetadataInvalid,
  kRowCountMismatch,
  kInvalidArgument,
  kIndexOutOfRange,
  kMethodMismatch,
  kFingerprintMismatch,
  kCholeskyFailure,
  kIo,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// 2 validation, 3 numerical failure, 4 I/O.
int exit_code_for(ErrorCode code);

}  // namespace iwr
