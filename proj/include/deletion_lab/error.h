// Copyright 2026 The Deletion Lab Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DELETION_LAB_ERROR_H_
#define DELETION_LAB_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace deletion_lab {

enum class ErrorCode {
  kNotSpd,
  kNoConvergence,
  kEmptyBuffer,
  kNonFiniteState,
  kSearchDiverged,
  kDimensionMismatch,
  kShapeMismatch,
  kNonFiniteLoss,
  kDegenerateBaseline,
  kSolverFailure,
  kZeroNoise,
  kEmptyWindow,
  kInvalidArgument,
  kConfigError,
  kIoError,
};

std::string_view ErrorCodeName(ErrorCode code);

// Every failure raised by the library carries one of the codes above. The CLI
// maps kConfigError / kInvalidArgument to exit code 2 and the rest to 3.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotSpd: return "NotSPD";
    case ErrorCode::kNoConvergence: return "NoConvergence";
    case ErrorCode::kEmptyBuffer: return "EmptyBuffer";
    case ErrorCode::kNonFiniteState: return "NonFiniteState";
    case ErrorCode::kSearchDiverged: return "SearchDiverged";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kDegenerateBaseline: return "DegenerateBaseline";
    case ErrorCode::kSolverFailure: return "SolverFailure";
    case ErrorCode::kZeroNoise: return "ZeroNoise";
    case ErrorCode::kEmptyWindow: return "EmptyWindow";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace deletion_lab

#endif  // DELETION_LAB_ERROR_H_
