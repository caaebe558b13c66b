// Copyright 2026 The PerceptIQ Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PERCEPTIQ_ERROR_HPP_
#define PERCEPTIQ_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace perceptiq {

enum class ErrorCode {
  kInvalidArgument,
  kIo,
  kFormat,
  kDimensionMismatch,
  kInsufficientTexture,
  kDegenerateSamples,
  kConfigMismatch,
  kNotImplemented,
  kNumerical,
};

const char* ErrorCodeName(ErrorCode code);

// All library failures are reported through this type; code() lets callers
// tell recoverable per-image failures apart from configuration errors.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

// Shortest decimal form that parses back to the same double.
std::string FormatDouble(double value);

}  // namespace perceptiq

#endif  // PERCEPTIQ_ERROR_HPP_
