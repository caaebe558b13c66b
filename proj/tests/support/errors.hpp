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

#ifndef PERCEPTIQ_TESTS_SUPPORT_ERRORS_HPP_
#define PERCEPTIQ_TESTS_SUPPORT_ERRORS_HPP_

#include <optional>
#include <string>

#include "perceptiq/error.hpp"

namespace perceptiq::testing {

// Code of the perceptiq::Error thrown by fn, or nullopt if none was thrown.
template <typename Fn>
std::optional<ErrorCode> ThrownCode(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

template <typename Fn>
std::string ThrownMessage(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace perceptiq::testing

#endif  // PERCEPTIQ_TESTS_SUPPORT_ERRORS_HPP_
