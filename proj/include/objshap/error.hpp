/*
 * Copyright 2026 The objshap Authors.
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

#include <stdexcept>
#include <string>
#include <string_view>

namespace objshap {

// Every failure raised by the library carries one of these codes. The CLI
// maps them onto its documented exit codes.
enum class ErrorCode {
  kMalformedEncoding,
  kSchemaError,
  kDimensionMismatch,
  kEmptyObjectList,
  kInvalidCoalition,
  kTooManyObjects,
  kIncompleteTable,
  kUncoveredObject,
  kZeroVector,
  kTransport,
  kAuthError,
  kModelRefusal,
  kRateLimited,
  kMismatchedResult,
  kConfigError,
  kIoError,
  kPrecondition,
};

inline std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedEncoding: return "MalformedEncoding";
    case ErrorCode::kSchemaError: return "SchemaError";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kEmptyObjectList: return "EmptyObjectList";
    case ErrorCode::kInvalidCoalition: return "InvalidCoalition";
    case ErrorCode::kTooManyObjects: return "TooManyObjects";
    case ErrorCode::kIncompleteTable: return "IncompleteTable";
    case ErrorCode::kUncoveredObject: return "UncoveredObject";
    case ErrorCode::kZeroVector: return "ZeroVector";
    case ErrorCode::kTransport: return "Transport";
    case ErrorCode::kAuthError: return "AuthError";
    case ErrorCode::kModelRefusal: return "ModelRefusal";
    case ErrorCode::kRateLimited: return "RateLimited";
    case ErrorCode::kMismatchedResult: return "MismatchedResult";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kPrecondition: return "Precondition";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  // True for failures that originate in a model endpoint.
  bool is_gateway_failure() const noexcept {
    return code_ == ErrorCode::kTransport || code_ == ErrorCode::kAuthError ||
           code_ == ErrorCode::kModelRefusal ||
           code_ == ErrorCode::kRateLimited;
  }

 private:
  ErrorCode code_;
};

}  // namespace objshap
