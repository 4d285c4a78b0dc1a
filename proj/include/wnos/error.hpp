// Copyright 2026 The WNOS Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef WNOS_ERROR_HPP_
#define WNOS_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace wnos {

enum class ErrorKind {
  kUnboundVariable,
  kDomainError,
  kUnsupportedNode,
  kUnboundIndexSet,
  kParseError,
  kValidationError,
  kUnknownElement,
  kPathError,
  kNotGlobal,
  kCardinalityError,
  kRetryExhausted,
  kCapacityExceeded,
  kNotDual,
  kAmbiguousLayer,
  kAmbiguousEntity,
  kNoMatchingElement,
  kNotDifferentiable,
  kNumericalError,
  kInfeasibleEverywhere,
  kConfigError,
  kUnknownEntity,
  kUnresolvableCollectionRule,
  kSchemaMismatch,
  kIoError,
};

std::string_view ErrorKindName(ErrorKind kind);

// All pipeline failures surface as this exception; `kind()` identifies the
// failure class and `what()` carries the diagnostic.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(ErrorKindName(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Parse failures keep their source position (1-based).
class ParseError : public Error {
 public:
  ParseError(int line, int column, const std::string& expected)
      : Error(ErrorKind::kParseError, "line " + std::to_string(line) +
                                          ", column " + std::to_string(column) +
                                          ": expected " + expected),
        line_(line),
        column_(column),
        expected_(expected) {}

  int line() const { return line_; }
  int column() const { return column_; }
  const std::string& expected() const { return expected_; }

 private:
  int line_;
  int column_;
  std::string expected_;
};

}  // namespace wnos

#endif  // WNOS_ERROR_HPP_
