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

#include "wnos/error.hpp"

namespace wnos {

std::string_view ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUnboundVariable: return "UnboundVariable";
    case ErrorKind::kDomainError: return "DomainError";
    case ErrorKind::kUnsupportedNode: return "UnsupportedNode";
    case ErrorKind::kUnboundIndexSet: return "UnboundIndexSet";
    case ErrorKind::kParseError: return "ParseError";
    case ErrorKind::kValidationError: return "ValidationError";
    case ErrorKind::kUnknownElement: return "UnknownElement";
    case ErrorKind::kPathError: return "PathError";
    case ErrorKind::kNotGlobal: return "NotGlobal";
    case ErrorKind::kCardinalityError: return "CardinalityError";
    case ErrorKind::kRetryExhausted: return "RetryExhausted";
    case ErrorKind::kCapacityExceeded: return "CapacityExceeded";
    case ErrorKind::kNotDual: return "NotDual";
    case ErrorKind::kAmbiguousLayer: return "AmbiguousLayer";
    case ErrorKind::kAmbiguousEntity: return "AmbiguousEntity";
    case ErrorKind::kNoMatchingElement: return "NoMatchingElement";
    case ErrorKind::kNotDifferentiable: return "NotDifferentiable";
    case ErrorKind::kNumericalError: return "NumericalError";
    case ErrorKind::kInfeasibleEverywhere: return "InfeasibleEverywhere";
    case ErrorKind::kConfigError: return "ConfigError";
    case ErrorKind::kUnknownEntity: return "UnknownEntity";
    case ErrorKind::kUnresolvableCollectionRule: return "UnresolvableCollectionRule";
    case ErrorKind::kSchemaMismatch: return "SchemaMismatch";
    case ErrorKind::kIoError: return "IoError";
  }
  return "Error";
}

}  // namespace wnos
