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

#ifndef WNOS_EXPR_PARSE_HPP_
#define WNOS_EXPR_PARSE_HPP_

#include <string_view>

#include "wnos/expr.hpp"

namespace wnos {

// Parses the infix expression grammar:
//
//   expr    := ['-'] chain { ('+' | '-') chain }
//   chain   := primary { ('*' | '/') primary }
//   primary := number | ident | func '(' expr ')' | 'sum' '(' expr ')'
//            | '(' expr ')'
//   func    := 'log' | 'ln' | 'log2' | 'sqrt'
//
// Identifiers may contain letters, digits, '_' and '.'. A trailing `_NN`
// becomes the variable's entity index. `sum(e)` yields a big-sum with an
// empty index set, to be resolved by the caller. A leading minus directly in
// front of a bare number literal produces a negative constant.
//
// Throws ParseError carrying `line` and the 1-based column (offset by
// `column_offset`).
Expr ParseExpr(std::string_view text, int line = 1, int column_offset = 0);

}  // namespace wnos

#endif  // WNOS_EXPR_PARSE_HPP_
