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

#include "wnos/expr_parse.hpp"

#include <cctype>
#include <charconv>
#include <string>
#include <vector>

#include "wnos/error.hpp"

namespace wnos {
namespace {

bool IsIdentStart(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool IsIdentChar(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
}

class Parser {
 public:
  Parser(std::string_view text, int line, int column_offset)
      : text_(text), line_(line), column_offset_(column_offset) {}

  Expr Parse() {
    Expr e = ParseSum();
    SkipSpace();
    if (pos_ != text_.size()) Fail("operator or end of expression");
    return e;
  }

 private:
  struct Primary {
    Expr expr;
    bool bare_number = false;
  };

  [[noreturn]] void Fail(const std::string& expected) const {
    throw ParseError(line_, column_offset_ + static_cast<int>(pos_) + 1, expected);
  }

  void SkipSpace() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool Accept(char c) {
    SkipSpace();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void Expect(char c) {
    if (!Accept(c)) Fail(std::string("'") + c + "'");
  }

  Expr ParseSum() {
    SkipSpace();
    std::vector<Expr> terms;
    bool leading_minus = Accept('-');
    bool bare = false;
    Expr first = ParseChain(&bare);
    if (leading_minus) {
      first = bare ? Expr::Constant(-first.value()) : Expr::Negate(first);
    }
    terms.push_back(first);
    while (true) {
      if (Accept('+')) {
        terms.push_back(ParseChain(nullptr));
      } else if (Accept('-')) {
        terms.push_back(Expr::Negate(ParseChain(nullptr)));
      } else {
        break;
      }
    }
    if (terms.size() == 1) return terms.front();
    return Expr::Sum(std::move(terms));
  }

  Expr ParseChain(bool* bare_number) {
    Primary p = ParsePrimary();
    Expr cur = p.expr;
    bool bare = p.bare_number;
    bool chain_product = false;
    while (true) {
      if (Accept('*')) {
        Expr rhs = ParsePrimary().expr;
        if (chain_product) {
          std::vector<Expr> kids(cur.children().begin(), cur.children().end());
          kids.push_back(rhs);
          cur = Expr::Product(std::move(kids));
        } else {
          cur = Expr::Product({cur, rhs});
          chain_product = true;
        }
        bare = false;
      } else if (Accept('/')) {
        cur = Expr::Quotient(cur, ParsePrimary().expr);
        chain_product = false;
        bare = false;
      } else {
        break;
      }
    }
    if (bare_number) *bare_number = bare;
    return cur;
  }

  Primary ParsePrimary() {
    SkipSpace();
    if (pos_ >= text_.size()) Fail("operand");
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expr inner = ParseSum();
      Expect(')');
      return {inner, false};
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      return {ParseNumber(), true};
    }
    if (IsIdentStart(c)) {
      std::size_t start = pos_;
      while (pos_ < text_.size() && IsIdentChar(text_[pos_])) ++pos_;
      std::string_view name = text_.substr(start, pos_ - start);
      SkipSpace();
      if (pos_ < text_.size() && text_[pos_] == '(') {
        if (name == "sum") {
          ++pos_;
          Expr body = ParseSum();
          Expect(')');
          return {Expr::BigSum("", body), false};
        }
        auto f = FuncFromName(name);
        if (!f) {
          pos_ = start;
          Fail("function name (log, ln, log2, sqrt, sum)");
        }
        ++pos_;
        Expr arg = ParseSum();
        Expect(')');
        return {Expr::Function(*f, arg), false};
      }
      return {Expr::Variable(VarId::Parse(name)), false};
    }
    Fail("operand");
  }

  Expr ParseNumber() {
    std::size_t start = pos_;
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        ++pos_;
      } else if ((c == 'e' || c == 'E') && pos_ + 1 < text_.size()) {
        ++pos_;
        if (text_[pos_] == '+' || text_[pos_] == '-') ++pos_;
      } else {
        break;
      }
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, v);
    if (ec != std::errc() || ptr != text_.data() + pos_) {
      pos_ = start;
      Fail("number");
    }
    return Expr::Constant(v);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_;
  int column_offset_;
};

}  // namespace

Expr ParseExpr(std::string_view text, int line, int column_offset) {
  return Parser(text, line, column_offset).Parse();
}

}  // namespace wnos
