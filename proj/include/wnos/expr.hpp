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

// Immutable symbolic expression trees.
//
// An Expr is a cheap handle to a shared, immutable node. Variables carry an
// indexed identifier: a base name, an optional concrete entity index and an
// optional symbolic index set. A symbolic index refers to the member bound
// by an enclosing big-sum over that set (or by a constraint-family
// quantifier); expand_sums() and bind_index() turn symbolic indices into
// concrete ones.
//
// Canonical rendering is infix with the minimum parentheses needed for the
// expression parser to rebuild the same tree:
//
//   sesrate_04 - sesrate_04 * (lbd_00 + lbd_03)
//   freq * log2(1 + lnkpwr * lnkgain / (lnknoise + lnkgain_itf * itfpwr))
//   sesrate - sesrate * sum(lbd)

#ifndef WNOS_EXPR_HPP_
#define WNOS_EXPR_HPP_

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace wnos {

enum class NodeKind {
  kConstant,
  kVariable,
  kSum,
  kProduct,
  kNegation,
  kQuotient,
  kFunction,
  kBigSum,
};

enum class Func { kLog2, kLn, kSqrt };

std::string_view NodeKindName(NodeKind kind);
// DSL spelling: log2, log (natural), sqrt.
std::string_view FuncName(Func f);
std::optional<Func> FuncFromName(std::string_view name);

struct VarId {
  std::string base;
  std::optional<int> index;
  std::string index_set;

  VarId() = default;
  explicit VarId(std::string b, std::optional<int> i = std::nullopt,
                 std::string set = {})
      : base(std::move(b)), index(i), index_set(std::move(set)) {}

  // Splits a trailing `_NN` into the entity index: "sesrate_04" -> (sesrate, 4).
  static VarId Parse(std::string_view text);

  bool is_indexed() const { return index.has_value(); }
  bool is_symbolic() const { return !index_set.empty(); }
  // `base_NN` with a zero-padded two-digit index, or the bare base.
  std::string str() const;

  auto operator<=>(const VarId&) const = default;
};

struct VarIdHash {
  std::size_t operator()(const VarId& v) const noexcept;
};

class Expr {
 public:
  // The constant 0.
  Expr();

  static Expr Constant(double value);
  static Expr Variable(VarId id);
  static Expr Var(std::string_view text);  // VarId::Parse convenience
  static Expr Sum(std::vector<Expr> children);
  static Expr Product(std::vector<Expr> children);
  static Expr Negate(Expr child);
  static Expr Quotient(Expr numerator, Expr denominator);
  static Expr Function(Func f, Expr argument);
  static Expr BigSum(std::string index_set, Expr body);

  NodeKind kind() const;
  double value() const;          // kConstant
  const VarId& var() const;      // kVariable
  Func func() const;             // kFunction
  const std::string& index_set() const;  // kBigSum
  std::span<const Expr> children() const;
  const Expr& child(std::size_t i) const { return children()[i]; }

  bool is_constant(double v) const;
  bool IsAdditive() const { return kind() == NodeKind::kSum; }

  // Structural equality.
  bool operator==(const Expr& other) const;
  bool operator!=(const Expr& other) const { return !(*this == other); }

  std::string str() const;

 private:
  struct Node;
  explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

// Builders that fold the 0/1 identities (x+0, x*1, x*0, -(-x), -c) and
// nothing else. Raw constructors above never fold.
Expr FoldSum(std::vector<Expr> terms);
Expr FoldProduct(std::vector<Expr> factors);
Expr FoldNegate(Expr e);
Expr FoldQuotient(Expr num, Expr den);

// Explicit sum in the given order: 0 terms -> 0, 1 term -> the term itself.
Expr MakeSum(std::vector<Expr> terms);

Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);

class Env {
 public:
  Env() = default;
  Env(std::initializer_list<std::pair<const std::string, double>> values);

  void set(const VarId& id, double value) { values_[id] = value; }
  void set(std::string_view text, double value) { set(VarId::Parse(text), value); }
  const double* find(const VarId& id) const;
  double at(const VarId& id) const;
  std::size_t size() const { return values_.size(); }

 private:
  std::unordered_map<VarId, double, VarIdHash> values_;
};

double Eval(const Expr& expr, const Env& env);
Expr Differentiate(const Expr& expr, const VarId& var);
Expr ExpandSums(const Expr& expr,
                const std::map<std::string, std::vector<int>>& bindings);
std::vector<Expr> Level1Terms(const Expr& expr);
std::set<VarId> FreeVars(const Expr& expr);

// Replaces the symbolic index `set` by the concrete index `index` in every
// variable not shadowed by an inner big-sum over the same set.
Expr BindIndex(const Expr& expr, const std::string& set, int index);

// Rebuilds the tree with every variable replaced by fn(var).
Expr MapVars(const Expr& expr, const std::function<Expr(const VarId&)>& fn);

Expr Substitute(const Expr& expr, const VarId& var, const Expr& replacement);

bool ContainsBigSum(const Expr& expr);

// Number of nodes; used by tests that check structural sizes.
std::size_t NodeCount(const Expr& expr);

}  // namespace wnos

#endif  // WNOS_EXPR_HPP_
