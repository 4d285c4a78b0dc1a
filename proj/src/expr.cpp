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

#include "wnos/expr.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <utility>

#include "wnos/error.hpp"

namespace wnos {

struct Expr::Node {
  NodeKind kind = NodeKind::kConstant;
  double value = 0.0;
  VarId var;
  Func func = Func::kLn;
  std::string set;
  std::vector<Expr> children;
};

namespace {

std::string FormatNumber(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
  }
  return std::string(buf, end);
}

}  // namespace

std::string_view NodeKindName(NodeKind kind) {
  switch (kind) {
    case NodeKind::kConstant: return "constant";
    case NodeKind::kVariable: return "variable";
    case NodeKind::kSum: return "sum";
    case NodeKind::kProduct: return "product";
    case NodeKind::kNegation: return "negation";
    case NodeKind::kQuotient: return "quotient";
    case NodeKind::kFunction: return "function";
    case NodeKind::kBigSum: return "big-sum";
  }
  return "?";
}

std::string_view FuncName(Func f) {
  switch (f) {
    case Func::kLog2: return "log2";
    case Func::kLn: return "log";
    case Func::kSqrt: return "sqrt";
  }
  return "?";
}

std::optional<Func> FuncFromName(std::string_view name) {
  if (name == "log2") return Func::kLog2;
  if (name == "log" || name == "ln") return Func::kLn;
  if (name == "sqrt") return Func::kSqrt;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// VarId

VarId VarId::Parse(std::string_view text) {
  auto pos = text.rfind('_');
  if (pos != std::string_view::npos && pos > 0 && pos + 1 < text.size()) {
    std::string_view digits = text.substr(pos + 1);
    bool all_digits = true;
    for (char c : digits) all_digits = all_digits && (c >= '0' && c <= '9');
    if (all_digits && digits.size() <= 9) {
      int idx = 0;
      std::from_chars(digits.data(), digits.data() + digits.size(), idx);
      return VarId(std::string(text.substr(0, pos)), idx);
    }
  }
  return VarId(std::string(text));
}

std::string VarId::str() const {
  if (!index) return base;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "_%02d", *index);
  return base + buf;
}

std::size_t VarIdHash::operator()(const VarId& v) const noexcept {
  std::size_t h = std::hash<std::string>{}(v.base);
  h ^= std::hash<int>{}(v.index ? *v.index + 1 : 0) + 0x9e3779b97f4a7c15ULL +
       (h << 6) + (h >> 2);
  if (!v.index_set.empty()) {
    h ^= std::hash<std::string>{}(v.index_set) + 0x9e3779b97f4a7c15ULL +
         (h << 6) + (h >> 2);
  }
  return h;
}

// ---------------------------------------------------------------------------
// Construction

Expr::Expr() : Expr(Constant(0.0)) {}

Expr Expr::Constant(double value) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::kConstant;
  n->value = value;
  return Expr(std::move(n));
}

Expr Expr::Variable(VarId id) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::kVariable;
  n->var = std::move(id);
  return Expr(std::move(n));
}

Expr Expr::Var(std::string_view text) { return Variable(VarId::Parse(text)); }

Expr Expr::Sum(std::vector<Expr> children) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::kSum;
  n->children = std::move(children);
  return Expr(std::move(n));
}

Expr Expr::Product(std::vector<Expr> children) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::kProduct;
  n->children = std::move(children);
  return Expr(std::move(n));
}

Expr Expr::Negate(Expr child) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::kNegation;
  n->children.push_back(std::move(child));
  return Expr(std::move(n));
}

Expr Expr::Quotient(Expr numerator, Expr denominator) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::kQuotient;
  n->children.push_back(std::move(numerator));
  n->children.push_back(std::move(denominator));
  return Expr(std::move(n));
}

Expr Expr::Function(Func f, Expr argument) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::kFunction;
  n->func = f;
  n->children.push_back(std::move(argument));
  return Expr(std::move(n));
}

Expr Expr::BigSum(std::string index_set, Expr body) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::kBigSum;
  n->set = std::move(index_set);
  n->children.push_back(std::move(body));
  return Expr(std::move(n));
}

NodeKind Expr::kind() const { return node_->kind; }
double Expr::value() const { return node_->value; }
const VarId& Expr::var() const { return node_->var; }
Func Expr::func() const { return node_->func; }
const std::string& Expr::index_set() const { return node_->set; }
std::span<const Expr> Expr::children() const { return node_->children; }

bool Expr::is_constant(double v) const {
  return kind() == NodeKind::kConstant && value() == v;
}

bool Expr::operator==(const Expr& other) const {
  if (node_ == other.node_) return true;
  const Node& a = *node_;
  const Node& b = *other.node_;
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case NodeKind::kConstant: return a.value == b.value;
    case NodeKind::kVariable: return a.var == b.var;
    case NodeKind::kFunction:
      if (a.func != b.func) return false;
      break;
    case NodeKind::kBigSum:
      if (a.set != b.set) return false;
      break;
    default: break;
  }
  if (a.children.size() != b.children.size()) return false;
  for (std::size_t i = 0; i < a.children.size(); ++i) {
    if (a.children[i] != b.children[i]) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

void Render(const Expr& e, std::string& out);

void RenderParen(const Expr& e, bool paren, std::string& out) {
  if (paren) out += '(';
  Render(e, out);
  if (paren) out += ')';
}

// A bare "-c" reads back as a negative constant, so keep Neg(c) distinct.
bool NegOperandNeedsParens(const Expr& e) {
  if (e.kind() == NodeKind::kConstant) return !std::signbit(e.value());
  return e.kind() == NodeKind::kSum || e.kind() == NodeKind::kNegation;
}

void Render(const Expr& e, std::string& out) {
  switch (e.kind()) {
    case NodeKind::kConstant:
      if (e.value() < 0 || std::signbit(e.value())) {
        out += '(';
        out += FormatNumber(e.value());
        out += ')';
      } else {
        out += FormatNumber(e.value());
      }
      return;
    case NodeKind::kVariable:
      out += e.var().str();
      return;
    case NodeKind::kSum: {
      bool first = true;
      for (const Expr& c : e.children()) {
        if (c.kind() == NodeKind::kNegation) {
          out += first ? "-" : " - ";
          RenderParen(c.child(0), NegOperandNeedsParens(c.child(0)), out);
        } else {
          if (!first) out += " + ";
          RenderParen(c, c.kind() == NodeKind::kSum, out);
        }
        first = false;
      }
      if (first) out += "0";
      return;
    }
    case NodeKind::kProduct: {
      bool first = true;
      for (const Expr& c : e.children()) {
        if (!first) out += " * ";
        NodeKind k = c.kind();
        RenderParen(c,
                    k == NodeKind::kSum || k == NodeKind::kNegation ||
                        k == NodeKind::kQuotient || k == NodeKind::kProduct,
                    out);
        first = false;
      }
      if (first) out += "1";
      return;
    }
    case NodeKind::kNegation:
      out += '-';
      RenderParen(e.child(0), NegOperandNeedsParens(e.child(0)), out);
      return;
    case NodeKind::kQuotient: {
      NodeKind nk = e.child(0).kind();
      RenderParen(e.child(0), nk == NodeKind::kSum || nk == NodeKind::kNegation,
                  out);
      out += " / ";
      NodeKind dk = e.child(1).kind();
      RenderParen(e.child(1),
                  dk == NodeKind::kSum || dk == NodeKind::kNegation ||
                      dk == NodeKind::kProduct || dk == NodeKind::kQuotient,
                  out);
      return;
    }
    case NodeKind::kFunction:
      out += FuncName(e.func());
      out += '(';
      Render(e.child(0), out);
      out += ')';
      return;
    case NodeKind::kBigSum:
      out += "sum(";
      Render(e.child(0), out);
      out += ')';
      return;
  }
}

}  // namespace

std::string Expr::str() const {
  std::string out;
  Render(*this, out);
  return out;
}

// ---------------------------------------------------------------------------
// Folding builders

Expr FoldSum(std::vector<Expr> terms) {
  std::vector<Expr> kept;
  kept.reserve(terms.size());
  for (auto& t : terms) {
    if (!t.is_constant(0.0)) kept.push_back(std::move(t));
  }
  if (kept.empty()) return Expr::Constant(0.0);
  if (kept.size() == 1) return kept.front();
  return Expr::Sum(std::move(kept));
}

Expr FoldProduct(std::vector<Expr> factors) {
  std::vector<Expr> kept;
  kept.reserve(factors.size());
  for (auto& f : factors) {
    if (f.is_constant(0.0)) return Expr::Constant(0.0);
    if (!f.is_constant(1.0)) kept.push_back(std::move(f));
  }
  if (kept.empty()) return Expr::Constant(1.0);
  if (kept.size() == 1) return kept.front();
  return Expr::Product(std::move(kept));
}

Expr FoldNegate(Expr e) {
  if (e.kind() == NodeKind::kConstant) return Expr::Constant(-e.value() + 0.0);
  if (e.kind() == NodeKind::kNegation) return e.child(0);
  return Expr::Negate(std::move(e));
}

Expr FoldQuotient(Expr num, Expr den) {
  if (num.is_constant(0.0)) return Expr::Constant(0.0);
  if (den.is_constant(1.0)) return num;
  return Expr::Quotient(std::move(num), std::move(den));
}

Expr MakeSum(std::vector<Expr> terms) {
  if (terms.empty()) return Expr::Constant(0.0);
  if (terms.size() == 1) return terms.front();
  return Expr::Sum(std::move(terms));
}

namespace {

void AppendFlat(NodeKind kind, const Expr& e, std::vector<Expr>& out) {
  if (e.kind() == kind) {
    for (const Expr& c : e.children()) out.push_back(c);
  } else {
    out.push_back(e);
  }
}

}  // namespace

Expr operator+(const Expr& a, const Expr& b) {
  std::vector<Expr> terms;
  AppendFlat(NodeKind::kSum, a, terms);
  terms.push_back(b);
  return Expr::Sum(std::move(terms));
}

Expr operator-(const Expr& a, const Expr& b) {
  std::vector<Expr> terms;
  AppendFlat(NodeKind::kSum, a, terms);
  terms.push_back(Expr::Negate(b));
  return Expr::Sum(std::move(terms));
}

Expr operator*(const Expr& a, const Expr& b) {
  std::vector<Expr> factors;
  AppendFlat(NodeKind::kProduct, a, factors);
  factors.push_back(b);
  return Expr::Product(std::move(factors));
}

Expr operator/(const Expr& a, const Expr& b) { return Expr::Quotient(a, b); }

Expr operator-(const Expr& a) { return Expr::Negate(a); }

// ---------------------------------------------------------------------------
// Env and evaluation

Env::Env(std::initializer_list<std::pair<const std::string, double>> values) {
  for (const auto& [k, v] : values) set(k, v);
}

const double* Env::find(const VarId& id) const {
  auto it = values_.find(id);
  return it == values_.end() ? nullptr : &it->second;
}

double Env::at(const VarId& id) const {
  const double* v = find(id);
  if (!v) throw Error(ErrorKind::kUnboundVariable, id.str());
  return *v;
}

double Eval(const Expr& e, const Env& env) {
  switch (e.kind()) {
    case NodeKind::kConstant: return e.value();
    case NodeKind::kVariable: return env.at(e.var());
    case NodeKind::kSum: {
      double s = 0.0;
      for (const Expr& c : e.children()) s += Eval(c, env);
      return s;
    }
    case NodeKind::kProduct: {
      double p = 1.0;
      for (const Expr& c : e.children()) p *= Eval(c, env);
      return p;
    }
    case NodeKind::kNegation: return -Eval(e.child(0), env);
    case NodeKind::kQuotient: {
      double num = Eval(e.child(0), env);
      double den = Eval(e.child(1), env);
      if (den == 0.0) throw Error(ErrorKind::kDomainError, "division by zero in " + e.str());
      return num / den;
    }
    case NodeKind::kFunction: {
      double x = Eval(e.child(0), env);
      switch (e.func()) {
        case Func::kLog2:
          if (!(x > 0.0)) throw Error(ErrorKind::kDomainError, "log2 of non-positive value");
          return std::log2(x);
        case Func::kLn:
          if (!(x > 0.0)) throw Error(ErrorKind::kDomainError, "log of non-positive value");
          return std::log(x);
        case Func::kSqrt:
          if (x < 0.0) throw Error(ErrorKind::kDomainError, "sqrt of negative value");
          return std::sqrt(x);
      }
      break;
    }
    case NodeKind::kBigSum:
      throw Error(ErrorKind::kUnsupportedNode,
                  "big-sum over '" + e.index_set() + "' must be expanded before evaluation");
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Free variables and traversal helpers

namespace {

void CollectVars(const Expr& e, std::set<VarId>& out) {
  if (e.kind() == NodeKind::kVariable) {
    out.insert(e.var());
    return;
  }
  for (const Expr& c : e.children()) CollectVars(c, out);
}

Expr Rebuild(const Expr& e, std::vector<Expr> children) {
  switch (e.kind()) {
    case NodeKind::kSum: return Expr::Sum(std::move(children));
    case NodeKind::kProduct: return Expr::Product(std::move(children));
    case NodeKind::kNegation: return Expr::Negate(std::move(children[0]));
    case NodeKind::kQuotient:
      return Expr::Quotient(std::move(children[0]), std::move(children[1]));
    case NodeKind::kFunction: return Expr::Function(e.func(), std::move(children[0]));
    case NodeKind::kBigSum: return Expr::BigSum(e.index_set(), std::move(children[0]));
    default: return e;
  }
}

}  // namespace

std::set<VarId> FreeVars(const Expr& expr) {
  std::set<VarId> out;
  CollectVars(expr, out);
  return out;
}

Expr MapVars(const Expr& e, const std::function<Expr(const VarId&)>& fn) {
  if (e.kind() == NodeKind::kVariable) return fn(e.var());
  if (e.kind() == NodeKind::kConstant) return e;
  std::vector<Expr> kids;
  kids.reserve(e.children().size());
  for (const Expr& c : e.children()) kids.push_back(MapVars(c, fn));
  return Rebuild(e, std::move(kids));
}

Expr Substitute(const Expr& expr, const VarId& var, const Expr& replacement) {
  return MapVars(expr, [&](const VarId& v) {
    return v == var ? replacement : Expr::Variable(v);
  });
}

Expr BindIndex(const Expr& e, const std::string& set, int index) {
  switch (e.kind()) {
    case NodeKind::kConstant: return e;
    case NodeKind::kVariable:
      if (e.var().index_set == set) {
        VarId v = e.var();
        v.index = index;
        v.index_set.clear();
        return Expr::Variable(std::move(v));
      }
      return e;
    case NodeKind::kBigSum:
      if (e.index_set() == set) return e;  // shadowed
      [[fallthrough]];
    default: {
      std::vector<Expr> kids;
      kids.reserve(e.children().size());
      for (const Expr& c : e.children()) kids.push_back(BindIndex(c, set, index));
      return Rebuild(e, std::move(kids));
    }
  }
}

Expr ExpandSums(const Expr& e,
                const std::map<std::string, std::vector<int>>& bindings) {
  switch (e.kind()) {
    case NodeKind::kConstant:
    case NodeKind::kVariable: return e;
    case NodeKind::kBigSum: {
      auto it = bindings.find(e.index_set());
      if (it == bindings.end()) {
        throw Error(ErrorKind::kUnboundIndexSet, e.index_set());
      }
      std::vector<Expr> bodies;
      bodies.reserve(it->second.size());
      for (int idx : it->second) {
        bodies.push_back(ExpandSums(BindIndex(e.child(0), e.index_set(), idx), bindings));
      }
      return MakeSum(std::move(bodies));
    }
    default: {
      std::vector<Expr> kids;
      kids.reserve(e.children().size());
      for (const Expr& c : e.children()) kids.push_back(ExpandSums(c, bindings));
      return Rebuild(e, std::move(kids));
    }
  }
}

bool ContainsBigSum(const Expr& e) {
  if (e.kind() == NodeKind::kBigSum) return true;
  for (const Expr& c : e.children()) {
    if (ContainsBigSum(c)) return true;
  }
  return false;
}

std::size_t NodeCount(const Expr& e) {
  std::size_t n = 1;
  for (const Expr& c : e.children()) n += NodeCount(c);
  return n;
}

// ---------------------------------------------------------------------------
// Differentiation

Expr Differentiate(const Expr& e, const VarId& var) {
  switch (e.kind()) {
    case NodeKind::kConstant: return Expr::Constant(0.0);
    case NodeKind::kVariable: return Expr::Constant(e.var() == var ? 1.0 : 0.0);
    case NodeKind::kSum: {
      std::vector<Expr> parts;
      for (const Expr& c : e.children()) parts.push_back(Differentiate(c, var));
      return FoldSum(std::move(parts));
    }
    case NodeKind::kNegation: return FoldNegate(Differentiate(e.child(0), var));
    case NodeKind::kProduct: {
      auto kids = e.children();
      std::vector<Expr> parts;
      for (std::size_t i = 0; i < kids.size(); ++i) {
        Expr d = Differentiate(kids[i], var);
        if (d.is_constant(0.0)) continue;
        std::vector<Expr> factors;
        for (std::size_t j = 0; j < kids.size(); ++j) {
          factors.push_back(j == i ? d : kids[j]);
        }
        parts.push_back(FoldProduct(std::move(factors)));
      }
      return FoldSum(std::move(parts));
    }
    case NodeKind::kQuotient: {
      const Expr& u = e.child(0);
      const Expr& w = e.child(1);
      Expr du = Differentiate(u, var);
      Expr dw = Differentiate(w, var);
      if (dw.is_constant(0.0)) return FoldQuotient(du, w);
      Expr num = FoldSum({FoldProduct({du, w}), FoldNegate(FoldProduct({u, dw}))});
      return FoldQuotient(num, Expr::Product({w, w}));
    }
    case NodeKind::kFunction: {
      const Expr& u = e.child(0);
      Expr du = Differentiate(u, var);
      if (du.is_constant(0.0)) return Expr::Constant(0.0);
      switch (e.func()) {
        case Func::kLog2:
          return FoldQuotient(du, Expr::Product({u, Expr::Constant(std::numbers::ln2)}));
        case Func::kLn: return FoldQuotient(du, u);
        case Func::kSqrt:
          return FoldQuotient(du, Expr::Product({Expr::Constant(2.0), e}));
      }
      break;
    }
    case NodeKind::kBigSum: {
      // A big-sum whose body never mentions the variable's base is constant
      // in it; anything else needs expansion first.
      for (const VarId& v : FreeVars(e.child(0))) {
        if (v.base == var.base) {
          throw Error(ErrorKind::kUnsupportedNode,
                      "cannot differentiate unexpanded big-sum over '" + e.index_set() + "'");
        }
      }
      return Expr::Constant(0.0);
    }
  }
  throw Error(ErrorKind::kUnsupportedNode, std::string(NodeKindName(e.kind())));
}

// ---------------------------------------------------------------------------
// Level-1 terms: distribute products and quotients over sums, carry
// negations into the terms.

namespace {

struct SignedTerm {
  bool negative = false;
  std::vector<Expr> factors;  // product of these; empty means 1
};

Expr Materialize(const SignedTerm& t) {
  Expr body = t.factors.empty()       ? Expr::Constant(1.0)
              : t.factors.size() == 1 ? t.factors.front()
                                      : Expr::Product(t.factors);
  return t.negative ? Expr::Negate(body) : body;
}

std::vector<SignedTerm> Terms(const Expr& e) {
  switch (e.kind()) {
    case NodeKind::kConstant:
      if (e.value() == 0.0) return {};
      return {SignedTerm{false, {e}}};
    case NodeKind::kSum: {
      std::vector<SignedTerm> out;
      for (const Expr& c : e.children()) {
        auto sub = Terms(c);
        out.insert(out.end(), sub.begin(), sub.end());
      }
      return out;
    }
    case NodeKind::kNegation: {
      auto out = Terms(e.child(0));
      for (auto& t : out) t.negative = !t.negative;
      return out;
    }
    case NodeKind::kProduct: {
      std::vector<SignedTerm> acc{SignedTerm{}};
      for (const Expr& f : e.children()) {
        auto sub = Terms(f);
        std::vector<SignedTerm> next;
        next.reserve(acc.size() * sub.size());
        for (const auto& a : acc) {
          for (const auto& b : sub) {
            SignedTerm t;
            t.negative = a.negative != b.negative;
            t.factors = a.factors;
            t.factors.insert(t.factors.end(), b.factors.begin(), b.factors.end());
            next.push_back(std::move(t));
          }
        }
        acc = std::move(next);
      }
      return acc;
    }
    case NodeKind::kQuotient: {
      auto out = Terms(e.child(0));
      for (auto& t : out) {
        Expr num = t.factors.empty()       ? Expr::Constant(1.0)
                   : t.factors.size() == 1 ? t.factors.front()
                                           : Expr::Product(t.factors);
        t.factors = {Expr::Quotient(num, e.child(1))};
      }
      return out;
    }
    default: return {SignedTerm{false, {e}}};
  }
}

}  // namespace

std::vector<Expr> Level1Terms(const Expr& expr) {
  std::vector<Expr> out;
  for (const auto& t : Terms(expr)) out.push_back(Materialize(t));
  return out;
}

}  // namespace wnos
