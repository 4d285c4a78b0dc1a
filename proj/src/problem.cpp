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

#include "wnos/problem.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "wnos/error.hpp"
#include "wnos/expr_parse.hpp"

namespace wnos {

namespace {

std::string Lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> Split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string FormatValue(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::optional<double> ParseValue(std::string_view s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

bool IsSetPosition(const Element& e) { return !e.is_attribute(); }

}  // namespace

Quant Quant::Parse(std::string_view text) {
  std::string t = Lower(text);
  if (t == "all") return All();
  if (t == "every") return Every();
  if (t == "none") return None();
  if (t == "one") return Ordinal(1);
  int k = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), k);
  if (ec == std::errc() && ptr == t.data() + t.size() && k >= 1) return Ordinal(k);
  throw Error(ErrorKind::kPathError, "unknown quantifier '" + std::string(text) + "'");
}

std::string Quant::str() const {
  switch (kind) {
    case QuantKind::kAll: return "all";
    case QuantKind::kEvery: return "every";
    case QuantKind::kOrdinal: return std::to_string(ordinal);
    case QuantKind::kNone: return "none";
  }
  return "none";
}

std::string VarSpec::IndexSet() const {
  for (std::size_t i = path.size(); i-- > 0;) {
    if (quants[i].kind != QuantKind::kNone) return path[i];
  }
  return {};
}

std::optional<Quant> VarSpec::IndexQuant() const {
  for (std::size_t i = path.size(); i-- > 0;) {
    if (quants[i].kind != QuantKind::kNone) return quants[i];
  }
  return std::nullopt;
}

std::string_view RelationText(Relation rel) {
  switch (rel) {
    case Relation::kLe: return "<=";
    case Relation::kLt: return "<";
    case Relation::kGe: return ">=";
    case Relation::kGt: return ">";
  }
  return "<=";
}

std::string_view DistMethodName(DistMethod m) {
  switch (m) {
    case DistMethod::kBestResponse: return "best_response";
    case DistMethod::kGradient: return "gradient";
    case DistMethod::kDpl: return "dpl";
  }
  return "?";
}

std::optional<DistMethod> DistMethodFromName(std::string_view name) {
  std::string n = Lower(name);
  if (n == "best_response") return DistMethod::kBestResponse;
  if (n == "gradient") return DistMethod::kGradient;
  if (n == "dpl") return DistMethod::kDpl;
  return std::nullopt;
}

std::vector<std::string> ResolvePath(const ElementGraph& g, const std::vector<std::string>& path,
                                     const std::vector<Quant>& quants) {
  if (path.empty()) throw Error(ErrorKind::kPathError, "empty element path");
  if (quants.size() != path.size()) {
    throw Error(ErrorKind::kPathError, "path has " + std::to_string(path.size()) +
                                           " elements but " + std::to_string(quants.size()) +
                                           " quantifiers");
  }
  std::vector<std::string> out;
  for (const std::string& name : path) {
    const Element* e = g.find(name);
    if (!e) throw Error(ErrorKind::kPathError, "unknown element '" + name + "' in path");
    out.push_back(e->name);
  }
  for (std::size_t i = 0; i + 1 < out.size(); ++i) {
    if (!g.Step(out[i], out[i + 1])) {
      throw Error(ErrorKind::kPathError, "no edge from '" + out[i] + "' to '" + out[i + 1] + "'");
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    bool set_pos = IsSetPosition(g.at(out[i]));
    bool none = quants[i].kind == QuantKind::kNone;
    if (set_pos == none) {
      throw Error(ErrorKind::kPathError, "quantifier '" + quants[i].str() + "' does not fit '" +
                                             out[i] + "'");
    }
  }
  return out;
}

VarSpec& ControlProblem::DeclareVar(const std::string& name, const std::vector<std::string>& path,
                                    const std::vector<Quant>& quants, std::optional<Role> role) {
  if (FindVar(name)) throw Error(ErrorKind::kValidationError, "variable '" + name + "' redeclared");
  VarSpec v;
  v.name = name;
  v.path = ResolvePath(graph_, path, quants);
  v.quants = quants;
  const Element& term = graph_.at(v.terminal());
  if (!term.is_attribute()) {
    throw Error(ErrorKind::kPathError, "path of '" + name + "' must end at an attribute");
  }
  v.role = role.value_or(term.controllable ? Role::kControl : Role::kParam);
  vars.push_back(std::move(v));
  return vars.back();
}

const VarSpec* ControlProblem::FindVar(std::string_view name) const {
  for (const VarSpec& v : vars) {
    if (v.name == name) return &v;
  }
  return nullptr;
}

std::vector<std::string> ControlProblem::ControlElements() const {
  std::set<std::string> params, out;
  for (const VarSpec& v : vars) {
    if (v.role == Role::kParam) params.insert(v.terminal());
  }
  for (const VarSpec& v : vars) {
    if (v.role == Role::kControl) out.insert(v.terminal());
    for (const std::string& dep : graph_.ControlDeps(v.terminal())) {
      if (dep != v.terminal() && !params.count(dep)) out.insert(dep);
    }
  }
  return {out.begin(), out.end()};
}

bool ControlProblem::IsControlElement(std::string_view element) const {
  auto all = ControlElements();
  return std::find(all.begin(), all.end(), element) != all.end();
}

void ControlProblem::Validate() const {
  if (!utility) throw Error(ErrorKind::kValidationError, "missing utility");
  if (ControlElements().empty()) {
    throw Error(ErrorKind::kValidationError, "problem declares no control variable");
  }
  for (const Constraint& c : constraints) {
    for (const Expr* side : {&c.lhs, &c.rhs}) {
      for (const VarId& v : FreeVars(*side)) {
        if (!graph_.contains(v.base)) {
          throw Error(ErrorKind::kValidationError, "constraint uses unknown element '" + v.base + "'");
        }
      }
    }
  }
}

bool ControlProblem::operator==(const ControlProblem& o) const {
  return network == o.network && protocols == o.protocols && vars == o.vars &&
         sense == o.sense && utility_surface == o.utility_surface && utility == o.utility &&
         constraints == o.constraints && settings == o.settings && bounds == o.bounds &&
         directive == o.directive;
}

// ---------------------------------------------------------------------------
// Compose / Compare / SetParam

namespace {

void CollectSurfaceVars(const Expr& e, std::vector<std::string>& out) {
  if (e.kind() == NodeKind::kVariable) {
    out.push_back(e.var().str());
    return;
  }
  for (const Expr& c : e.children()) CollectSurfaceVars(c, out);
}

const VarSpec& Lookup(const ControlProblem& p, const std::string& name) {
  const VarSpec* v = p.FindVar(name);
  if (!v) throw Error(ErrorKind::kValidationError, "undeclared variable '" + name + "'");
  return *v;
}

Expr ComposeRec(const ControlProblem& p, const Expr& e) {
  switch (e.kind()) {
    case NodeKind::kConstant: return e;
    case NodeKind::kVariable: {
      const VarSpec& v = Lookup(p, e.var().str());
      if (v.IndexQuant() && v.IndexQuant()->kind == QuantKind::kOrdinal) {
        throw Error(ErrorKind::kValidationError,
                    "variable '" + v.name + "' selects a single member; use it in a bound");
      }
      return Expr::Variable(VarId(v.terminal(), std::nullopt, v.IndexSet()));
    }
    case NodeKind::kBigSum: {
      std::string set = e.index_set();
      if (set.empty()) {
        std::vector<std::string> names;
        CollectSurfaceVars(e.child(0), names);
        std::set<std::string> sets;
        for (const std::string& n : names) {
          const VarSpec& v = Lookup(p, n);
          for (std::size_t i = v.path.size(); i-- > 0;) {
            if (v.quants[i].kind == QuantKind::kAll) {
              sets.insert(v.path[i]);
              break;
            }
          }
        }
        if (sets.size() != 1) {
          throw Error(ErrorKind::kValidationError,
                      "sum() must range over exactly one 'all' set, found " +
                          std::to_string(sets.size()));
        }
        set = *sets.begin();
      }
      return Expr::BigSum(set, ComposeRec(p, e.child(0)));
    }
    default: {
      std::vector<Expr> kids;
      for (const Expr& c : e.children()) kids.push_back(ComposeRec(p, c));
      switch (e.kind()) {
        case NodeKind::kSum: return Expr::Sum(std::move(kids));
        case NodeKind::kProduct: return Expr::Product(std::move(kids));
        case NodeKind::kNegation: return Expr::Negate(kids[0]);
        case NodeKind::kQuotient: return Expr::Quotient(kids[0], kids[1]);
        case NodeKind::kFunction: return Expr::Function(e.func(), kids[0]);
        default: return e;
      }
    }
  }
}

std::string ConstraintFamily(const ControlProblem& p, const Expr& lhs, const Expr& rhs) {
  std::vector<std::string> names;
  CollectSurfaceVars(lhs, names);
  CollectSurfaceVars(rhs, names);
  std::set<std::string> families;
  for (const std::string& n : names) {
    const VarSpec& v = Lookup(p, n);
    for (std::size_t i = 0; i < v.path.size(); ++i) {
      if (v.quants[i].kind == QuantKind::kEvery) families.insert(v.path[i]);
    }
  }
  if (families.size() > 1) {
    throw Error(ErrorKind::kValidationError, "constraint ranges over more than one 'every' set");
  }
  return families.empty() ? std::string() : *families.begin();
}

}  // namespace

Expr ComposeExpr(const ControlProblem& p, const Expr& surface) { return ComposeRec(p, surface); }

Expr Compose(const ControlProblem& p, std::string_view text, int line, int column) {
  return ComposeRec(p, ParseExpr(text, line, column));
}

Constraint Compare(const Expr& lhs, Relation rel, const Expr& rhs) {
  Constraint c;
  c.surface_lhs = lhs;
  c.surface_rel = rel;
  c.surface_rhs = rhs;
  if (rel == Relation::kGe || rel == Relation::kGt) {
    c.lhs = FoldNegate(lhs);
    c.rhs = FoldNegate(rhs);
  } else {
    c.lhs = lhs;
    c.rhs = rhs;
  }
  return c;
}

void SetParam(ControlProblem& p, const std::vector<std::string>& path,
              const std::vector<Quant>& quants, SettingKind kind, double value) {
  std::vector<Quant> q = quants;
  if (q.empty()) {
    for (const std::string& name : path) {
      const Element* e = p.graph().find(name);
      q.push_back(e && !e->is_attribute() ? Quant::All() : Quant::None());
    }
  }
  Setting s;
  s.path = ResolvePath(p.graph(), path, q);
  s.quants = q;
  s.kind = kind;
  s.value = value;
  const Element& term = p.graph().at(s.path.back());
  if (!term.is_attribute()) {
    throw Error(ErrorKind::kPathError, "setting path must end at an attribute");
  }
  p.settings.push_back(s);

  Bound b;
  b.path = s.path;
  b.quants = s.quants;
  if (!term.bounds.empty()) {
    b.element = term.bounds;
    b.upper = value;
  } else if (term.controllable && kind != SettingKind::kValue) {
    b.element = term.name;
    (kind == SettingKind::kMax ? b.upper : b.lower) = value;
  } else {
    return;
  }
  p.bounds.push_back(std::move(b));
}

// ---------------------------------------------------------------------------
// Problem language

namespace {

struct Line {
  std::string_view text;
  int number;
};

class ProblemParser {
 public:
  explicit ProblemParser(std::string_view src) {
    int n = 0;
    std::size_t start = 0;
    while (start <= src.size()) {
      std::size_t end = src.find('\n', start);
      if (end == std::string_view::npos) end = src.size();
      ++n;
      std::string_view raw = src.substr(start, end - start);
      if (std::size_t hash = raw.find('#'); hash != std::string_view::npos) {
        raw = raw.substr(0, hash);
      }
      while (!raw.empty() && std::isspace(static_cast<unsigned char>(raw.back()))) {
        raw.remove_suffix(1);
      }
      lines_.push_back({raw, n});
      start = end + 1;
    }
  }

  ControlProblem Parse() {
    ControlProblem p;
    // Variables first, so expressions may use variables declared below them.
    for (const Line& l : lines_) {
      if (Keyword(l) == "var") Guard(l, [&] { ParseVar(p, l); });
    }
    for (const Line& l : lines_) {
      std::string kw = Keyword(l);
      if (kw.empty() || kw == "var") continue;
      Guard(l, [&] {
        if (kw == "network") {
          ParseNetwork(p, l);
        } else if (kw == "protocol") {
          ParseProtocol(p, l);
        } else if (kw == "utility") {
          ParseUtility(p, l);
        } else if (kw == "constraint") {
          ParseConstraint(p, l);
        } else if (kw == "set") {
          ParseSet(p, l);
        } else if (kw == "decompose") {
          ParseDecompose(p, l);
        } else {
          throw ParseError(l.number, Column(l, 0),
                           "statement (network, protocol, var, utility, constraint, set, "
                           "decompose)");
        }
      });
    }
    std::stable_partition(p.bounds.begin(), p.bounds.end(),
                          [](const Bound& b) { return b.var.empty(); });
    p.Validate();
    return p;
  }

 private:
  static std::string Keyword(const Line& l) {
    std::size_t i = 0;
    while (i < l.text.size() && std::isspace(static_cast<unsigned char>(l.text[i]))) ++i;
    std::size_t j = i;
    while (j < l.text.size() && !std::isspace(static_cast<unsigned char>(l.text[j]))) ++j;
    return std::string(l.text.substr(i, j - i));
  }

  static int Column(const Line& l, std::size_t offset) {
    std::size_t i = 0;
    while (i < l.text.size() && std::isspace(static_cast<unsigned char>(l.text[i]))) ++i;
    return static_cast<int>(i + offset) + 1;
  }

  // Rethrows non-parse errors with the line number attached.
  template <typename F>
  static void Guard(const Line& l, F&& fn) {
    try {
      fn();
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      std::string what = e.what();
      std::string prefix = std::string(ErrorKindName(e.kind())) + ": ";
      if (what.rfind(prefix, 0) == 0) what = what.substr(prefix.size());
      throw Error(e.kind(), "line " + std::to_string(l.number) + ": " + what);
    }
  }

  // Whitespace-separated words after the keyword, with their offsets.
  static std::vector<std::pair<std::string, std::size_t>> Words(const Line& l) {
    std::vector<std::pair<std::string, std::size_t>> out;
    std::size_t i = 0;
    while (i < l.text.size()) {
      while (i < l.text.size() && std::isspace(static_cast<unsigned char>(l.text[i]))) ++i;
      std::size_t j = i;
      while (j < l.text.size() && !std::isspace(static_cast<unsigned char>(l.text[j]))) ++j;
      if (j > i) out.emplace_back(std::string(l.text.substr(i, j - i)), i);
      i = j;
    }
    return out;
  }

  static std::map<std::string, std::string> KeyValues(
      const Line& l, const std::vector<std::pair<std::string, std::size_t>>& words,
      std::size_t first, const std::set<std::string>& allowed) {
    std::map<std::string, std::string> kv;
    for (std::size_t i = first; i < words.size(); ++i) {
      const auto& [w, off] = words[i];
      std::size_t eq = w.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw ParseError(l.number, static_cast<int>(off) + 1, "key=value");
      }
      std::string key = w.substr(0, eq);
      if (!allowed.count(key)) {
        throw ParseError(l.number, static_cast<int>(off) + 1, "one of the keys for this statement");
      }
      kv[key] = w.substr(eq + 1);
    }
    return kv;
  }

  static std::vector<Quant> Quants(const std::string& text) {
    std::vector<Quant> q;
    for (const std::string& part : Split(text, ',')) q.push_back(Quant::Parse(part));
    return q;
  }

  void ParseNetwork(ControlProblem& p, const Line& l) {
    auto w = Words(l);
    if (w.size() != 2) throw ParseError(l.number, Column(l, 8), "network setting name");
    if (Lower(w[1].first) != "adhoc") {
      throw Error(ErrorKind::kValidationError, "only 'adhoc' network settings are supported");
    }
    p.network = Lower(w[1].first);
  }

  void ParseProtocol(ControlProblem& p, const Line& l) {
    auto w = Words(l);
    if (w.size() != 3) throw ParseError(l.number, Column(l, 9), "protocol <layer> <name>");
    auto layer = LayerFromName(Lower(w[1].first));
    if (!layer || *layer == Layer::kNone) {
      throw ParseError(l.number, static_cast<int>(w[1].second) + 1, "layer name");
    }
    p.protocols[*layer] = Lower(w[2].first);
  }

  void ParseVar(ControlProblem& p, const Line& l) {
    auto w = Words(l);
    if (w.size() < 2) throw ParseError(l.number, Column(l, 4), "variable name");
    auto kv = KeyValues(l, w, 2, {"path", "quant", "role"});
    if (!kv.count("path")) throw ParseError(l.number, static_cast<int>(l.text.size()) + 1, "path=");
    std::vector<std::string> path = Split(kv["path"], '.');
    std::vector<Quant> quants;
    if (kv.count("quant")) {
      quants = Quants(kv["quant"]);
    } else {
      for (std::size_t i = 0; i < path.size(); ++i) {
        quants.push_back(i + 1 == path.size() ? Quant::None() : Quant::All());
      }
    }
    std::optional<Role> role;
    if (kv.count("role")) {
      std::string r = Lower(kv["role"]);
      if (r == "control") {
        role = Role::kControl;
      } else if (r == "param") {
        role = Role::kParam;
      } else {
        throw Error(ErrorKind::kValidationError, "role must be control or param");
      }
    }
    p.DeclareVar(w[1].first, path, quants, role);
  }

  void ParseUtility(ControlProblem& p, const Line& l) {
    if (p.utility) throw Error(ErrorKind::kValidationError, "utility defined twice");
    auto w = Words(l);
    if (w.size() < 3) throw ParseError(l.number, static_cast<int>(l.text.size()) + 1, "max|min <expr>");
    std::string sense = Lower(w[1].first);
    if (sense == "max") {
      p.sense = Sense::kMaximize;
    } else if (sense == "min") {
      p.sense = Sense::kMinimize;
    } else {
      throw ParseError(l.number, static_cast<int>(w[1].second) + 1, "max or min");
    }
    std::size_t off = w[2].second;
    p.utility_surface = ParseExpr(l.text.substr(off), l.number, static_cast<int>(off));
    p.utility = ComposeExpr(p, p.utility_surface);
  }

  void ParseConstraint(ControlProblem& p, const Line& l) {
    auto w = Words(l);
    if (w.size() < 2) throw ParseError(l.number, static_cast<int>(l.text.size()) + 1, "expression");
    std::size_t body = w[1].second;
    std::string_view text = l.text.substr(body);
    std::size_t pos = std::string_view::npos;
    std::size_t len = 0;
    Relation rel = Relation::kLe;
    int depth = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
      char c = text[i];
      if (c == '(') ++depth;
      if (c == ')') --depth;
      if (depth != 0 || (c != '<' && c != '>')) continue;
      if (pos != std::string_view::npos) {
        throw ParseError(l.number, static_cast<int>(body + i) + 1, "a single relation");
      }
      pos = i;
      bool eq = i + 1 < text.size() && text[i + 1] == '=';
      len = eq ? 2 : 1;
      rel = c == '<' ? (eq ? Relation::kLe : Relation::kLt) : (eq ? Relation::kGe : Relation::kGt);
      i += len - 1;
    }
    if (pos == std::string_view::npos) {
      throw ParseError(l.number, static_cast<int>(l.text.size()) + 1, "relation (<=, <, >=, >)");
    }
    Expr lhs = ParseExpr(text.substr(0, pos), l.number, static_cast<int>(body));
    Expr rhs = ParseExpr(text.substr(pos + len), l.number, static_cast<int>(body + pos + len));

    // A bare control variable against a constant is a box bound.
    auto bare_var = [&](const Expr& e) -> const VarSpec* {
      if (e.kind() != NodeKind::kVariable) return nullptr;
      const VarSpec* v = p.FindVar(e.var().str());
      return v && v->role == Role::kControl ? v : nullptr;
    };
    const VarSpec* v = bare_var(lhs);
    const VarSpec* v_rhs = bare_var(rhs);
    bool upper = rel == Relation::kLe || rel == Relation::kLt;
    if ((v && rhs.kind() == NodeKind::kConstant) || (v_rhs && lhs.kind() == NodeKind::kConstant)) {
      double value = v ? rhs.value() : lhs.value();
      if (!v) {
        v = v_rhs;
        upper = !upper;
      }
      Bound b;
      b.element = v->terminal();
      b.path = v->path;
      b.quants = v->quants;
      (upper ? b.upper : b.lower) = value;
      b.var = v->name;
      p.bounds.push_back(std::move(b));
      return;
    }
    Constraint c = Compare(ComposeExpr(p, lhs), rel, ComposeExpr(p, rhs));
    c.surface_lhs = lhs;
    c.surface_rhs = rhs;
    c.family = ConstraintFamily(p, lhs, rhs);
    p.constraints.push_back(std::move(c));
  }

  void ParseSet(ControlProblem& p, const Line& l) {
    auto w = Words(l);
    auto kv = KeyValues(l, w, 1, {"path", "quant", "value", "max", "min"});
    if (!kv.count("path")) throw ParseError(l.number, Column(l, 4), "path=");
    int given = static_cast<int>(kv.count("value") + kv.count("max") + kv.count("min"));
    if (given != 1) throw ParseError(l.number, Column(l, 4), "exactly one of value=, max=, min=");
    SettingKind kind = kv.count("value") ? SettingKind::kValue
                       : kv.count("max") ? SettingKind::kMax
                                         : SettingKind::kMin;
    const std::string& text = kv.count("value") ? kv["value"] : kv.count("max") ? kv["max"] : kv["min"];
    auto value = ParseValue(text);
    if (!value) throw ParseError(l.number, Column(l, 4), "numeric value");
    std::vector<Quant> quants;
    if (kv.count("quant")) quants = Quants(kv["quant"]);
    SetParam(p, Split(kv["path"], '.'), quants, kind, *value);
  }

  void ParseDecompose(ControlProblem& p, const Line& l) {
    auto w = Words(l);
    auto kv = KeyValues(l, w, 1, {"cross", "dist"});
    if (kv.count("cross")) {
      if (Lower(kv["cross"]) != "dual") {
        throw Error(ErrorKind::kValidationError, "only dual cross-layer decomposition is supported");
      }
      p.directive.cross = "dual";
    }
    if (kv.count("dist")) {
      auto m = DistMethodFromName(kv["dist"]);
      if (!m) throw Error(ErrorKind::kValidationError, "unknown distributed method '" + kv["dist"] + "'");
      p.directive.dist = *m;
    }
  }

  std::vector<Line> lines_;
};

std::string JoinPath(const std::vector<std::string>& path) {
  std::string out;
  for (std::size_t i = 0; i < path.size(); ++i) out += (i ? "." : "") + path[i];
  return out;
}

std::string JoinQuants(const std::vector<Quant>& q) {
  std::string out;
  for (std::size_t i = 0; i < q.size(); ++i) out += (i ? "," : "") + q[i].str();
  return out;
}

}  // namespace

ControlProblem ParseProblem(std::string_view source) { return ProblemParser(source).Parse(); }

ControlProblem LoadProblem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIoError, "cannot open problem file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return ParseProblem(ss.str());
  } catch (const ParseError& e) {
    throw Error(ErrorKind::kParseError, path + ": " + e.what());
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
}

std::string RenderProblem(const ControlProblem& p) {
  std::ostringstream out;
  out << "network " << p.network << "\n";
  for (const auto& [layer, name] : p.protocols) {
    out << "protocol " << LayerName(layer) << " " << name << "\n";
  }
  for (const VarSpec& v : p.vars) {
    out << "var " << v.name << " path=" << JoinPath(v.path) << " quant=" << JoinQuants(v.quants)
        << " role=" << (v.role == Role::kControl ? "control" : "param") << "\n";
  }
  for (const Setting& s : p.settings) {
    const char* key = s.kind == SettingKind::kValue ? "value" : s.kind == SettingKind::kMax ? "max" : "min";
    out << "set path=" << JoinPath(s.path) << " quant=" << JoinQuants(s.quants) << " " << key
        << "=" << FormatValue(s.value) << "\n";
  }
  if (p.utility) {
    out << "utility " << (p.sense == Sense::kMaximize ? "max" : "min") << " "
        << p.utility_surface.str() << "\n";
  }
  for (const Constraint& c : p.constraints) {
    out << "constraint " << c.surface_lhs.str() << " " << RelationText(c.surface_rel) << " "
        << c.surface_rhs.str() << "\n";
  }
  for (const Bound& b : p.bounds) {
    if (b.var.empty()) continue;
    if (b.upper) out << "constraint " << b.var << " <= " << FormatValue(*b.upper) << "\n";
    if (b.lower) out << "constraint " << b.var << " >= " << FormatValue(*b.lower) << "\n";
  }
  out << "decompose cross=" << p.directive.cross << " dist=" << DistMethodName(p.directive.dist)
      << "\n";
  return out.str();
}

}  // namespace wnos
