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

// Abstract control problems and the line-oriented problem language.

#ifndef WNOS_PROBLEM_HPP_
#define WNOS_PROBLEM_HPP_

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wnos/expr.hpp"
#include "wnos/graph.hpp"

namespace wnos {

enum class QuantKind { kAll, kEvery, kOrdinal, kNone };

// Path quantifier. An ordinal selects the k-th member (1-based).
struct Quant {
  QuantKind kind = QuantKind::kNone;
  int ordinal = 0;

  static Quant All() { return {QuantKind::kAll, 0}; }
  static Quant Every() { return {QuantKind::kEvery, 0}; }
  static Quant None() { return {QuantKind::kNone, 0}; }
  static Quant Ordinal(int k) { return {QuantKind::kOrdinal, k}; }
  // Accepts all, every, none, one, or a positive integer.
  static Quant Parse(std::string_view text);
  std::string str() const;
  bool operator==(const Quant&) const = default;
};

enum class Role { kControl, kParam };

struct VarSpec {
  std::string name;
  std::vector<std::string> path;  // canonical element names
  std::vector<Quant> quants;
  Role role = Role::kControl;

  const std::string& terminal() const { return path.back(); }
  // Innermost quantified set element; its name is the index-set symbol the
  // variable carries after composition.
  std::string IndexSet() const;
  std::optional<Quant> IndexQuant() const;
  bool operator==(const VarSpec&) const = default;
};

enum class Sense { kMaximize, kMinimize };
enum class Relation { kLe, kLt, kGe, kGt };

std::string_view RelationText(Relation rel);

// Stored as lhs <= rhs. `surface_*` keep the written form over variable
// names for rendering.
struct Constraint {
  Expr lhs;
  Expr rhs;
  Expr surface_lhs;
  Relation surface_rel = Relation::kLe;
  Expr surface_rhs;
  // `every` set the constraint family ranges over, or "" for a single row.
  std::string family;
  bool operator==(const Constraint&) const = default;
};

// Box bound on every instance of `element` selected by (path, quants).
struct Bound {
  std::string element;
  std::vector<std::string> path;
  std::vector<Quant> quants;
  std::optional<double> lower;
  std::optional<double> upper;
  std::string var;  // declared variable when written as a constraint
  bool operator==(const Bound&) const = default;
};

enum class SettingKind { kValue, kMax, kMin };

struct Setting {
  std::vector<std::string> path;
  std::vector<Quant> quants;
  SettingKind kind = SettingKind::kValue;
  double value = 0.0;
  bool operator==(const Setting&) const = default;
};

enum class DistMethod { kBestResponse, kGradient, kDpl };
std::string_view DistMethodName(DistMethod m);
std::optional<DistMethod> DistMethodFromName(std::string_view name);

struct Directive {
  std::string cross = "dual";
  DistMethod dist = DistMethod::kBestResponse;
  bool operator==(const Directive&) const = default;
};

class ControlProblem {
 public:
  explicit ControlProblem(ElementGraph graph = BuiltinGraph()) : graph_(std::move(graph)) {}

  const ElementGraph& graph() const { return graph_; }

  std::string network = "adhoc";
  std::map<Layer, std::string> protocols;
  std::vector<VarSpec> vars;
  Sense sense = Sense::kMaximize;
  Expr utility_surface;
  std::optional<Expr> utility;
  std::vector<Constraint> constraints;
  std::vector<Setting> settings;
  std::vector<Bound> bounds;
  Directive directive;

  // Throws PathError when the path does not walk the graph.
  VarSpec& DeclareVar(const std::string& name, const std::vector<std::string>& path,
                      const std::vector<Quant>& quants, std::optional<Role> role = {});
  const VarSpec* FindVar(std::string_view name) const;

  // Elements some control-role variable terminates at, plus controllable
  // elements they depend on through models.
  std::vector<std::string> ControlElements() const;
  bool IsControlElement(std::string_view element) const;

  // Throws ValidationError.
  void Validate() const;

  bool operator==(const ControlProblem& other) const;

 private:
  ElementGraph graph_;
};

// Canonicalizes and checks a quantified path against the graph.
std::vector<std::string> ResolvePath(const ElementGraph& g, const std::vector<std::string>& path,
                                     const std::vector<Quant>& quants);

// Builds an expression over problem elements from a template over declared
// variable names. Each `sum(...)` ranges over the innermost `all` set of the
// variables it encloses.
Expr Compose(const ControlProblem& p, std::string_view text, int line = 1, int column = 0);
Expr ComposeExpr(const ControlProblem& p, const Expr& surface);

// Normalizes `>=`/`>` to `<=` by negating both sides.
Constraint Compare(const Expr& lhs, Relation rel, const Expr& rhs);

// Records a setting; caps and floors turn into box bounds on the attribute
// the path ends at (or the attribute it caps). Throws PathError.
void SetParam(ControlProblem& p, const std::vector<std::string>& path,
              const std::vector<Quant>& quants, SettingKind kind, double value);

ControlProblem ParseProblem(std::string_view source);
ControlProblem LoadProblem(const std::string& path);
std::string RenderProblem(const ControlProblem& p);

}  // namespace wnos

#endif  // WNOS_PROBLEM_HPP_
