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

#include "wnos/decompose.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "wnos/error.hpp"

namespace wnos {

namespace {

std::vector<Expr> Addends(const Expr& e) {
  if (e.kind() == NodeKind::kSum) return {e.children().begin(), e.children().end()};
  return {e};
}

// Primitive the attribute hangs off, then the global enumerating it.
std::string EntitySetOf(const ElementGraph& g, const std::string& element) {
  std::string primitive;
  for (const Edge& e : g.edges()) {
    if (e.label == EdgeLabel::kHasAttribute && e.to == element &&
        g.at(e.from).kind == ElementKind::kPrimitive) {
      primitive = e.from;
      break;
    }
  }
  if (primitive.empty()) return {};
  for (const Edge& e : g.edges()) {
    if (e.label == EdgeLabel::kEachMemberIs && e.to == primitive && g.at(e.from).is_global()) {
      return e.from;
    }
  }
  return {};
}

// Term split into sign, non-dual factors and its dual factor (if exactly one).
struct TermParts {
  bool negative = false;
  std::vector<Expr> factors;
  std::optional<VarId> lambda;
};

TermParts Dissect(const Expr& term, const std::map<VarId, std::string>& duals) {
  TermParts t;
  Expr body = term;
  if (body.kind() == NodeKind::kNegation) {
    t.negative = true;
    body = body.child(0);
  }
  std::vector<Expr> factors = body.kind() == NodeKind::kProduct
                                  ? std::vector<Expr>(body.children().begin(), body.children().end())
                                  : std::vector<Expr>{body};
  for (const Expr& f : factors) {
    if (!t.lambda && f.kind() == NodeKind::kVariable && duals.count(f.var())) {
      t.lambda = f.var();
    } else {
      t.factors.push_back(f);
    }
  }
  if (!t.lambda) {
    t.factors = {body};
  }
  return t;
}

Expr Assemble(bool negative, const std::vector<Expr>& factors, const std::optional<Expr>& lam) {
  std::vector<Expr> all = factors;
  if (lam) all.push_back(*lam);
  Expr body = all.empty() ? Expr::Constant(1.0) : all.size() == 1 ? all.front() : Expr::Product(all);
  return negative ? Expr::Negate(body) : body;
}

struct Group {
  bool negative;
  std::vector<Expr> factors;
  std::vector<VarId> lambdas;  // empty: a term without dual
};

std::vector<Group> GroupTerms(const Subproblem& sub) {
  std::vector<Group> groups;
  for (const Expr& term : sub.terms) {
    TermParts t = Dissect(term, sub.dual_sets);
    if (!t.lambda) {
      groups.push_back({t.negative, t.factors, {}});
      continue;
    }
    auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) {
      return !g.lambdas.empty() && g.negative == t.negative && g.factors == t.factors &&
             g.lambdas.front().base == t.lambda->base;
    });
    if (it == groups.end()) {
      groups.push_back({t.negative, t.factors, {*t.lambda}});
    } else {
      it->lambdas.push_back(*t.lambda);
    }
  }
  return groups;
}

Expr LambdaExpr(const std::vector<VarId>& lambdas) {
  if (lambdas.size() == 1) return Expr::Variable(lambdas.front());
  std::vector<Expr> kids;
  for (const VarId& v : lambdas) kids.push_back(Expr::Variable(v));
  return Expr::Sum(std::move(kids));
}

std::string Join(const std::vector<std::string>& items) {
  std::string out;
  for (const std::string& s : items) out += (out.empty() ? "" : ", ") + s;
  return out;
}

// Rewrites variables carrying set `from` (or no index at all) to set `to`.
Expr Rebind(const Expr& e, const std::string& from, const std::string& to) {
  return MapVars(e, [&](const VarId& v) {
    if (!v.is_indexed() && (v.index_set == from || v.index_set.empty())) {
      return Expr::Variable(VarId(v.base, std::nullopt, to));
    }
    return Expr::Variable(v);
  });
}

Expr DiffOrThrow(const Expr& e, const VarId& v) {
  try {
    return Differentiate(e, v);
  } catch (const Error& err) {
    throw Error(ErrorKind::kNotDifferentiable,
                "cannot differentiate in '" + v.base + "': " + err.what());
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Dualize

std::string DualProblem::FamilyOf(const VarId& lambda) const {
  for (std::size_t i = 0; i < duals.size(); ++i) {
    if (duals[i] == lambda) return constraints[i].family;
  }
  throw Error(ErrorKind::kUnboundVariable, "not a dual: " + lambda.str());
}

bool DualProblem::IsDual(const VarId& v) const {
  return std::find(duals.begin(), duals.end(), v) != duals.end();
}

std::string DualProblem::Render() const {
  std::string out = "utility: " + utility.str() + "\n";
  for (std::size_t i = 0; i < constraints.size(); ++i) {
    const InstConstraint& c = constraints[i];
    const Expr& plus = sense == Sense::kMaximize ? c.rhs : c.lhs;
    const Expr& minus = sense == Sense::kMaximize ? c.lhs : c.rhs;
    std::vector<Expr> slack = Addends(plus);
    for (const Expr& t : Addends(minus)) slack.push_back(Expr::Negate(t));
    Expr row = Expr::Product({Expr::Sum(slack), Expr::Variable(duals[i])});
    out += duals[i].str() + ": " + row.str() + "\n";
  }
  return out;
}

DualProblem Dualize(const InstantiatedProblem& inst) {
  DualProblem d;
  d.sense = inst.sense;
  d.utility = inst.utility;
  d.constraints = inst.constraints;
  std::vector<Expr> parts = Addends(inst.utility);
  for (const InstConstraint& c : inst.constraints) {
    d.duals.push_back(c.dual);
    // Maximize: + lbd (rhs - lhs). Minimize: + lbd (lhs - rhs).
    const Expr& plus = inst.sense == Sense::kMaximize ? c.rhs : c.lhs;
    const Expr& minus = inst.sense == Sense::kMaximize ? c.lhs : c.rhs;
    std::vector<Expr> slack = Addends(plus);
    for (const Expr& t : Addends(minus)) slack.push_back(Expr::Negate(t));
    parts.push_back(Expr::Product({Expr::Sum(std::move(slack)), Expr::Variable(c.dual)}));
  }
  d.dual = inst.constraints.empty() ? inst.utility : Expr::Sum(std::move(parts));
  return d;
}

// ---------------------------------------------------------------------------
// Splitting

Expr Subproblem::collected() const {
  std::vector<Expr> out;
  for (const Group& g : GroupTerms(*this)) {
    std::optional<Expr> lam;
    if (!g.lambdas.empty()) lam = LambdaExpr(g.lambdas);
    out.push_back(Assemble(g.negative, g.factors, lam));
  }
  return MakeSum(std::move(out));
}

LayerSplit SplitByLayer(const DualProblem& dual, const ControlProblem& p) {
  const ElementGraph& g = p.graph();
  std::vector<std::string> controls = p.ControlElements();
  auto is_primal = [&](const std::string& base) {
    if (!g.contains(base)) return false;
    for (const std::string& dep : g.ControlDeps(base)) {
      if (std::find(controls.begin(), controls.end(), dep) != controls.end()) return true;
    }
    return false;
  };
  std::map<VarId, std::string> dual_sets;
  for (std::size_t i = 0; i < dual.duals.size(); ++i) {
    dual_sets[dual.duals[i]] = dual.constraints[i].family;
  }

  LayerSplit out;
  for (const Expr& term : Level1Terms(dual.dual)) {
    std::optional<Layer> layer;
    for (const VarId& v : FreeVars(term)) {
      if (dual_sets.count(v) || !is_primal(v.base)) continue;
      Layer l = g.at(v.base).layer;
      if (layer && *layer != l) {
        throw Error(ErrorKind::kAmbiguousLayer,
                    "term '" + term.str() + "' mixes " + std::string(LayerName(*layer)) + " and " +
                        std::string(LayerName(l)) + " variables");
      }
      layer = l;
    }
    if (!layer) {
      out.dual_terms.push_back(term);
      continue;
    }
    auto [it, fresh] = out.layers.try_emplace(*layer);
    Subproblem& sub = it->second;
    if (fresh) {
      sub.layer = *layer;
      sub.sense = dual.sense;
      sub.dual_sets = dual_sets;
    }
    sub.terms.push_back(term);
  }

  for (auto& [layer, sub] : out.layers) {
    std::set<VarId> owned, foreign;
    for (const Expr& t : sub.terms) {
      for (const VarId& v : FreeVars(t)) {
        if (!dual_sets.count(v) && is_primal(v.base)) {
          owned.insert(v);
        } else {
          foreign.insert(v);
        }
      }
    }
    sub.owned.assign(owned.begin(), owned.end());
    sub.foreign.assign(foreign.begin(), foreign.end());
  }
  return out;
}

std::vector<Subproblem> SplitByEntity(const Subproblem& layer_sub, const ElementGraph& g) {
  std::set<VarId> owned(layer_sub.owned.begin(), layer_sub.owned.end());
  std::map<std::pair<std::string, int>, Subproblem> groups;
  std::vector<std::pair<std::string, int>> order;

  for (const Expr& term : layer_sub.terms) {
    std::optional<std::pair<std::string, int>> key;
    for (const VarId& v : FreeVars(term)) {
      if (!owned.count(v)) continue;
      if (!v.is_indexed()) {
        throw Error(ErrorKind::kAmbiguousEntity,
                    "term '" + term.str() + "' has an unindexed variable " + v.base);
      }
      std::pair<std::string, int> k{EntitySetOf(g, v.base), *v.index};
      if (key && *key != k) {
        throw Error(ErrorKind::kAmbiguousEntity,
                    "term '" + term.str() + "' involves more than one entity");
      }
      key = k;
    }
    auto [it, fresh] = groups.try_emplace(*key);
    if (fresh) {
      order.push_back(*key);
      it->second.layer = layer_sub.layer;
      it->second.entity_set = key->first;
      it->second.index = key->second;
      it->second.sense = layer_sub.sense;
      it->second.dual_sets = layer_sub.dual_sets;
    }
    it->second.terms.push_back(term);
  }

  std::sort(order.begin(), order.end());
  std::vector<Subproblem> out;
  for (const auto& key : order) {
    Subproblem sub = std::move(groups.at(key));
    std::set<VarId> own, other;
    for (const Expr& t : sub.terms) {
      for (const VarId& v : FreeVars(t)) (owned.count(v) ? own : other).insert(v);
    }
    sub.owned.assign(own.begin(), own.end());
    sub.foreign.assign(other.begin(), other.end());
    out.push_back(std::move(sub));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Lifting

VarId AnchorOf(const std::string& control, const std::string& entity_set) {
  return VarId(control + "0", std::nullopt, entity_set);
}

ControlProgram LiftToAbstract(const Subproblem& sub, const InstanceMap& m,
                              const ControlProblem& p) {
  if (!sub.index) {
    throw Error(ErrorKind::kNoMatchingElement, "subproblem has no entity index");
  }
  const ElementGraph& g = p.graph();
  const std::string& set = sub.entity_set;
  const int self = *sub.index;

  ControlProgram prog;
  prog.layer = sub.layer;
  prog.entity_set = set;
  prog.sense = sub.sense;

  auto lift_var = [&](const VarId& v) -> Expr {
    if (v.is_indexed()) {
      if (*v.index != self) {
        throw Error(ErrorKind::kNoMatchingElement,
                    "variable " + v.str() + " belongs to another entity of " + set);
      }
      return Expr::Variable(VarId(v.base, std::nullopt, set));
    }
    return Expr::Variable(v);
  };

  std::string collection;
  std::vector<Expr> terms;
  for (const Group& grp : GroupTerms(sub)) {
    std::vector<Expr> factors;
    for (const Expr& f : grp.factors) factors.push_back(MapVars(f, lift_var));
    std::optional<Expr> lam;
    if (!grp.lambdas.empty()) {
      std::vector<int> ids;
      for (const VarId& v : grp.lambdas) ids.push_back(*v.index);
      std::sort(ids.begin(), ids.end());
      const std::string& base = grp.lambdas.front().base;
      const std::string& family = sub.dual_sets.at(grp.lambdas.front());
      std::string rule;
      if (ids.size() == 1 && ids.front() == self && family == set) {
        rule = "self";
        lam = Expr::Variable(VarId(base, std::nullopt, set));
      } else {
        for (const auto& [name, fam] : m.locals) {
          if (fam.owner_set != set || fam.member_set != family) continue;
          auto it = fam.members.find(self);
          if (it != fam.members.end() && it->second == ids) {
            rule = name;
            break;
          }
        }
        if (rule.empty()) {
          std::string list;
          for (int i : ids) list += (list.empty() ? "" : ",") + std::to_string(i);
          throw Error(ErrorKind::kNoMatchingElement,
                      "no local element of " + set + " " + std::to_string(self) +
                          " has members {" + list + "}");
        }
        lam = Expr::BigSum(rule, Expr::Variable(VarId(base, std::nullopt, rule)));
      }
      if (!collection.empty() && collection != rule) {
        throw Error(ErrorKind::kNoMatchingElement,
                    "duals collected from both " + collection + " and " + rule);
      }
      collection = rule;
      prog.dual_base = base;
    }
    terms.push_back(Assemble(grp.negative, factors, lam));
  }
  prog.objective = MakeSum(std::move(terms));
  prog.collection = collection;

  std::vector<std::string> controls = p.ControlElements();
  std::set<std::string> primal, ctrl;
  for (const VarId& v : sub.owned) {
    primal.insert(v.base);
    for (const std::string& dep : g.ControlDeps(v.base)) {
      if (std::find(controls.begin(), controls.end(), dep) != controls.end() &&
          EntitySetOf(g, dep) == set) {
        ctrl.insert(dep);
      }
    }
  }
  prog.primal.assign(primal.begin(), primal.end());
  prog.controls.assign(ctrl.begin(), ctrl.end());

  // Inline models of owned non-control elements, one level deep.
  Expr full = prog.objective;
  for (const std::string& el : prog.primal) {
    const Element& e = g.at(el);
    if (e.controllable || !e.model) continue;
    full = Substitute(full, VarId(el, std::nullopt, set), Rebind(*e.model, "", set));
  }
  prog.objective_full = full;
  prog.penalty = Expr::Constant(0.0);
  return prog;
}

// ---------------------------------------------------------------------------
// Penalization

namespace {

// Expression for the effect of the entity's control `c` on its peers'
// objectives, through a model that big-sums `c` over a local set:
//   sum_L( dO/dY * dY/dX * d(body)/dc )
// with O the objective, Y an objective element, X an element Y depends on
// whose model is sum_L(body). Peer values are read through L.
Expr CrossSensitivity(const ControlProgram& prog, const std::string& c, const ElementGraph& g) {
  const std::string& set = prog.entity_set;
  std::vector<Expr> parts;
  std::set<std::string> ys;
  for (const VarId& v : FreeVars(prog.objective)) {
    if (!v.is_indexed() && v.index_set == set) ys.insert(v.base);
  }
  for (const std::string& y : ys) {
    const Element* ye = g.find(y);
    if (!ye || !ye->model) continue;
    Expr y_model = Rebind(*ye->model, "", set);
    std::set<std::string> xs;
    for (const VarId& v : FreeVars(*ye->model)) xs.insert(v.base);
    for (const std::string& x : xs) {
      const Element* xe = g.find(x);
      if (!xe || !xe->model || xe->model->kind() != NodeKind::kBigSum) continue;
      const std::string& local = xe->model->index_set();
      const Expr& body = xe->model->child(0);
      Expr dbody = DiffOrThrow(body, VarId(c, std::nullopt, local));
      if (dbody.is_constant(0.0)) continue;
      Expr dO = DiffOrThrow(prog.objective, VarId(y, std::nullopt, set));
      Expr dY = DiffOrThrow(y_model, VarId(x, std::nullopt, set));
      Expr chain = FoldProduct({Rebind(dO, set, local), Rebind(dY, set, local), dbody});
      if (chain.is_constant(0.0)) continue;
      parts.push_back(Expr::BigSum(local, chain));
    }
  }
  return FoldSum(std::move(parts));
}

}  // namespace

ControlProgram Penalize(ControlProgram prog, DistMethod mode, const ElementGraph& g) {
  prog.mode = mode;
  prog.anchors.clear();
  if (mode == DistMethod::kBestResponse) {
    prog.penalty = Expr::Constant(0.0);
    return prog;
  }
  std::vector<Expr> parts;
  for (const std::string& c : prog.controls) {
    VarId own(c, std::nullopt, prog.entity_set);
    VarId anchor = AnchorOf(c, prog.entity_set);
    Expr delta = Expr::Sum({Expr::Variable(own), Expr::Negate(Expr::Variable(anchor))});
    bool anchored = false;
    Expr cross = CrossSensitivity(prog, c, g);
    if (!cross.is_constant(0.0)) {
      parts.push_back(Expr::Product({cross, delta}));
      anchored = true;
    }
    if (mode == DistMethod::kGradient) {
      // First-order model of the own objective around the anchor replaces
      // the exact one: add lin(x) - exact(x).
      Expr at_anchor = Substitute(prog.objective_full, own, Expr::Variable(anchor));
      Expr slope = Substitute(DiffOrThrow(prog.objective_full, own), own, Expr::Variable(anchor));
      parts.push_back(at_anchor);
      parts.push_back(Expr::Product({slope, delta}));
      parts.push_back(Expr::Negate(prog.objective_full));
      anchored = true;
    }
    if (anchored) prog.anchors.push_back(anchor);
  }
  prog.penalty = parts.empty() ? Expr::Constant(0.0) : MakeSum(std::move(parts));
  return prog;
}

std::string ControlProgram::Render() const {
  std::ostringstream os;
  os << "program " << LayerName(layer) << " " << entity_set << "\n";
  os << "  sense: " << (sense == Sense::kMaximize ? "max" : "min") << "\n";
  os << "  objective: " << objective.str() << "\n";
  os << "  collect: " << (collection.empty() ? "-" : collection) << "\n";
  os << "  primal: " << Join(primal) << "\n";
  os << "  controls: " << Join(controls) << "\n";
  os << "  mode: " << DistMethodName(mode) << "\n";
  os << "  full: " << objective_full.str() << "\n";
  os << "  penalty: " << penalty.str() << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

// Two templates agree on an entity when they evaluate alike on random
// values once expanded against the instance map.
bool Reproduces(const ControlProgram& prog, const Subproblem& sub, const InstanceMap& m) {
  Expr expanded = ExpandAgainst(prog.objective, m, sub.entity_set, *sub.index);
  Expr target = sub.objective();
  std::set<VarId> vars = FreeVars(expanded);
  for (const VarId& v : FreeVars(target)) vars.insert(v);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(0.5, 2.0);
  for (int trial = 0; trial < 3; ++trial) {
    Env env;
    for (const VarId& v : vars) env.set(v, dist(rng));
    double a = Eval(expanded, env), b = Eval(target, env);
    if (std::abs(a - b) > 1e-9 * (1.0 + std::abs(b))) return false;
  }
  return true;
}

}  // namespace

Decomposition Decompose(const ControlProblem& p, const InstanceMap& m,
                        const InstantiatedProblem& inst) {
  Decomposition out;
  out.dual = Dualize(inst);
  out.split = SplitByLayer(out.dual, p);
  for (const auto& [layer, sub] : out.split.layers) {
    for (Subproblem& e : SplitByEntity(sub, p.graph())) out.entities.push_back(std::move(e));
  }

  // Group entity programs by (layer, entity set); the most common template
  // wins and every other entity must be reproduced by it.
  std::map<std::pair<Layer, std::string>, std::vector<std::pair<ControlProgram, std::size_t>>> groups;
  for (std::size_t i = 0; i < out.entities.size(); ++i) {
    const Subproblem& sub = out.entities[i];
    groups[{sub.layer, sub.entity_set}].push_back({LiftToAbstract(sub, m, p), i});
  }
  for (auto& [key, progs] : groups) {
    std::vector<int> votes(progs.size(), 0);
    for (std::size_t a = 0; a < progs.size(); ++a) {
      for (std::size_t b = 0; b < progs.size(); ++b) votes[a] += progs[a].first == progs[b].first;
    }
    std::size_t best = std::max_element(votes.begin(), votes.end()) - votes.begin();
    const ControlProgram& chosen = progs[best].first;
    for (const auto& [prog, idx] : progs) {
      if (prog == chosen) continue;
      if (!Reproduces(chosen, out.entities[idx], m)) {
        throw Error(ErrorKind::kValidationError,
                    "entities of " + key.second + " lift to different programs: '" +
                        chosen.objective.str() + "' vs '" + prog.objective.str() + "'");
      }
    }
    out.programs.push_back(Penalize(chosen, p.directive.dist, p.graph()));
  }
  return out;
}

}  // namespace wnos
