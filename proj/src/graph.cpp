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

#include "wnos/graph.hpp"

#include <algorithm>
#include <array>
#include <deque>
#include <functional>
#include <set>

#include "wnos/error.hpp"
#include "wnos/expr_parse.hpp"

namespace wnos {

namespace {

constexpr std::array<std::pair<Layer, std::string_view>, 6> kLayerNames{{
    {Layer::kNone, "none"},
    {Layer::kApplication, "application"},
    {Layer::kTransport, "transport"},
    {Layer::kNetwork, "network"},
    {Layer::kDatalink, "datalink"},
    {Layer::kPhysical, "physical"},
}};

}  // namespace

std::string_view LayerName(Layer layer) {
  for (const auto& [l, n] : kLayerNames) {
    if (l == layer) return n;
  }
  return "none";
}

std::optional<Layer> LayerFromName(std::string_view name) {
  for (const auto& [l, n] : kLayerNames) {
    if (n == name) return l;
  }
  return std::nullopt;
}

std::string_view EdgeLabelName(EdgeLabel label) {
  switch (label) {
    case EdgeLabel::kHasAttribute: return "has-attribute";
    case EdgeLabel::kEachMemberIs: return "each-member-is";
    case EdgeLabel::kIsFunctionOf: return "is-function-of";
  }
  return "?";
}

std::string_view EntityTypeName(EntityType type) {
  switch (type) {
    case EntityType::kNode: return "node";
    case EntityType::kLink: return "link";
    case EntityType::kSession: return "session";
    case EntityType::kAttribute: return "attribute";
  }
  return "?";
}

void ElementGraph::Add(Element element) {
  if (index_.count(element.name) || aliases_.count(element.name)) {
    throw Error(ErrorKind::kValidationError, "duplicate element '" + element.name + "'");
  }
  index_.emplace(element.name, elements_.size());
  elements_.push_back(std::move(element));
}

void ElementGraph::Connect(const std::string& from, EdgeLabel label, const std::string& to) {
  edges_.push_back({Canonical(from), label, Canonical(to)});
}

void ElementGraph::AddAlias(const std::string& alias, const std::string& target) {
  if (index_.count(alias)) {
    throw Error(ErrorKind::kValidationError, "alias '" + alias + "' shadows an element");
  }
  aliases_[alias] = Canonical(target);
}

const std::string& ElementGraph::Canonical(std::string_view name) const {
  if (auto it = index_.find(name); it != index_.end()) return elements_[it->second].name;
  if (auto it = aliases_.find(name); it != aliases_.end()) return it->second;
  throw Error(ErrorKind::kUnknownElement, "no element named '" + std::string(name) + "'");
}

const Element* ElementGraph::find(std::string_view name) const {
  if (auto it = aliases_.find(name); it != aliases_.end()) name = it->second;
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &elements_[it->second];
}

const Element& ElementGraph::at(std::string_view name) const {
  const Element* e = find(name);
  if (!e) throw Error(ErrorKind::kUnknownElement, "no element named '" + std::string(name) + "'");
  return *e;
}

std::vector<const Element*> ElementGraph::Read(std::string_view name, EdgeLabel label) const {
  const std::string& from = Canonical(name);
  std::vector<const Element*> out;
  for (const Edge& e : edges_) {
    if (e.from == from && e.label == label) out.push_back(&at(e.to));
  }
  return out;
}

bool ElementGraph::HasEdge(std::string_view from, EdgeLabel label, std::string_view to) const {
  const Element* a = find(from);
  const Element* b = find(to);
  if (!a || !b) return false;
  return std::any_of(edges_.begin(), edges_.end(), [&](const Edge& e) {
    return e.from == a->name && e.label == label && e.to == b->name;
  });
}

std::string ElementGraph::MemberOf(std::string_view name) const {
  for (const Element* m : Read(name, EdgeLabel::kEachMemberIs)) return m->name;
  return {};
}

bool ElementGraph::Step(std::string_view from, std::string_view to) const {
  if (HasEdge(from, EdgeLabel::kHasAttribute, to)) return true;
  std::string member = MemberOf(from);
  return !member.empty() && HasEdge(member, EdgeLabel::kHasAttribute, to);
}

std::vector<std::string> ElementGraph::ControlDeps(std::string_view name) const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  std::deque<std::string> todo{Canonical(name)};
  while (!todo.empty()) {
    std::string cur = todo.front();
    todo.pop_front();
    if (!seen.insert(cur).second) continue;
    if (at(cur).controllable) out.push_back(cur);
    for (const Element* dep : Read(cur, EdgeLabel::kIsFunctionOf)) todo.push_back(dep->name);
  }
  return out;
}

void ElementGraph::Validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::kValidationError, msg); };
  for (const Edge& e : edges_) {
    const Element& a = at(e.from);
    const Element& b = at(e.to);
    if (e.label == EdgeLabel::kEachMemberIs &&
        (a.kind != ElementKind::kVirtual || b.kind != ElementKind::kPrimitive)) {
      fail("each-member-is edge " + a.name + " -> " + b.name +
           " must run from a virtual to a primitive element");
    }
  }
  for (const Element& el : elements_) {
    if (el.kind == ElementKind::kVirtual) {
      if (el.scope == Scope::kNone) fail("virtual element '" + el.name + "' has no scope");
      if (MemberOf(el.name).empty()) fail("virtual element '" + el.name + "' has no member type");
      if (el.is_local()) {
        const Element* mother = find(el.mother);
        if (!mother || !mother->is_global()) {
          fail("local element '" + el.name + "' needs a global mother element");
        }
        if (MemberOf(mother->name) != MemberOf(el.name)) {
          fail("local element '" + el.name + "' and its mother have different member types");
        }
        const Element* owner = find(el.owner);
        if (!owner || owner->kind != ElementKind::kPrimitive || owner->is_attribute()) {
          fail("local element '" + el.name + "' needs a primitive owner");
        }
        if (!el.dual.empty()) {
          const Element* d = find(el.dual);
          if (!d || d->dual != el.name) fail("dual of '" + el.name + "' is not reciprocal");
        }
      }
    }
    std::set<std::string> fn_edges;
    for (const Element* dep : Read(el.name, EdgeLabel::kIsFunctionOf)) fn_edges.insert(dep->name);
    std::set<std::string> model_vars;
    if (el.model) {
      for (const VarId& v : FreeVars(*el.model)) {
        const Element* dep = find(v.base);
        if (!dep) fail("model of '" + el.name + "' uses unknown element '" + v.base + "'");
        model_vars.insert(dep->name);
      }
    }
    if (fn_edges != model_vars) {
      fail("is-function-of edges of '" + el.name + "' disagree with its model");
    }
  }
  // has-attribute restricted graph must be acyclic.
  std::map<std::string, int> state;
  std::function<void(const std::string&)> visit = [&](const std::string& n) {
    state[n] = 1;
    for (const Element* next : Read(n, EdgeLabel::kHasAttribute)) {
      int s = state[next->name];
      if (s == 1) fail("has-attribute cycle through '" + next->name + "'");
      if (s == 0) visit(next->name);
    }
    state[n] = 2;
  };
  for (const Element& el : elements_) {
    if (state[el.name] == 0) visit(el.name);
  }
}

namespace {

ElementGraph MakeBuiltin() {
  ElementGraph g;
  auto primitive = [&](std::string name, EntityType t) {
    Element e;
    e.name = std::move(name);
    e.entity = t;
    g.Add(std::move(e));
  };
  auto attr = [&](std::string name, Layer layer, bool controllable = false,
                  const char* model = nullptr) {
    Element e;
    e.name = std::move(name);
    e.layer = layer;
    e.controllable = controllable;
    if (model) e.model = ParseExpr(model);
    return e;
  };
  auto global = [&](std::string name, EntityType t) {
    Element e;
    e.name = std::move(name);
    e.kind = ElementKind::kVirtual;
    e.entity = t;
    e.scope = Scope::kGlobal;
    g.Add(std::move(e));
  };
  auto local = [&](std::string name, EntityType t, std::string mother, std::string owner,
                   std::string dual = {}) {
    Element e;
    e.name = std::move(name);
    e.kind = ElementKind::kVirtual;
    e.entity = t;
    e.scope = Scope::kLocal;
    e.mother = std::move(mother);
    e.owner = std::move(owner);
    e.dual = std::move(dual);
    g.Add(std::move(e));
  };

  primitive("Node", EntityType::kNode);
  primitive("Link", EntityType::kLink);
  primitive("Session", EntityType::kSession);

  g.Add(attr("sesrate", Layer::kTransport, true));
  g.Add(attr("lnkpwr", Layer::kPhysical, true));
  g.Add(attr("freq", Layer::kPhysical));
  g.Add(attr("lnkgain", Layer::kPhysical));
  g.Add(attr("lnknoise", Layer::kPhysical));
  g.Add(attr("lnkgain_itf", Layer::kPhysical));
  g.Add(attr("xgain", Layer::kPhysical));
  Element itf = attr("itfpwr", Layer::kPhysical);
  itf.model = Expr::BigSum(
      "itflnk", Expr::Product({Expr::Variable(VarId("xgain", std::nullopt, "itflnk")),
                               Expr::Variable(VarId("lnkpwr", std::nullopt, "itflnk"))}));
  g.Add(std::move(itf));
  g.Add(attr("lnksinr", Layer::kPhysical, false,
             "lnkpwr * lnkgain / (lnknoise + lnkgain_itf * itfpwr)"));
  g.Add(attr("lnkcap", Layer::kPhysical, false, kLinkCapacityModel));
  Element maxpwr = attr("maxpwr", Layer::kPhysical);
  maxpwr.bounds = "lnkpwr";
  g.Add(std::move(maxpwr));

  global("netnd", EntityType::kNode);
  global("netlnk", EntityType::kLink);
  global("netses", EntityType::kSession);
  local("nbrnd", EntityType::kNode, "netnd", "Node");
  local("lnkses", EntityType::kSession, "netses", "Link", "seslnk");
  local("seslnk", EntityType::kLink, "netlnk", "Session", "lnkses");
  local("lnknd", EntityType::kLink, "netlnk", "Node");
  local("itflnk", EntityType::kLink, "netlnk", "Link");

  using L = EdgeLabel;
  for (const char* a : {"Link", "maxpwr", "nbrnd", "lnknd"}) g.Connect("Node", L::kHasAttribute, a);
  for (const char* a : {"lnkcap", "lnkpwr", "lnksinr", "freq", "lnkgain", "lnknoise", "itfpwr",
                        "lnkgain_itf", "xgain", "lnkses", "itflnk"}) {
    g.Connect("Link", L::kHasAttribute, a);
  }
  for (const char* a : {"sesrate", "seslnk"}) g.Connect("Session", L::kHasAttribute, a);

  g.Connect("netnd", L::kEachMemberIs, "Node");
  g.Connect("netlnk", L::kEachMemberIs, "Link");
  g.Connect("netses", L::kEachMemberIs, "Session");
  g.Connect("nbrnd", L::kEachMemberIs, "Node");
  g.Connect("lnkses", L::kEachMemberIs, "Session");
  g.Connect("seslnk", L::kEachMemberIs, "Link");
  g.Connect("lnknd", L::kEachMemberIs, "Link");
  g.Connect("itflnk", L::kEachMemberIs, "Link");

  for (const Element& el : std::vector<Element>(g.elements())) {
    if (!el.model) continue;
    std::set<std::string> deps;
    for (const VarId& v : FreeVars(*el.model)) deps.insert(v.base);
    for (const std::string& d : deps) g.Connect(el.name, L::kIsFunctionOf, d);
  }

  g.AddAlias("ntses", "netses");
  g.AddAlias("ntlk", "netlnk");
  g.AddAlias("lkpwr", "lnkpwr");
  g.Validate();
  return g;
}

}  // namespace

const ElementGraph& BuiltinGraph() {
  static const ElementGraph graph = MakeBuiltin();
  return graph;
}

}  // namespace wnos
