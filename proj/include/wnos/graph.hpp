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

// Network abstraction: primitive and virtual elements connected by a
// labeled multigraph.

#ifndef WNOS_GRAPH_HPP_
#define WNOS_GRAPH_HPP_

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wnos/expr.hpp"

namespace wnos {

enum class ElementKind { kPrimitive, kVirtual };
enum class EntityType { kNode, kLink, kSession, kAttribute };
enum class Scope { kNone, kGlobal, kLocal };
enum class Layer { kNone, kApplication, kTransport, kNetwork, kDatalink, kPhysical };
enum class EdgeLabel { kHasAttribute, kEachMemberIs, kIsFunctionOf };

std::string_view LayerName(Layer layer);
std::optional<Layer> LayerFromName(std::string_view name);
std::string_view EdgeLabelName(EdgeLabel label);
std::string_view EntityTypeName(EntityType type);

struct Element {
  std::string name;
  ElementKind kind = ElementKind::kPrimitive;
  EntityType entity = EntityType::kAttribute;
  Scope scope = Scope::kNone;
  Layer layer = Layer::kNone;
  std::optional<Expr> model;

  // Local virtual elements only.
  std::string mother;  // global element the members are drawn from
  std::string owner;   // primitive each instance belongs to
  std::string dual;    // family with transposed membership, if any

  bool controllable = false;  // a decision the stack can write
  std::string bounds;         // attribute this parameter caps from above

  bool is_attribute() const { return entity == EntityType::kAttribute; }
  bool is_local() const { return scope == Scope::kLocal; }
  bool is_global() const { return scope == Scope::kGlobal; }
};

struct Edge {
  std::string from;
  EdgeLabel label;
  std::string to;
};

class ElementGraph {
 public:
  void Add(Element element);
  void Connect(const std::string& from, EdgeLabel label, const std::string& to);
  void AddAlias(const std::string& alias, const std::string& target);

  // Resolves aliases. Throws UnknownElement.
  const std::string& Canonical(std::string_view name) const;
  const Element& at(std::string_view name) const;
  const Element* find(std::string_view name) const;
  bool contains(std::string_view name) const { return find(name) != nullptr; }

  // Out-neighbours of `name` along `label`.
  std::vector<const Element*> Read(std::string_view name, EdgeLabel label) const;
  bool HasEdge(std::string_view from, EdgeLabel label, std::string_view to) const;

  // One step of a quantified path: `to` is an attribute of `from`, or of
  // the primitive each member of `from` is.
  bool Step(std::string_view from, std::string_view to) const;
  // Primitive named by the each-member-is edge of a virtual element, or "".
  std::string MemberOf(std::string_view name) const;
  // Controllable elements reachable over is-function-of edges (including
  // the element itself).
  std::vector<std::string> ControlDeps(std::string_view name) const;

  // Checks edge-label invariants; throws ValidationError.
  void Validate() const;

  const std::vector<Element>& elements() const { return elements_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::map<std::string, std::string, std::less<>>& aliases() const { return aliases_; }

 private:
  std::vector<Element> elements_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::map<std::string, std::string, std::less<>> aliases_;
  std::vector<Edge> edges_;
};

// Link capacity model shared by the abstraction and the simulator.
inline constexpr const char* kLinkCapacityModel =
    "freq * log2(1 + lnkpwr * lnkgain / (lnknoise + lnkgain_itf * itfpwr))";

// Stock graph for ad hoc networks.
const ElementGraph& BuiltinGraph();

}  // namespace wnos

#endif  // WNOS_GRAPH_HPP_
