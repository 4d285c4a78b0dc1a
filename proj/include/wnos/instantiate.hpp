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

// Disciplined instantiation of virtual elements.

#ifndef WNOS_INSTANTIATE_HPP_
#define WNOS_INSTANTIATE_HPP_

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wnos/expr.hpp"
#include "wnos/graph.hpp"
#include "wnos/problem.hpp"

namespace wnos {

struct InstanceConfig {
  int n_glb = 20;
  int n_lcl = 10;
  std::uint64_t seed = 1;
  int max_retries = 1000;
};

// FNV-1a 64 over the ascending members, each as 8 little-endian bytes.
std::uint64_t HashId(std::span<const int> members);
inline constexpr std::uint64_t kEmptyHashId = 0xcbf29ce484222325ULL;

// n choose k, saturating at UINT64_MAX.
std::uint64_t Binomial(int n, int k);

// Instances of one local element family, keyed by owner label.
struct LocalInstances {
  std::string element;     // e.g. lnkses
  std::string owner_set;   // global element enumerating the owners, e.g. netlnk
  std::string member_set;  // mother element, e.g. netses
  std::map<int, std::vector<int>> members;  // sorted
  std::map<int, std::uint64_t> hashes;
  bool derived = false;  // built by inversion, exempt from the cardinality rule

  // Adds `members` for `owner` unless a peer already holds the same sorted
  // sequence (hash filter, then equality). Returns false on rejection.
  bool Propose(int owner, std::vector<int> candidate);
  bool operator==(const LocalInstances&) const = default;
};

class InstanceMap {
 public:
  std::map<std::string, std::vector<int>> globals;
  std::map<std::string, LocalInstances> locals;

  const std::vector<int>& Global(const std::string& element) const;
  const LocalInstances& Local(const std::string& element) const;
  bool HasLocal(const std::string& element) const { return locals.count(element) > 0; }

  bool operator==(const InstanceMap&) const = default;
};

std::vector<int> InstantiateGlobal(const ElementGraph& g, const std::string& element,
                                   const InstanceConfig& cfg);

// Uniform random `n_lcl`-subset of `mother`, sorted.
std::vector<int> SampleLocal(std::span<const int> mother, int n_lcl, std::mt19937_64& rng);

// One instance per owner by peer random sampling with hash checking.
LocalInstances SampleFamily(const ElementGraph& g, const std::string& element,
                            const std::vector<int>& owners, const std::vector<int>& mother,
                            const InstanceConfig& cfg, std::mt19937_64& rng);

// Throws ValidationError unless Rules 1 and 2 and the no-proper-subset
// property hold.
void CheckRules(const LocalInstances& family, int n_lcl);

// Transposes `from` into its dual family `to`. Throws NotDual.
LocalInstances InvertMap(const ElementGraph& g, const InstanceMap& m, const std::string& from,
                         const std::string& to);

// Instantiates every element the problem references.
InstanceMap BuildInstanceMap(const ControlProblem& p, const InstanceConfig& cfg);

// Fixed instance for a local family plus its globals and derived dual.
InstanceMap InstanceMapFromTable(const ElementGraph& g, const std::string& element,
                                 const std::map<int, std::vector<int>>& table,
                                 const std::vector<int>& member_labels);

// Table layout: header line, then `owner<TAB>m1, m2, ...` per owner.
std::string DumpInstances(const LocalInstances& family);
std::map<int, std::vector<int>> ParseInstanceTable(const std::string& text);

struct InstConstraint {
  Expr lhs;
  Expr rhs;
  std::string family;  // owner set, or "" for a single row
  int member = -1;
  VarId dual;          // λ identifier
};

struct InstantiatedProblem {
  Sense sense = Sense::kMaximize;
  Expr utility;
  std::vector<InstConstraint> constraints;
};

// λ identifier of constraint `index` for family member `member`.
VarId DualId(int constraint_index, int member);

InstantiatedProblem InstantiateWithMap(const ControlProblem& p, const InstanceMap& m);
std::pair<InstantiatedProblem, InstanceMap> InstantiateProblem(const ControlProblem& p,
                                                               const InstanceConfig& cfg);

// Expands an expression with symbolic index sets against `m`; `owner`
// binds the set `owner_set` and selects local instances owned by it.
Expr ExpandAgainst(const Expr& e, const InstanceMap& m, const std::string& owner_set, int owner);

}  // namespace wnos

#endif  // WNOS_INSTANTIATE_HPP_
