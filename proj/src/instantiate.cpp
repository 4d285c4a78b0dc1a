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

#include "wnos/instantiate.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <set>
#include <sstream>

#include "wnos/error.hpp"

namespace wnos {

std::uint64_t HashId(std::span<const int> members) {
  std::vector<int> sorted(members.begin(), members.end());
  std::sort(sorted.begin(), sorted.end());
  std::uint64_t h = kEmptyHashId;
  for (int m : sorted) {
    auto v = static_cast<std::uint64_t>(static_cast<std::int64_t>(m));
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::uint64_t Binomial(int n, int k) {
  if (k < 0 || n < 0 || k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 r = 1;
  for (int i = 1; i <= k; ++i) {
    r = r * static_cast<unsigned>(n - k + i) / static_cast<unsigned>(i);
    if (r > std::numeric_limits<std::uint64_t>::max()) return std::numeric_limits<std::uint64_t>::max();
  }
  return static_cast<std::uint64_t>(r);
}

bool LocalInstances::Propose(int owner, std::vector<int> candidate) {
  std::sort(candidate.begin(), candidate.end());
  std::uint64_t h = HashId(candidate);
  for (const auto& [other, oh] : hashes) {
    if (other == owner || oh != h) continue;
    if (members.at(other) == candidate) return false;
  }
  members[owner] = std::move(candidate);
  hashes[owner] = h;
  return true;
}

const std::vector<int>& InstanceMap::Global(const std::string& element) const {
  auto it = globals.find(element);
  if (it == globals.end()) {
    throw Error(ErrorKind::kUnboundIndexSet, "no instance for global element '" + element + "'");
  }
  return it->second;
}

const LocalInstances& InstanceMap::Local(const std::string& element) const {
  auto it = locals.find(element);
  if (it == locals.end()) {
    throw Error(ErrorKind::kUnboundIndexSet, "no instance for local element '" + element + "'");
  }
  return it->second;
}

std::vector<int> InstantiateGlobal(const ElementGraph& g, const std::string& element,
                                   const InstanceConfig& cfg) {
  const Element& e = g.at(element);
  if (!e.is_global()) throw Error(ErrorKind::kNotGlobal, "'" + e.name + "' is not a global element");
  if (cfg.n_glb < 1) throw Error(ErrorKind::kCardinalityError, "N_glb must be positive");
  std::vector<int> out(cfg.n_glb);
  for (int i = 0; i < cfg.n_glb; ++i) out[i] = i;
  return out;
}

std::vector<int> SampleLocal(std::span<const int> mother, int n_lcl, std::mt19937_64& rng) {
  if (n_lcl < 1 || static_cast<std::size_t>(n_lcl) > mother.size()) {
    throw Error(ErrorKind::kCardinalityError,
                "cannot draw " + std::to_string(n_lcl) + " members from a set of " +
                    std::to_string(mother.size()));
  }
  std::vector<int> pool(mother.begin(), mother.end());
  for (int i = 0; i < n_lcl; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(n_lcl);
  std::sort(pool.begin(), pool.end());
  return pool;
}

namespace {

// Global element whose members are the owners of local element `e`.
std::string OwnerSet(const ElementGraph& g, const Element& e) {
  for (const Element& cand : g.elements()) {
    if (cand.is_global() && g.MemberOf(cand.name) == e.owner) return cand.name;
  }
  throw Error(ErrorKind::kValidationError, "no global element enumerates owners of '" + e.name + "'");
}

const Element& RequireLocal(const ElementGraph& g, const std::string& name) {
  const Element& e = g.at(name);
  if (!e.is_local()) throw Error(ErrorKind::kValidationError, "'" + e.name + "' is not a local element");
  return e;
}

}  // namespace

LocalInstances SampleFamily(const ElementGraph& g, const std::string& element,
                            const std::vector<int>& owners, const std::vector<int>& mother,
                            const InstanceConfig& cfg, std::mt19937_64& rng) {
  const Element& e = RequireLocal(g, element);
  LocalInstances fam;
  fam.element = e.name;
  fam.owner_set = OwnerSet(g, e);
  fam.member_set = e.mother;
  if (cfg.n_lcl > static_cast<int>(mother.size())) {
    throw Error(ErrorKind::kCardinalityError, "N_lcl exceeds the mother set of '" + e.name + "'");
  }
  std::uint64_t capacity = Binomial(static_cast<int>(mother.size()), cfg.n_lcl);
  if (owners.size() > capacity) {
    throw Error(ErrorKind::kCapacityExceeded,
                std::to_string(owners.size()) + " instances requested for '" + e.name +
                    "' but only " + std::to_string(capacity) + " distinct subsets exist");
  }
  for (int owner : owners) {
    int rejected = 0;
    while (!fam.Propose(owner, SampleLocal(mother, cfg.n_lcl, rng))) {
      if (++rejected > cfg.max_retries) {
        throw Error(ErrorKind::kRetryExhausted, "no unique instance for owner " +
                                                    std::to_string(owner) + " of '" + e.name +
                                                    "' after " + std::to_string(cfg.max_retries) +
                                                    " retries");
      }
    }
  }
  return fam;
}

void CheckRules(const LocalInstances& fam, int n_lcl) {
  auto fail = [&](const std::string& msg) {
    throw Error(ErrorKind::kValidationError, fam.element + ": " + msg);
  };
  std::set<std::uint64_t> seen_hash;
  std::set<std::vector<int>> seen;
  for (const auto& [owner, m] : fam.members) {
    if (!fam.derived && static_cast<int>(m.size()) != n_lcl) {
      fail("instance of owner " + std::to_string(owner) + " has cardinality " +
           std::to_string(m.size()));
    }
    if (!std::is_sorted(m.begin(), m.end())) fail("instance is not sorted");
    if (fam.hashes.at(owner) != HashId(m)) fail("stale hash id");
    if (!fam.derived) {
      if (!seen_hash.insert(fam.hashes.at(owner)).second) fail("duplicate hash id");
      if (!seen.insert(m).second) fail("duplicate instance");
    }
  }
  if (fam.derived) return;
  for (const auto& [a, ma] : fam.members) {
    for (const auto& [b, mb] : fam.members) {
      if (a == b || ma.size() >= mb.size()) continue;
      if (std::includes(mb.begin(), mb.end(), ma.begin(), ma.end())) fail("proper subset");
    }
  }
}

LocalInstances InvertMap(const ElementGraph& g, const InstanceMap& m, const std::string& from,
                         const std::string& to) {
  const Element& f = RequireLocal(g, from);
  const Element& t = RequireLocal(g, to);
  if (f.dual != t.name) {
    throw Error(ErrorKind::kNotDual, "'" + f.name + "' and '" + t.name + "' are not duals");
  }
  const LocalInstances& src = m.Local(f.name);
  LocalInstances out;
  out.element = t.name;
  out.owner_set = src.member_set;
  out.member_set = src.owner_set;
  out.derived = true;
  for (int k : m.Global(src.member_set)) out.members[k];
  for (const auto& [owner, members] : src.members) {
    for (int k : members) out.members[k].push_back(owner);
  }
  for (auto& [k, members] : out.members) {
    std::sort(members.begin(), members.end());
    out.hashes[k] = HashId(members);
  }
  return out;
}

namespace {

void CollectSets(const Expr& e, std::set<std::string>& out) {
  if (e.kind() == NodeKind::kBigSum) out.insert(e.index_set());
  if (e.kind() == NodeKind::kVariable && !e.var().index_set.empty()) out.insert(e.var().index_set);
  for (const Expr& c : e.children()) CollectSets(c, out);
}

}  // namespace

InstanceMap BuildInstanceMap(const ControlProblem& p, const InstanceConfig& cfg) {
  const ElementGraph& g = p.graph();
  std::set<std::string> referenced;
  if (p.utility) CollectSets(*p.utility, referenced);
  for (const Constraint& c : p.constraints) {
    CollectSets(c.lhs, referenced);
    CollectSets(c.rhs, referenced);
    if (!c.family.empty()) referenced.insert(c.family);
  }
  std::set<std::string> globals, locals;
  for (const std::string& name : referenced) {
    const Element& e = g.at(name);
    if (e.is_global()) {
      globals.insert(e.name);
    } else if (e.is_local()) {
      locals.insert(e.name);
      globals.insert(e.mother);
      globals.insert(OwnerSet(g, e));
    }
  }
  InstanceMap m;
  for (const std::string& name : globals) m.globals[name] = InstantiateGlobal(g, name, cfg);
  std::mt19937_64 rng(cfg.seed);
  for (const std::string& name : locals) {
    const Element& e = g.at(name);
    if (m.locals.count(name)) continue;
    m.locals[name] =
        SampleFamily(g, name, m.Global(OwnerSet(g, e)), m.Global(e.mother), cfg, rng);
    if (!e.dual.empty() && !m.locals.count(e.dual)) {
      m.locals[e.dual] = InvertMap(g, m, name, e.dual);
    }
  }
  return m;
}

InstanceMap InstanceMapFromTable(const ElementGraph& g, const std::string& element,
                                 const std::map<int, std::vector<int>>& table,
                                 const std::vector<int>& member_labels) {
  const Element& e = RequireLocal(g, element);
  InstanceMap m;
  LocalInstances fam;
  fam.element = e.name;
  fam.owner_set = OwnerSet(g, e);
  fam.member_set = e.mother;
  std::vector<int> owners;
  for (const auto& [owner, members] : table) {
    owners.push_back(owner);
    if (!fam.Propose(owner, members)) {
      throw Error(ErrorKind::kValidationError,
                  "instance of owner " + std::to_string(owner) + " duplicates a peer");
    }
  }
  m.globals[fam.owner_set] = owners;
  m.globals[fam.member_set] = member_labels;
  m.locals[fam.element] = std::move(fam);
  if (!e.dual.empty()) m.locals[e.dual] = InvertMap(g, m, e.name, e.dual);
  return m;
}

std::string DumpInstances(const LocalInstances& fam) {
  std::ostringstream out;
  out << fam.owner_set << "\t" << fam.element << "\n";
  for (const auto& [owner, members] : fam.members) {
    out << owner << "\t";
    for (std::size_t i = 0; i < members.size(); ++i) out << (i ? ", " : "") << members[i];
    out << "\n";
  }
  return out.str();
}

std::map<int, std::vector<int>> ParseInstanceTable(const std::string& text) {
  std::map<int, std::vector<int>> out;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  auto parse_int = [&](std::string_view s, int col) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw ParseError(number, col, "integer");
    return v;
  };
  while (std::getline(in, line)) {
    ++number;
    std::string_view l(line);
    if (l.find_first_not_of(" \t\r") == std::string_view::npos || l[0] == '#') continue;
    std::size_t tab = l.find_first_of(" \t");
    std::string_view head = l.substr(0, tab);
    if (head.empty() || !std::isdigit(static_cast<unsigned char>(head[0]))) {
      if (out.empty()) continue;  // header
      throw ParseError(number, 1, "owner index");
    }
    int owner = parse_int(head, 1);
    std::vector<int> members;
    if (tab != std::string_view::npos) {
      std::string_view rest = l.substr(tab + 1);
      std::size_t start = 0;
      while (start < rest.size()) {
        std::size_t comma = rest.find(',', start);
        std::string_view item = rest.substr(start, comma == std::string_view::npos ? comma : comma - start);
        if (item.find_first_not_of(" \t\r") != std::string_view::npos) {
          members.push_back(parse_int(item, static_cast<int>(tab + start) + 2));
        }
        if (comma == std::string_view::npos) break;
        start = comma + 1;
      }
    }
    std::sort(members.begin(), members.end());
    out[owner] = std::move(members);
  }
  return out;
}

VarId DualId(int constraint_index, int member) {
  std::string base = constraint_index == 0 ? "lbd" : "lbd" + std::to_string(constraint_index + 1);
  return member < 0 ? VarId(base) : VarId(base, member);
}

Expr ExpandAgainst(const Expr& e, const InstanceMap& m, const std::string& owner_set, int owner) {
  Expr bound = owner_set.empty() ? e : BindIndex(e, owner_set, owner);
  std::set<std::string> sets;
  CollectSets(bound, sets);
  std::map<std::string, std::vector<int>> bindings;
  for (const std::string& s : sets) {
    if (auto it = m.globals.find(s); it != m.globals.end()) {
      bindings[s] = it->second;
    } else if (auto lt = m.locals.find(s); lt != m.locals.end() && lt->second.owner_set == owner_set) {
      auto mt = lt->second.members.find(owner);
      if (mt == lt->second.members.end()) {
        throw Error(ErrorKind::kUnboundIndexSet,
                    "no '" + s + "' instance for owner " + std::to_string(owner));
      }
      bindings[s] = mt->second;
    }
  }
  return ExpandSums(bound, bindings);
}

InstantiatedProblem InstantiateWithMap(const ControlProblem& p, const InstanceMap& m) {
  p.Validate();
  InstantiatedProblem out;
  out.sense = p.sense;
  out.utility = ExpandAgainst(*p.utility, m, "", 0);
  for (std::size_t ci = 0; ci < p.constraints.size(); ++ci) {
    const Constraint& c = p.constraints[ci];
    int index = static_cast<int>(ci);
    if (c.family.empty()) {
      out.constraints.push_back({ExpandAgainst(c.lhs, m, "", 0), ExpandAgainst(c.rhs, m, "", 0),
                                 "", -1, DualId(index, -1)});
      continue;
    }
    for (int j : m.Global(c.family)) {
      out.constraints.push_back({ExpandAgainst(c.lhs, m, c.family, j),
                                 ExpandAgainst(c.rhs, m, c.family, j), c.family, j,
                                 DualId(index, j)});
    }
  }
  return out;
}

std::pair<InstantiatedProblem, InstanceMap> InstantiateProblem(const ControlProblem& p,
                                                               const InstanceConfig& cfg) {
  InstanceMap m = BuildInstanceMap(p, cfg);
  for (const auto& [name, fam] : m.locals) CheckRules(fam, cfg.n_lcl);
  return {InstantiateWithMap(p, m), std::move(m)};
}

}  // namespace wnos
