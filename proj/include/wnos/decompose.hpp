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

// Dual decomposition of an instantiated problem into per-entity control
// programs.
//
// The pipeline is dualize -> split_by_layer -> split_by_entity -> lift ->
// penalize. Lifting turns a concrete entity subproblem such as
//
//   sesrate_04 - sesrate_04 * (lbd_00 + lbd_03 + ... + lbd_19)
//
// back into a template over unindexed symbols,
//
//   sesrate - sesrate * sum(lbd)
//
// where the big-sum ranges over the local element whose instance for the
// entity equals the set of dual indices (the collection rule).

#ifndef WNOS_DECOMPOSE_HPP_
#define WNOS_DECOMPOSE_HPP_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wnos/expr.hpp"
#include "wnos/graph.hpp"
#include "wnos/instantiate.hpp"
#include "wnos/problem.hpp"

namespace wnos {

struct DualProblem {
  Sense sense = Sense::kMaximize;
  Expr utility;
  Expr dual;
  std::vector<VarId> duals;  // one per constraint row, in row order
  std::vector<InstConstraint> constraints;

  // Owner set of the constraint family a dual belongs to ("" if none).
  std::string FamilyOf(const VarId& lambda) const;
  bool IsDual(const VarId& v) const;

  // Utility line, then one `lbd_NN: (rhs - lhs) * lbd_NN` line per row
  // (`lhs - rhs` when minimizing).
  std::string Render() const;
};

DualProblem Dualize(const InstantiatedProblem& inst);

struct Subproblem {
  Layer layer = Layer::kNone;
  std::string entity_set;    // global set enumerating the entities, "" if layer-wide
  std::optional<int> index;  // entity index
  Sense sense = Sense::kMaximize;
  std::vector<Expr> terms;   // level-1 terms of the dual
  std::vector<VarId> owned;    // primal variables
  std::vector<VarId> foreign;  // everything else, duals included
  std::map<VarId, std::string> dual_sets;  // dual -> its constraint family

  Expr objective() const { return MakeSum(terms); }
  // Terms sharing a factor and differing only in their dual are merged:
  // a*l1 + a*l2 -> a * (l1 + l2). Order of first appearance is kept.
  Expr collected() const;
};

struct LayerSplit {
  std::map<Layer, Subproblem> layers;
  // Terms without a primal variable (e.g. lbd_j * c_j for a constant or
  // parameter rhs); they belong to the dual update, not to any program.
  std::vector<Expr> dual_terms;
};

// Throws AmbiguousLayer.
LayerSplit SplitByLayer(const DualProblem& dual, const ControlProblem& p);

// Throws AmbiguousEntity.
std::vector<Subproblem> SplitByEntity(const Subproblem& layer_sub, const ElementGraph& g);

struct ControlProgram {
  Layer layer = Layer::kNone;
  std::string entity_set;
  Sense sense = Sense::kMaximize;
  Expr objective;  // template over symbols indexed by `entity_set`
  // Local element supplying the dual values, or "self" when the entity
  // reads its own dual, or "" when the program uses none.
  std::string collection;
  std::string dual_base = "lbd";
  std::vector<std::string> primal;    // elements of the objective the entity owns
  std::vector<std::string> controls;  // controllable elements it writes
  DistMethod mode = DistMethod::kBestResponse;
  Expr objective_full;  // objective with owned models inlined
  Expr penalty;         // zero for best response
  std::vector<VarId> anchors;  // x0 symbols the penalty is linearized at

  Expr Penalized() const { return FoldSum({objective_full, penalty}); }
  std::string Render() const;
  bool operator==(const ControlProgram&) const = default;
};

// Anchor symbol of a control: lnkpwr -> lnkpwr0.
VarId AnchorOf(const std::string& control, const std::string& entity_set);

// Throws NoMatchingElement.
ControlProgram LiftToAbstract(const Subproblem& sub, const InstanceMap& m, const ControlProblem& p);

// Throws NotDifferentiable.
ControlProgram Penalize(ControlProgram prog, DistMethod mode, const ElementGraph& g);

struct Decomposition {
  DualProblem dual;
  LayerSplit split;
  std::vector<Subproblem> entities;
  std::vector<ControlProgram> programs;  // one per (layer, entity set), penalized
};

Decomposition Decompose(const ControlProblem& p, const InstanceMap& m,
                        const InstantiatedProblem& inst);

}  // namespace wnos

#endif  // WNOS_DECOMPOSE_HPP_
