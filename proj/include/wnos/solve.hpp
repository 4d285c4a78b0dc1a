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

// Numerical engine: box-constrained projected gradient for entity
// programs, projected subgradient updates for the duals, and a grid
// oracle for small instances.

#ifndef WNOS_SOLVE_HPP_
#define WNOS_SOLVE_HPP_

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "wnos/compiled.hpp"
#include "wnos/decompose.hpp"
#include "wnos/expr.hpp"

namespace wnos {

struct Box {
  double lower = 0.0;
  double upper = std::numeric_limits<double>::infinity();
  double Clamp(double x) const { return x < lower ? lower : x > upper ? upper : x; }
};

struct SolverConfig {
  double primal_step = 1.0;  // first Armijo trial; later searches start at 2x the last step
  double dual_step = 0.05;
  int max_iterations = 200;
  double tolerance = 1e-7;
  bool diminishing_dual_step = false;  // dual_step / sqrt(t)
  double armijo = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 60;

  // Throws ConfigError.
  void Validate() const;
};

using Decision = std::map<VarId, double>;

// A program made concrete for one entity.
struct EntityProgram {
  Sense sense = Sense::kMaximize;
  Expr objective;
  std::vector<VarId> controls;
  std::vector<Box> boxes;  // one per control
};

// Expands the penalized template for `entity` against the run-time map.
EntityProgram Concretize(const ControlProgram& prog, const InstanceMap& m, int entity);

// Compiled once, solved many times with changing parameters.
class CompiledProgram {
 public:
  explicit CompiledProgram(EntityProgram program);

  // Projected gradient from the anchor (control values in `params`, else
  // the lower bound). Throws NumericalError, UnboundVariable.
  Decision Solve(const Env& params, const SolverConfig& cfg) const;

  const EntityProgram& program() const { return program_; }
  // Variables other than the controls the objective reads.
  const std::vector<VarId>& parameters() const { return parameters_; }

 private:
  EntityProgram program_;
  SlotMap slots_;
  CompiledExpr objective_;
  std::vector<CompiledExpr> gradient_;
  std::vector<VarId> parameters_;
};

Decision SolveProgram(const EntityProgram& program, const Env& params, const SolverConfig& cfg);

struct DualState {
  std::map<VarId, double> lambda;
  int step = 0;

  double at(const VarId& v) const;
};

// lambda <- max(0, lambda - step * slack) for every slack given.
DualState DualUpdate(const DualState& state, const std::map<VarId, double>& slacks,
                     const SolverConfig& cfg);

// rhs - lhs of every constraint row at `env`.
std::map<VarId, double> Slacks(const InstantiatedProblem& inst, const Env& env);

struct OracleResult {
  Decision decision;
  double utility = 0.0;
};

// Exhaustive grid search over the boxes of the (at most six) variables not
// fixed by `params`. Throws InfeasibleEverywhere, ValidationError.
OracleResult CentralizedOracle(const InstantiatedProblem& inst, const Env& params,
                               const std::map<VarId, Box>& boxes, double resolution);

struct DualLoopConfig {
  SolverConfig solver;
  int epochs = 2000;
  std::uint64_t seed = 1;  // initial decisions are drawn uniformly in the boxes
};

struct DualLoopResult {
  std::vector<double> utility;           // at each epoch's decisions
  std::vector<double> ergodic_utility;   // at the running average
  std::vector<double> max_violation;     // of the running average
  Decision last;
  Decision ergodic;
  DualState duals;
};

// Runs the distributed algorithm on a decomposed problem whose
// non-control quantities are all fixed in `params`: every epoch each entity
// solves its program against the previous epoch's state, then the duals
// move along the slacks. A program is skipped for an entity whose primal
// element is bound in `params` (a fixed capacity, say).
DualLoopResult RunDualLoop(const InstantiatedProblem& inst, const Decomposition& d,
                           const InstanceMap& m, const Env& params,
                           const std::map<std::string, Box>& boxes, const DualLoopConfig& cfg,
                           const std::function<void(int, const DualState&, const Decision&)>&
                               on_epoch = nullptr);

}  // namespace wnos

#endif  // WNOS_SOLVE_HPP_
