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

#include "wnos/solve.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "wnos/error.hpp"

namespace wnos {

void SolverConfig::Validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorKind::kConfigError, what); };
  if (!(primal_step > 0)) bad("primal step must be positive");
  if (!(dual_step > 0)) bad("dual step must be positive");
  if (max_iterations < 1) bad("max iterations must be at least 1");
  if (!(tolerance > 0)) bad("tolerance must be positive");
  if (!(backtrack > 0 && backtrack < 1)) bad("backtracking factor must lie in (0, 1)");
  if (!(armijo > 0 && armijo < 1)) bad("Armijo constant must lie in (0, 1)");
}

EntityProgram Concretize(const ControlProgram& prog, const InstanceMap& m, int entity) {
  EntityProgram out;
  out.sense = prog.sense;
  out.objective = ExpandAgainst(prog.Penalized(), m, prog.entity_set, entity);
  for (const std::string& c : prog.controls) out.controls.push_back(VarId(c, entity));
  out.boxes.assign(out.controls.size(), Box{});
  return out;
}

// ---------------------------------------------------------------------------
// Projected gradient

CompiledProgram::CompiledProgram(EntityProgram program) : program_(std::move(program)) {
  if (program_.boxes.size() != program_.controls.size()) {
    throw Error(ErrorKind::kConfigError, "one box per control is required");
  }
  for (const Box& b : program_.boxes) {
    if (!(b.lower <= b.upper)) throw Error(ErrorKind::kConfigError, "box with lower > upper");
  }
  for (const VarId& c : program_.controls) slots_.Intern(c);
  objective_ = CompiledExpr(program_.objective, slots_);
  for (const VarId& c : program_.controls) {
    gradient_.emplace_back(Differentiate(program_.objective, c), slots_);
  }
  for (std::size_t i = program_.controls.size(); i < slots_.size(); ++i) {
    parameters_.push_back(slots_.ids()[i]);
  }
}

Decision CompiledProgram::Solve(const Env& params, const SolverConfig& cfg) const {
  const std::size_t n = program_.controls.size();
  std::vector<double> v(slots_.size());
  for (std::size_t i = n; i < v.size(); ++i) {
    const double* p = params.find(slots_.ids()[i]);
    if (!p) throw Error(ErrorKind::kUnboundVariable, slots_.ids()[i].str());
    v[i] = *p;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double* p = params.find(program_.controls[i]);
    v[i] = program_.boxes[i].Clamp(p ? *p : program_.boxes[i].lower);
  }

  const double sign = program_.sense == Sense::kMaximize ? 1.0 : -1.0;
  auto value = [&](const std::vector<double>& x) {
    try {
      return sign * objective_(x);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kDomainError) throw;
      return -std::numeric_limits<double>::infinity();
    }
  };
  double f = value(v);
  if (!std::isfinite(f)) {
    throw Error(ErrorKind::kNumericalError, "objective is not finite at the starting point");
  }

  // Each search starts from twice the last accepted step, so progress does
  // not hinge on the units of the controls.
  double start = cfg.primal_step;
  std::vector<double> g(n), trial;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      g[i] = sign * gradient_[i](v);
      if (!std::isfinite(g[i])) {
        throw Error(ErrorKind::kNumericalError,
                    "gradient in " + program_.controls[i].str() + " is not finite");
      }
    }
    double t = start;
    bool accepted = false;
    double moved = 0.0;
    for (int b = 0; b <= cfg.max_backtracks; ++b, t *= cfg.backtrack) {
      trial = v;
      double slope = 0.0;
      moved = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        trial[i] = program_.boxes[i].Clamp(v[i] + t * g[i]);
        double d = trial[i] - v[i];
        slope += g[i] * d;
        moved += d * d;
      }
      if (moved == 0.0) break;  // stationary on the box
      double ft = value(trial);
      if (std::isfinite(ft) && ft >= f + cfg.armijo * slope) {
        accepted = true;
        f = ft;
        break;
      }
    }
    if (!accepted) break;
    start = std::min(2.0 * t, 1e12);
    v.swap(trial);
    if (std::sqrt(moved) < cfg.tolerance) break;
  }

  Decision out;
  for (std::size_t i = 0; i < n; ++i) out[program_.controls[i]] = v[i];
  return out;
}

Decision SolveProgram(const EntityProgram& program, const Env& params, const SolverConfig& cfg) {
  return CompiledProgram(program).Solve(params, cfg);
}

// ---------------------------------------------------------------------------
// Duals

double DualState::at(const VarId& v) const {
  auto it = lambda.find(v);
  return it == lambda.end() ? 0.0 : it->second;
}

DualState DualUpdate(const DualState& state, const std::map<VarId, double>& slacks,
                     const SolverConfig& cfg) {
  DualState next = state;
  next.step = state.step + 1;
  double step = cfg.dual_step;
  if (cfg.diminishing_dual_step) step /= std::sqrt(static_cast<double>(next.step));
  for (const auto& [id, slack] : slacks) {
    next.lambda[id] = std::max(0.0, state.at(id) - step * slack);
  }
  return next;
}

std::map<VarId, double> Slacks(const InstantiatedProblem& inst, const Env& env) {
  std::map<VarId, double> out;
  for (const InstConstraint& c : inst.constraints) out[c.dual] = Eval(c.rhs, env) - Eval(c.lhs, env);
  return out;
}

// ---------------------------------------------------------------------------
// Oracle

OracleResult CentralizedOracle(const InstantiatedProblem& inst, const Env& params,
                               const std::map<VarId, Box>& boxes, double resolution) {
  if (!(resolution > 0)) throw Error(ErrorKind::kConfigError, "resolution must be positive");
  std::set<VarId> free = FreeVars(inst.utility);
  for (const InstConstraint& c : inst.constraints) {
    for (const VarId& v : FreeVars(c.lhs)) free.insert(v);
    for (const VarId& v : FreeVars(c.rhs)) free.insert(v);
  }
  std::vector<VarId> vars;
  for (const VarId& v : free) {
    if (!params.find(v)) vars.push_back(v);
  }
  if (vars.size() > 6) {
    throw Error(ErrorKind::kValidationError,
                "grid oracle takes at most 6 variables, got " + std::to_string(vars.size()));
  }

  SlotMap slots;
  std::vector<int> counts;
  std::vector<double> lower;
  for (const VarId& v : vars) {
    auto it = boxes.find(v);
    if (it == boxes.end() || !std::isfinite(it->second.lower) || !std::isfinite(it->second.upper)) {
      throw Error(ErrorKind::kValidationError, "no finite box for " + v.str());
    }
    slots.Intern(v);
    lower.push_back(it->second.lower);
    counts.push_back(
        static_cast<int>(std::floor((it->second.upper - it->second.lower) / resolution + 1e-9)) + 1);
  }
  CompiledExpr utility(inst.utility, slots);
  std::vector<CompiledExpr> rows;
  for (const InstConstraint& c : inst.constraints) {
    rows.emplace_back(Expr::Sum({c.lhs, Expr::Negate(c.rhs)}), slots);
  }
  std::vector<double> x(slots.size());
  for (std::size_t i = vars.size(); i < x.size(); ++i) x[i] = params.at(slots.ids()[i]);

  const double sign = inst.sense == Sense::kMaximize ? 1.0 : -1.0;
  bool found = false;
  OracleResult best;
  double best_score = -std::numeric_limits<double>::infinity();
  std::vector<int> k(vars.size(), 0);
  while (true) {
    for (std::size_t i = 0; i < vars.size(); ++i) x[i] = lower[i] + k[i] * resolution;
    bool feasible = true;
    for (const CompiledExpr& r : rows) {
      if (r(x) > 1e-9) {
        feasible = false;
        break;
      }
    }
    if (feasible) {
      double u = utility(x);
      if (sign * u > best_score) {
        best_score = sign * u;
        best.utility = u;
        for (std::size_t i = 0; i < vars.size(); ++i) best.decision[vars[i]] = x[i];
        found = true;
      }
    }
    std::size_t i = 0;
    while (i < k.size() && ++k[i] == counts[i]) k[i++] = 0;
    if (i == k.size()) break;
  }
  if (!found) throw Error(ErrorKind::kInfeasibleEverywhere, "no grid point satisfies the constraints");
  return best;
}

// ---------------------------------------------------------------------------
// Distributed loop

DualLoopResult RunDualLoop(const InstantiatedProblem& inst, const Decomposition& d,
                           const InstanceMap& m, const Env& params,
                           const std::map<std::string, Box>& boxes, const DualLoopConfig& cfg,
                           const std::function<void(int, const DualState&, const Decision&)>&
                               on_epoch) {
  cfg.solver.Validate();
  std::vector<CompiledProgram> programs;
  for (const ControlProgram& prog : d.programs) {
    for (int entity : m.Global(prog.entity_set)) {
      bool fixed = false;
      for (const std::string& el : prog.primal) fixed |= params.find(VarId(el, entity)) != nullptr;
      if (fixed) continue;
      EntityProgram ep = Concretize(prog, m, entity);
      for (std::size_t i = 0; i < ep.controls.size(); ++i) {
        auto it = boxes.find(ep.controls[i].base);
        if (it != boxes.end()) ep.boxes[i] = it->second;
      }
      programs.emplace_back(std::move(ep));
    }
  }

  std::mt19937_64 rng(cfg.seed);
  Decision x;
  for (const CompiledProgram& cp : programs) {
    const EntityProgram& ep = cp.program();
    for (std::size_t i = 0; i < ep.controls.size(); ++i) {
      const Box& b = ep.boxes[i];
      double hi = std::isfinite(b.upper) ? b.upper : b.lower;
      x[ep.controls[i]] = std::uniform_real_distribution<double>(b.lower, hi)(rng);
    }
  }

  DualLoopResult out;
  for (const InstConstraint& c : inst.constraints) out.duals.lambda[c.dual] = 0.0;
  Decision sum;
  for (const auto& [id, v] : x) sum[id] = 0.0;

  auto bind = [&](Env& env, const Decision& dec) {
    for (const auto& [id, v] : dec) {
      env.set(id, v);
      env.set(VarId(id.base + "0", id.index), v);
    }
  };

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Env env = params;
    for (const auto& [id, l] : out.duals.lambda) env.set(id, l);
    bind(env, x);
    Decision next;
    for (const CompiledProgram& cp : programs) {
      for (const auto& [id, v] : cp.Solve(env, cfg.solver)) next[id] = v;
    }
    x = next;
    bind(env, x);
    out.duals = DualUpdate(out.duals, Slacks(inst, env), cfg.solver);
    for (const auto& [id, l] : out.duals.lambda) {
      if (!(l >= 0.0)) throw Error(ErrorKind::kNumericalError, "negative dual " + id.str());
    }
    out.utility.push_back(Eval(inst.utility, env));

    for (const auto& [id, v] : x) sum[id] += v;
    Env avg = params;
    for (const auto& [id, s] : sum) {
      out.ergodic[id] = s / epoch;
      avg.set(id, s / epoch);
    }
    out.ergodic_utility.push_back(Eval(inst.utility, avg));
    double worst = 0.0;
    for (const auto& [id, slack] : Slacks(inst, avg)) worst = std::max(worst, -slack);
    out.max_violation.push_back(worst);
    if (on_epoch) on_epoch(epoch, out.duals, x);
  }
  out.last = x;
  return out;
}

}  // namespace wnos
