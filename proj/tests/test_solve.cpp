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

#include <cmath>
#include <random>

#include "doctest.h"
#include "test_util.hpp"
#include "wnos/error.hpp"
#include "wnos/expr_parse.hpp"
#include "wnos/solve.hpp"

using namespace wnos;
using wnos::testing::SourcePath;

namespace {

ErrorKind KindOf(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::kIoError;
}

InstanceMap ToyMap() {
  return InstanceMapFromTable(BuiltinGraph(), "lnkses", {{1, {1, 2}}, {2, {1, 3}}, {3, {2, 3}}},
                              {1, 2, 3});
}

EntityProgram OneVar(const char* objective, const char* control, Box box) {
  EntityProgram p;
  p.objective = ParseExpr(objective);
  p.controls = {VarId::Parse(control)};
  p.boxes = {box};
  return p;
}

struct Toy {
  ControlProblem problem = LoadProblem(SourcePath("problems/toy.wnos"));
  InstanceMap map = ToyMap();
  InstantiatedProblem inst = InstantiateWithMap(problem, map);
  Decomposition d = Decompose(problem, map, inst);
};

Env Capacities(double c1, double c2, double c3) {
  Env env;
  env.set(VarId("lnkcap", 1), c1);
  env.set(VarId("lnkcap", 2), c2);
  env.set(VarId("lnkcap", 3), c3);
  return env;
}

}  // namespace

TEST_CASE("solve_program") {
  SolverConfig cfg;
  EntityProgram p = OneVar("sesrate_04 - sesrate_04 * (lbd_00 + lbd_03)", "sesrate_04", {0, 10});
  Env env{{"lbd_00", 0.0}, {"lbd_03", 0.0}, {"sesrate_04", 3.0}};
  CHECK(SolveProgram(p, env, cfg).at(VarId("sesrate", 4)) == 10.0);
  env.set("lbd_00", 1.5);
  env.set("lbd_03", 0.5);
  CHECK(SolveProgram(p, env, cfg).at(VarId("sesrate", 4)) == 0.0);

  SUBCASE("log utility reaches the stationary point") {
    EntityProgram lg = OneVar("log(sesrate_00) - sesrate_00 * lbd_00", "sesrate_00", {0.01, 10});
    Env e{{"lbd_00", 0.5}, {"sesrate_00", 0.3}};
    double x = SolveProgram(lg, e, cfg).at(VarId("sesrate", 0));
    // Independent grid search at resolution 1e-4.
    double best = 0.01, best_val = -1e300;
    for (double s = 0.01; s <= 10.0; s += 1e-4) {
      double v = std::log(s) - 0.5 * s;
      if (v > best_val) best_val = v, best = s;
    }
    CHECK(std::abs(best - 2.0) <= 1e-4);
    CHECK(std::abs(x - 2.0) <= 1e-4);

    // Re-solving from the optimum stays put.
    e.set("sesrate_00", x);
    CHECK(std::abs(SolveProgram(lg, e, cfg).at(VarId("sesrate", 0)) - x) < cfg.tolerance);
  }

  SUBCASE("minimize") {
    EntityProgram q = OneVar("(lnkpwr_00 - 3) * (lnkpwr_00 - 3)", "lnkpwr_00", {0, 30});
    q.sense = Sense::kMinimize;
    Env e{{"lnkpwr_00", 20.0}};
    CHECK(std::abs(SolveProgram(q, e, cfg).at(VarId("lnkpwr", 0)) - 3.0) < 1e-4);
  }

  SUBCASE("errors") {
    EntityProgram bad = OneVar("log(x_00)", "x_00", {0, 1});
    Env e{{"x_00", 0.0}};
    CHECK(KindOf([&] { SolveProgram(bad, e, cfg); }) == ErrorKind::kNumericalError);
    EntityProgram unbound = OneVar("x_00 * y_00", "x_00", {0, 1});
    CHECK(KindOf([&] { SolveProgram(unbound, e, cfg); }) == ErrorKind::kUnboundVariable);
    SolverConfig broken;
    broken.tolerance = 0;
    CHECK(KindOf([&] { broken.Validate(); }) == ErrorKind::kConfigError);
  }
}

TEST_CASE("dual_update") {
  SolverConfig cfg;
  cfg.dual_step = 0.1;
  DualState s;
  VarId l("lbd", 0);
  s.lambda[l] = 0.5;
  CHECK(DualUpdate(s, {{l, -0.2}}, cfg).at(l) == doctest::Approx(0.52).epsilon(1e-12));
  s.lambda[l] = 0.05;
  CHECK(DualUpdate(s, {{l, 1.0}}, cfg).at(l) == 0.0);

  SUBCASE("invariants over random sequences") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1, 1);
    DualState st;
    for (int step = 0; step < 1000; ++step) {
      cfg.diminishing_dual_step = step % 2 == 0;
      double before = st.at(l);
      double slack = u(rng);
      st = DualUpdate(st, {{l, slack}}, cfg);
      CHECK(st.at(l) >= 0.0);
      if (slack < 0) CHECK(st.at(l) >= before);
    }
    CHECK(st.step == 1000);
  }
}

TEST_CASE("centralized oracle") {
  Toy toy;
  std::map<VarId, Box> box;
  for (int s = 1; s <= 3; ++s) box[VarId("sesrate", s)] = {0, 1};
  OracleResult r = CentralizedOracle(toy.inst, Capacities(1, 1, 1), box, 0.01);
  CHECK(std::abs(r.utility - 1.5) <= 0.03);
  for (int s = 1; s <= 3; ++s) CHECK(r.decision.at(VarId("sesrate", s)) == doctest::Approx(0.5));

  CHECK(KindOf([&] { CentralizedOracle(toy.inst, Capacities(-1, 1, 1), box, 0.05); }) ==
        ErrorKind::kInfeasibleEverywhere);
  box.erase(VarId("sesrate", 3));
  CHECK(KindOf([&] { CentralizedOracle(toy.inst, Capacities(1, 1, 1), box, 0.05); }) ==
        ErrorKind::kValidationError);
}

TEST_CASE("distributed dual loop on the toy") {
  Toy toy;
  DualLoopConfig cfg;
  cfg.solver.primal_step = 0.05;
  cfg.solver.dual_step = 0.05;
  cfg.epochs = 2000;
  std::map<std::string, Box> boxes{{"sesrate", {0, 1}}};

  DualLoopResult r = RunDualLoop(toy.inst, toy.d, toy.map, Capacities(1, 1, 1), boxes, cfg);
  CHECK(r.utility.size() == 2000);
  CHECK(std::abs(r.ergodic_utility.back() - 1.5) <= 0.05 * 1.5);
  CHECK(r.max_violation.back() < 0.05);
  for (const auto& [id, l] : r.duals.lambda) CHECK(l >= 0.0);

  SUBCASE("inactive constraints lose their duals") {
    DualLoopResult s = RunDualLoop(toy.inst, toy.d, toy.map, Capacities(1, 1, 10), boxes, cfg);
    std::map<VarId, Box> box;
    for (int i = 1; i <= 3; ++i) box[VarId("sesrate", i)] = {0, 1};
    OracleResult o = CentralizedOracle(toy.inst, Capacities(1, 1, 10), box, 0.01);
    CHECK(o.utility == doctest::Approx(2.0));
    CHECK(s.duals.at(VarId("lbd", 3)) == 0.0);
    CHECK(std::abs(s.ergodic_utility.back() - o.utility) <= 0.05 * o.utility);
  }
}
