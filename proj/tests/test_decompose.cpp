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

#include <algorithm>
#include <random>
#include <set>

#include "doctest.h"
#include "test_util.hpp"
#include "wnos/decompose.hpp"
#include "wnos/error.hpp"

using namespace wnos;
using wnos::testing::ReadFile;
using wnos::testing::RelErr;
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

InstanceMap Table1Map() {
  std::vector<int> sessions(20);
  for (int i = 0; i < 20; ++i) sessions[i] = i;
  return InstanceMapFromTable(BuiltinGraph(), "lnkses",
                              ParseInstanceTable(ReadFile(SourcePath("data/table1.tsv"))), sessions);
}

// Every link hears every other link.
void AddFullInterference(InstanceMap& m) {
  LocalInstances itf;
  itf.element = "itflnk";
  itf.owner_set = "netlnk";
  itf.member_set = "netlnk";
  itf.derived = true;
  const auto& links = m.Global("netlnk");
  for (int i : links) {
    std::vector<int> others;
    for (int j : links) {
      if (j != i) others.push_back(j);
    }
    itf.members[i] = others;
  }
  m.locals["itflnk"] = itf;
}

Env RandomEnv(const std::set<VarId>& vars, std::uint64_t seed, double lo = 0.1, double hi = 3.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Env env;
  for (const VarId& v : vars) env.set(v, u(rng));
  return env;
}

const Subproblem& EntityOf(const Decomposition& d, Layer layer, int index) {
  for (const Subproblem& s : d.entities) {
    if (s.layer == layer && s.index == index) return s;
  }
  FAIL("no such entity");
  return d.entities.front();
}

const ControlProgram& ProgramOf(const Decomposition& d, Layer layer) {
  for (const ControlProgram& p : d.programs) {
    if (p.layer == layer) return p;
  }
  FAIL("no such program");
  return d.programs.front();
}

struct Fixture {
  ControlProblem problem;
  InstanceMap map;
  InstantiatedProblem inst;
  Decomposition d;
};

Fixture Build(const std::string& file, InstanceMap m) {
  ControlProblem p = LoadProblem(SourcePath(file));
  InstantiatedProblem inst = InstantiateWithMap(p, m);
  Decomposition d = Decompose(p, m, inst);
  return {std::move(p), std::move(m), std::move(inst), std::move(d)};
}

}  // namespace

TEST_CASE("dualize") {
  ControlProblem p = LoadProblem(SourcePath("problems/toy.wnos"));
  DualProblem d = Dualize(InstantiateWithMap(p, ToyMap()));
  CHECK(d.dual.str() ==
        "sesrate_01 + sesrate_02 + sesrate_03 + (lnkcap_01 - sesrate_01 - sesrate_02) * lbd_01 + "
        "(lnkcap_02 - sesrate_01 - sesrate_03) * lbd_02 + "
        "(lnkcap_03 - sesrate_02 - sesrate_03) * lbd_03");
  CHECK(d.duals == std::vector<VarId>{VarId("lbd", 1), VarId("lbd", 2), VarId("lbd", 3)});
  CHECK(d.Render() ==
        "utility: sesrate_01 + sesrate_02 + sesrate_03\n"
        "lbd_01: (lnkcap_01 - sesrate_01 - sesrate_02) * lbd_01\n"
        "lbd_02: (lnkcap_02 - sesrate_01 - sesrate_03) * lbd_02\n"
        "lbd_03: (lnkcap_03 - sesrate_02 - sesrate_03) * lbd_03\n");

  std::set<VarId> expect;
  for (int i = 1; i <= 3; ++i) {
    expect.insert(VarId("sesrate", i));
    expect.insert(VarId("lnkcap", i));
    expect.insert(VarId("lbd", i));
  }
  CHECK(FreeVars(d.dual) == expect);

  SUBCASE("no constraints") {
    InstantiatedProblem bare;
    bare.utility = Expr::Var("sesrate_00");
    CHECK(Dualize(bare).dual == bare.utility);
  }

  SUBCASE("weak duality at feasible points") {
    InstantiatedProblem inst = InstantiateWithMap(LoadProblem(SourcePath("problems/jocp.wnos")),
                                                  Table1Map());
    DualProblem jd = Dualize(inst);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    for (int trial = 0; trial < 200; ++trial) {
      Env env;
      for (int s = 0; s < 20; ++s) env.set(VarId("sesrate", s), u(rng));
      for (const InstConstraint& c : inst.constraints) {
        // Capacity at or above the load keeps the point feasible.
        env.set(c.rhs.var(), Eval(c.lhs, env) + u(rng));
        env.set(c.dual, u(rng));
      }
      CHECK(Eval(jd.dual, env) >= Eval(jd.utility, env) - 1e-12);
    }
  }
}

TEST_CASE("split by layer and entity on the toy") {
  Fixture f = Build("problems/toy.wnos", ToyMap());
  const LayerSplit& s = f.d.split;
  REQUIRE(s.layers.count(Layer::kTransport));
  REQUIRE(s.layers.count(Layer::kPhysical));
  CHECK(s.dual_terms.empty());
  CHECK(s.layers.at(Layer::kPhysical).objective().str() ==
        "lnkcap_01 * lbd_01 + lnkcap_02 * lbd_02 + lnkcap_03 * lbd_03");
  CHECK(s.layers.at(Layer::kTransport).terms.front().str() == "sesrate_01");

  const Subproblem& flow1 = EntityOf(f.d, Layer::kTransport, 1);
  CHECK(flow1.entity_set == "netses");
  CHECK(flow1.objective().str() == "sesrate_01 - sesrate_01 * lbd_01 - sesrate_01 * lbd_02");
  CHECK(flow1.collected().str() == "sesrate_01 - sesrate_01 * (lbd_01 + lbd_02)");
  CHECK(flow1.owned == std::vector<VarId>{VarId("sesrate", 1)});
  CHECK(EntityOf(f.d, Layer::kTransport, 3).objective().str() ==
        "sesrate_03 - sesrate_03 * lbd_02 - sesrate_03 * lbd_03");

  const Subproblem& link2 = EntityOf(f.d, Layer::kPhysical, 2);
  CHECK(link2.entity_set == "netlnk");
  CHECK(link2.objective().str() == "lnkcap_02 * lbd_02");

  SUBCASE("a single entity returns itself") {
    auto parts = SplitByEntity(link2, BuiltinGraph());
    REQUIRE(parts.size() == 1);
    CHECK(parts.front().terms == link2.terms);
  }
}

TEST_CASE("term classification examples") {
  ControlProblem p = LoadProblem(SourcePath("problems/jocp.wnos"));
  DualProblem d;
  d.utility = Expr::Var("sesrate_00");
  d.dual = Expr::Sum({Expr::Var("sesrate_00"),
                      Expr::Product({Expr::Var("lnkcap_00"), Expr::Var("lbd_00")})});
  d.duals = {VarId("lbd", 0)};
  d.constraints = {InstConstraint{Expr::Var("sesrate_00"), Expr::Var("lnkcap_00"), "netlnk", 0,
                                  VarId("lbd", 0)}};
  LayerSplit s = SplitByLayer(d, p);
  CHECK(s.layers.at(Layer::kTransport).objective().str() == "sesrate_00");
  CHECK(s.layers.at(Layer::kPhysical).objective().str() == "lnkcap_00 * lbd_00");

  d.dual = Expr::Sum({Expr::Product({Expr::Var("sesrate_00"), Expr::Var("lnkcap_00")})});
  CHECK(KindOf([&] { SplitByLayer(d, p); }) == ErrorKind::kAmbiguousLayer);

  // A lambda times a constant has no primal variable.
  d.dual = Expr::Sum({Expr::Var("sesrate_00"),
                      Expr::Product({Expr::Constant(5.0), Expr::Var("lbd_00")})});
  s = SplitByLayer(d, p);
  REQUIRE(s.dual_terms.size() == 1);
  CHECK(s.dual_terms.front().str() == "5 * lbd_00");

  Subproblem mixed;
  mixed.layer = Layer::kTransport;
  mixed.terms = {Expr::Product({Expr::Var("sesrate_01"), Expr::Var("sesrate_02")})};
  mixed.owned = {VarId("sesrate", 1), VarId("sesrate", 2)};
  CHECK(KindOf([&] { SplitByEntity(mixed, BuiltinGraph()); }) == ErrorKind::kAmbiguousEntity);
}

TEST_CASE("session 4 of the table instance") {
  Fixture f = Build("problems/jocp.wnos", Table1Map());
  CHECK(f.d.entities.size() == 40);
  const Subproblem& s4 = EntityOf(f.d, Layer::kTransport, 4);
  CHECK(s4.collected().str() ==
        "sesrate_04 - sesrate_04 * (lbd_00 + lbd_03 + lbd_04 + lbd_07 + lbd_09 + lbd_10 + lbd_11 + "
        "lbd_12 + lbd_13 + lbd_14 + lbd_18 + lbd_19)");

  // Same multiset of duals as the published listing (which is unordered).
  std::multiset<int> published{9, 11, 12, 13, 14, 18, 19, 0, 3, 4, 7, 10};
  std::multiset<int> got;
  for (const VarId& v : s4.foreign) {
    if (v.base == "lbd") got.insert(*v.index);
  }
  CHECK(got == published);
  CHECK(s4.terms.size() == 13);

  // The transport layer lists sesrate_00 first.
  CHECK(f.d.split.layers.at(Layer::kTransport).terms.front().str() == "sesrate_00");
}

TEST_CASE("lift to abstract") {
  Fixture f = Build("problems/jocp.wnos", Table1Map());
  ControlProgram t = LiftToAbstract(EntityOf(f.d, Layer::kTransport, 4), f.map, f.problem);
  CHECK(t.objective.str() == "sesrate - sesrate * sum(lbd)");
  CHECK(t.collection == "seslnk");
  CHECK(t.controls == std::vector<std::string>{"sesrate"});
  CHECK(t.primal == std::vector<std::string>{"sesrate"});

  ControlProgram ph = LiftToAbstract(EntityOf(f.d, Layer::kPhysical, 7), f.map, f.problem);
  CHECK(ph.objective.str() == "lnkcap * lbd");
  CHECK(ph.collection == "self");
  CHECK(ph.controls == std::vector<std::string>{"lnkpwr"});
  CHECK(ph.objective_full.str() ==
        "(freq * log2(1 + lnkpwr * lnkgain / (lnknoise + lnkgain_itf * itfpwr))) * lbd");

  SUBCASE("log utility") {
    Fixture g = Build("problems/jocp_log.wnos", Table1Map());
    CHECK(ProgramOf(g.d, Layer::kTransport).objective.str() == "log(sesrate) - sesrate * sum(lbd)");
  }

  SUBCASE("unmatched dual set") {
    Subproblem cut = EntityOf(f.d, Layer::kTransport, 4);
    cut.terms.pop_back();
    CHECK(KindOf([&] { LiftToAbstract(cut, f.map, f.problem); }) ==
          ErrorKind::kNoMatchingElement);
  }
}

TEST_CASE("lift and re-instantiate round trip") {
  struct Case {
    const char* file;
    InstanceMap map;
  };
  std::vector<Case> cases{{"problems/toy.wnos", ToyMap()},
                          {"problems/jocp.wnos", Table1Map()},
                          {"problems/jocp_log.wnos", Table1Map()},
                          {"problems/cp3_powercap.wnos", Table1Map()},
                          {"problems/cp4.wnos", Table1Map()},
                          {"problems/powermin.wnos", Table1Map()}};
  InstanceConfig cfg;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    cfg.seed = seed;
    cases.push_back({"problems/jocp.wnos",
                     BuildInstanceMap(LoadProblem(SourcePath("problems/jocp.wnos")), cfg)});
  }
  for (const Case& c : cases) {
    CAPTURE(c.file);
    Fixture f = Build(c.file, c.map);
    for (const Subproblem& sub : f.d.entities) {
      ControlProgram prog = LiftToAbstract(sub, f.map, f.problem);
      CHECK(ExpandAgainst(prog.objective, f.map, sub.entity_set, *sub.index) == sub.collected());
    }
  }
}

TEST_CASE("term conservation") {
  for (const char* file : {"problems/toy.wnos", "problems/jocp.wnos", "problems/jocp_log.wnos",
                           "problems/powermin.wnos"}) {
    CAPTURE(file);
    Fixture f = Build(file, std::string(file) == "problems/toy.wnos" ? ToyMap() : Table1Map());
    std::size_t terms = f.d.split.dual_terms.size();
    for (const Subproblem& s : f.d.entities) terms += s.terms.size();
    CHECK(terms == Level1Terms(f.d.dual.dual).size());

    std::set<VarId> vars = FreeVars(f.d.dual.dual);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      Env env = RandomEnv(vars, seed);
      double total = 0.0;
      for (const Subproblem& s : f.d.entities) total += Eval(s.objective(), env);
      for (const Expr& t : f.d.split.dual_terms) total += Eval(t, env);
      CHECK(std::abs(total - Eval(f.d.dual.dual, env)) <= 1e-9 * (1 + std::abs(total)));
    }
    for (const Subproblem& s : f.d.entities) {
      for (const VarId& v : s.owned) CHECK_FALSE(f.d.dual.IsDual(v));
    }
  }
}

TEST_CASE("power minimization routes rate terms to the dual update") {
  Fixture f = Build("problems/powermin.wnos", Table1Map());
  CHECK(f.d.split.layers.count(Layer::kTransport) == 0);
  CHECK(f.d.split.dual_terms.size() == 200);
  CHECK(f.d.split.dual_terms.front().str() == "sesrate_03 * lbd_00");
  REQUIRE(f.d.programs.size() == 1);
  const ControlProgram& p = f.d.programs.front();
  CHECK(p.sense == Sense::kMinimize);
  CHECK(p.objective.str() == "lnkpwr - lnkcap * lbd");
  CHECK(p.collection == "self");
}

TEST_CASE("penalization") {
  Fixture f = Build("problems/jocp.wnos", Table1Map());
  REQUIRE(f.d.programs.size() == 2);
  const ControlProgram& tr = ProgramOf(f.d, Layer::kTransport);
  CHECK(tr.mode == DistMethod::kDpl);
  CHECK(tr.penalty.is_constant(0.0));
  CHECK(tr.objective.str() == "sesrate - sesrate * sum(lbd)");

  ControlProgram br = Penalize(tr, DistMethod::kBestResponse, BuiltinGraph());
  CHECK(br.Penalized() == tr.objective_full);

  const ControlProgram& ph = ProgramOf(f.d, Layer::kPhysical);
  CHECK(ph.mode == DistMethod::kDpl);
  CHECK(ContainsBigSum(ph.penalty));
  CHECK(ph.anchors == std::vector<VarId>{AnchorOf("lnkpwr", "netlnk")});
  CHECK(ph.penalty.str().find("sum(lbd * ") == 0);
  CHECK(ph.penalty.str().find(") * (lnkpwr - lnkpwr0)") != std::string::npos);

  InstanceMap m = f.map;
  AddFullInterference(m);

  SUBCASE("penalty vanishes at the anchor") {
    for (DistMethod mode : {DistMethod::kDpl, DistMethod::kGradient}) {
      ControlProgram pr = Penalize(ph, mode, BuiltinGraph());
      for (int link : {0, 7, 19}) {
        Expr pen = ExpandAgainst(pr.penalty, m, "netlnk", link);
        Env env = RandomEnv(FreeVars(pen), 100 + link);
        env.set(VarId("lnkpwr0", link), env.at(VarId("lnkpwr", link)));
        CHECK(std::abs(Eval(pen, env)) < 1e-12);
      }
    }
  }

  SUBCASE("penalty slope matches the peers' capacity sensitivity") {
    // Peers j see itfpwr_j = sum_k g(k->j) p_k; the penalty of link i binds
    // xgain_j to g(i->j). Compare d/dp_i of sum_j lbd_j * lnkcap_j against
    // the penalty's slope in p_i.
    const int i = 5;
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.2, 2.0);
    std::vector<std::vector<double>> gain(20, std::vector<double>(20));
    for (auto& row : gain) {
      for (double& x : row) x = u(rng) * 0.1;
    }
    std::vector<double> p(20), lam(20), freq(20), g(20), noise(20);
    for (int k = 0; k < 20; ++k) {
      p[k] = u(rng) * 5;
      lam[k] = u(rng);
      freq[k] = u(rng) * 10;
      g[k] = u(rng);
      noise[k] = u(rng) * 0.1;
    }
    auto peers = [&](double pi) {
      double total = 0.0;
      for (int j = 0; j < 20; ++j) {
        if (j == i) continue;
        double itf = 0.0;
        for (int k = 0; k < 20; ++k) {
          if (k != j) itf += gain[k][j] * (k == i ? pi : p[k]);
        }
        total += lam[j] * freq[j] * std::log2(1 + p[j] * g[j] / (noise[j] + itf));
      }
      return total;
    };
    double h = 1e-6;
    double fd = (peers(p[i] + h) - peers(p[i] - h)) / (2 * h);

    Expr pen = ExpandAgainst(ph.penalty, m, "netlnk", i);
    Env env;
    for (int j = 0; j < 20; ++j) {
      double itf = 0.0;
      for (int k = 0; k < 20; ++k) {
        if (k != j) itf += gain[k][j] * p[k];
      }
      env.set(VarId("lbd", j), lam[j]);
      env.set(VarId("freq", j), freq[j]);
      env.set(VarId("lnkgain", j), g[j]);
      env.set(VarId("lnknoise", j), noise[j]);
      env.set(VarId("lnkgain_itf", j), 1.0);
      env.set(VarId("itfpwr", j), itf);
      env.set(VarId("lnkpwr", j), p[j]);
      env.set(VarId("xgain", j), gain[i][j]);
    }
    env.set(VarId("lnkpwr0", i), p[i]);
    env.set(VarId("lnkpwr", i), p[i] + 1.0);
    double slope = Eval(pen, env);
    CHECK(RelErr(slope, fd) < 1e-6);
    CHECK(slope < 0.0);
  }

  SUBCASE("not differentiable") {
    ElementGraph g = BuiltinGraph();
    Element odd;
    odd.name = "oddcap";
    odd.layer = Layer::kPhysical;
    odd.model = Expr::BigSum("itflnk", Expr::Variable(VarId("itfpwr", std::nullopt, "itflnk")));
    g.Add(odd);
    ControlProgram prog;
    prog.entity_set = "netlnk";
    prog.objective = Expr::Product({Expr::Variable(VarId("oddcap", std::nullopt, "netlnk")),
                                    Expr::Variable(VarId("lbd", std::nullopt, "netlnk"))});
    prog.objective_full = prog.objective;
    prog.controls = {"lnkpwr"};
    CHECK(KindOf([&] { Penalize(prog, DistMethod::kDpl, g); }) == ErrorKind::kNotDifferentiable);
  }
}

TEST_CASE("program rendering") {
  Fixture f = Build("problems/toy.wnos", ToyMap());
  const ControlProgram& tr = ProgramOf(f.d, Layer::kTransport);
  CHECK(tr.Render() ==
        "program transport netses\n"
        "  sense: max\n"
        "  objective: sesrate - sesrate * sum(lbd)\n"
        "  collect: seslnk\n"
        "  primal: sesrate\n"
        "  controls: sesrate\n"
        "  mode: best_response\n"
        "  full: sesrate - sesrate * sum(lbd)\n"
        "  penalty: 0\n");
}
