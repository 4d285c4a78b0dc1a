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

#include "doctest.h"
#include "test_util.hpp"
#include "wnos/error.hpp"
#include "wnos/expr_parse.hpp"
#include "wnos/netsim.hpp"

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

struct Pipeline {
  ControlProblem problem;
  Decomposition d;

  explicit Pipeline(const std::string& file) : problem(LoadProblem(SourcePath(file))) {
    auto [inst, m] = InstantiateProblem(problem, InstanceConfig{});
    d = Decompose(problem, m, inst);
  }
};

const Pipeline& LogRate() {
  static const Pipeline p("problems/jocp_log.wnos");
  return p;
}

const Pipeline& SumRate() {
  static const Pipeline p("problems/jocp.wnos");
  return p;
}

Simulator Make(const Pipeline& p, ScenarioConfig cfg, RunOptions opts = {}) {
  Simulator sim(BuildScenario(cfg), p.problem, opts);
  sim.InstallAll(p.d.programs);
  return sim;
}

bool Constant(const std::vector<double>& v) {
  for (double x : v) {
    if (x != v.front()) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("stock scenarios") {
  NetState s1 = BuildScenario(ScenarioConfig::Builtin(1));
  CHECK(s1.nodes.size() == 6);
  CHECK(s1.sessions.size() == 2);
  for (const Session& s : s1.sessions) CHECK(s.path.size() == 2);

  NetState s5 = BuildScenario(ScenarioConfig::Builtin(5));
  CHECK(s5.nodes.size() == 21);
  CHECK(s5.sessions.size() == 3);
  for (const Session& s : s5.sessions) CHECK(s.path.size() == 6);
  std::set<int> bands;
  for (const Link& l : s5.links) {
    bands.insert(l.band);
    CHECK(l.bandwidth_hz == 200e3);
  }
  CHECK(bands.size() == 6);

  NetState s4 = BuildScenario(ScenarioConfig::Builtin(4));
  CHECK(s4.nodes.size() == 9);
  CHECK(s4.sessions.size() == 3);

  // Scenarios 1-3 differ only in the band plan.
  for (int id : {2, 3}) {
    ScenarioConfig c = ScenarioConfig::Builtin(id);
    c.id = 1;
    c.band_pattern = ScenarioConfig::Builtin(1).band_pattern;
    CHECK(c == ScenarioConfig::Builtin(1));
  }
  // More shared bands mean more interferers.
  auto cross_pairs = [](int id) {
    std::size_t n = 0;
    for (const Link& l : BuildScenario(ScenarioConfig::Builtin(id)).links) n += l.cross.size();
    return n;
  };
  CHECK(cross_pairs(1) <= cross_pairs(2));
  CHECK(cross_pairs(2) < cross_pairs(3));

  // A relay's own transmission does not count against the hop into it.
  for (const Link& l : BuildScenario(ScenarioConfig::Builtin(3)).links) {
    for (const auto& [k, g] : l.cross) CHECK(s1.links[k].tx != l.rx);
  }
}

TEST_CASE("scenario files") {
  for (int id = 1; id <= 5; ++id) {
    ScenarioConfig stock = ScenarioConfig::Builtin(id);
    CHECK(ScenarioConfig::Load(SourcePath("scenarios/s" + std::to_string(id) + ".cfg")) == stock);
    CHECK(ScenarioConfig::Parse(stock.Render()) == stock);
  }
  CHECK(KindOf([] { ScenarioConfig::Builtin(6); }) == ErrorKind::kConfigError);
  CHECK(KindOf([] { ScenarioConfig::Parse("bogus = 1\n"); }) == ErrorKind::kConfigError);
  CHECK(KindOf([] { ScenarioConfig::Parse("nodes = 7\nhop_m = 8,12\nband_pattern = 0,1;1,0\n"); }) ==
        ErrorKind::kConfigError);
  CHECK(KindOf([] { ScenarioConfig::Parse("hop_m = 8,12\nband_pattern = 0,1;1,2\n"); }) ==
        ErrorKind::kConfigError);
  CHECK(KindOf([] { ScenarioConfig::Load("/nonexistent/s.cfg"); }) == ErrorKind::kIoError);
}

TEST_CASE("link capacity") {
  NetState net = BuildScenario(ScenarioConfig::Builtin(3));
  const double freq = 200e3 / 2048;

  SUBCASE("zero power") {
    net.links[0].power = 0.0;
    CHECK(LinkCapacity(net.links[0], net) == 0.0);
  }
  SUBCASE("one bit per hertz") {
    for (Link& l : net.links) l.power = 0.0;
    Link& l = net.links[0];
    l.power = l.noise / l.gain;  // SNR = 1
    CHECK(LinkCapacity(l, net) == doctest::Approx(freq).epsilon(1e-12));
  }
  SUBCASE("agrees with the symbolic model") {
    Link& l = net.links[1];
    for (Link& k : net.links) k.power = 7.0 + k.id;
    double itf = 0.0;
    for (const auto& [k, g] : l.cross) itf += g * net.links[k].power;
    Env env{{"freq", freq}, {"lnkpwr", l.power}, {"lnkgain", l.gain}, {"lnknoise", l.noise},
            {"lnkgain_itf", 1.0}, {"itfpwr", itf}};
    CHECK(LinkCapacity(l, net) == doctest::Approx(Eval(ParseExpr(kLinkCapacityModel), env)));
  }
  SUBCASE("interference strictly lowers capacity") {
    Link& l = net.links[0];
    REQUIRE(!l.cross.empty());
    for (Link& k : net.links) k.power = 1.0;
    double last = LinkCapacity(l, net);
    for (int i = 0; i < 5; ++i) {
      for (const auto& [k, g] : l.cross) net.links[k].power *= 2;
      double now = LinkCapacity(l, net);
      CHECK(now < last);
      last = now;
    }
  }
  SUBCASE("inactive links carry nothing") {
    net.links[2].active = false;
    CHECK(LinkCapacity(net.links[2], net) == 0.0);
  }
}

TEST_CASE("run-time instance map") {
  NetState net = BuildScenario(ScenarioConfig::Builtin(2));
  InstanceMap m = net.Instances();
  CHECK(m.Global("netses") == std::vector<int>{0, 1});
  CHECK(m.Global("netlnk") == std::vector<int>{0, 1, 2, 3});
  CHECK(m.Local("seslnk").members.at(1) == std::vector<int>{2, 3});
  CHECK(m.Local("lnkses").members.at(2) == std::vector<int>{1});
  // Hop k of both chains shares band k.
  CHECK(m.Local("itflnk").members.at(0) == std::vector<int>{2});
  CHECK(m.Local("itflnk").members.at(3) == std::vector<int>{1});
}

TEST_CASE("determinism") {
  ScenarioConfig cfg = ScenarioConfig::Builtin(2);
  NetState a = BuildScenario(cfg), b = BuildScenario(cfg);
  REQUIRE(a.links.size() == b.links.size());
  for (std::size_t i = 0; i < a.links.size(); ++i) {
    CHECK(a.links[i].gain == b.links[i].gain);
    CHECK(a.links[i].cross == b.links[i].cross);
  }
  Trace ta = Make(LogRate(), cfg).Run(20);
  Trace tb = Make(LogRate(), cfg).Run(20);
  CHECK(ta == tb);
  cfg.seed = 2;
  CHECK(!(Make(LogRate(), cfg).Run(20) == ta));
}

TEST_CASE("time scales") {
  Simulator sim = Make(LogRate(), ScenarioConfig::Builtin(1));
  for (int i = 0; i < 300; ++i) sim.Step();
  CHECK(sim.transport_updates() == 10);
  CHECK(sim.net().epoch == 300);
  CHECK(sim.net().clock == doctest::Approx(30.0));
  CHECK(sim.invariants().lambda_checks == 300 * 4);
  CHECK(sim.invariants().throughput_checks == 300 * 2);
}

TEST_CASE("zero prices send every source to its maximum rate") {
  for (const Pipeline* p : {&LogRate(), &SumRate()}) {
    RunOptions opts;
    opts.scheme = Scheme::kWnosT;
    opts.dual_step = 1e-300;
    opts.rate_smoothing = 1.0;
    Simulator sim = Make(*p, ScenarioConfig::Builtin(1), opts);
    for (int i = 0; i < 30; ++i) sim.Step();
    REQUIRE(sim.transport_updates() == 1);
    for (const Session& s : sim.net().sessions) {
      CHECK(s.rate == doctest::Approx(sim.rate_box(s.id).upper).epsilon(1e-6));
    }
  }
}

TEST_CASE("a drained session frees its band") {
  ScenarioConfig cfg = ScenarioConfig::Builtin(2);
  cfg.budget_packets = {30000, 0};
  Simulator sim = Make(LogRate(), cfg);
  Trace t = sim.Run(200);
  CHECK(!sim.net().sessions[0].active);
  CHECK(sim.net().links[0].power == 0.0);
  double drained_at = 0.0;
  for (const TraceRecord& r : t.records) {
    if (r.metric == "throughput_pps" && r.entity_id == 0 && r.value == 0.0 && drained_at == 0.0) {
      drained_at = r.time;
    }
  }
  REQUIRE(drained_at > 30.0);
  double before = 0.0, after = 0.0;
  int nb = 0, na = 0;
  for (const TraceRecord& r : t.records) {
    if (r.metric != "throughput_pps" || r.entity_id != 1) continue;
    if (r.time > drained_at - 20 && r.time < drained_at) before += r.value, ++nb;
    if (r.time > 170) after += r.value, ++na;
  }
  CHECK(after / na > before / nb);
}

TEST_CASE("schemes") {
  ScenarioConfig cfg = ScenarioConfig::Builtin(3);
  SUBCASE("best response transmits at full power") {
    RunOptions opts;
    opts.scheme = Scheme::kBestResponse;
    Simulator sim = Make(LogRate(), cfg, opts);
    Trace t = sim.Run(30);
    for (const Link& l : sim.net().links) {
      for (double p : t.Series("power_gain_db", l.id)) CHECK(p == sim.power_box(l.id).upper);
    }
    for (const Session& s : sim.net().sessions) CHECK(s.rate == sim.rate_box(s.id).upper);
  }
  SUBCASE("no control holds the initial point") {
    RunOptions opts;
    opts.scheme = Scheme::kNoControl;
    Simulator sim = Make(LogRate(), cfg, opts);
    std::vector<double> rates;
    for (const Session& s : sim.net().sessions) rates.push_back(s.rate);
    Trace t = sim.Run(30);
    for (const Link& l : sim.net().links) CHECK(Constant(t.Series("power_gain_db", l.id)));
    for (const Session& s : sim.net().sessions) {
      CHECK(s.rate == rates[s.id]);
      CHECK(Constant(t.Series("throughput_pps", s.id)));
    }
  }
  SUBCASE("single-layer schemes freeze the other layer") {
    RunOptions opts;
    opts.scheme = Scheme::kWnosT;
    Simulator t_only = Make(LogRate(), cfg, opts);
    Trace tt = t_only.Run(30);
    for (const Link& l : t_only.net().links) CHECK(Constant(tt.Series("power_gain_db", l.id)));
    opts.scheme = Scheme::kWnosP;
    Simulator p_only = Make(LogRate(), cfg, opts);
    double r0 = p_only.net().sessions[0].rate;
    p_only.Run(30);
    CHECK(p_only.net().sessions[0].rate == r0);
    CHECK(p_only.transport_updates() == 0);
  }
  CHECK(SchemeFromName("wnos-t-p") == Scheme::kWnosTP);
  CHECK(SchemeFromName(SchemeName(Scheme::kBestResponse)) == Scheme::kBestResponse);
  CHECK(!SchemeFromName("fastest"));
}

TEST_CASE("installing programs") {
  const Pipeline& p = LogRate();
  Simulator sim(BuildScenario(ScenarioConfig::Builtin(1)), p.problem);
  const ControlProgram* transport = nullptr;
  for (const ControlProgram& prog : p.d.programs) {
    if (prog.entity_set == "netses") transport = &prog;
  }
  REQUIRE(transport);
  CHECK(KindOf([&] { sim.Install("netses", 99, *transport); }) == ErrorKind::kUnknownEntity);
  CHECK(KindOf([&] { sim.Install("netflows", 0, *transport); }) == ErrorKind::kUnknownEntity);
  ControlProgram bogus = *transport;
  bogus.collection = "nbrnd";
  CHECK(KindOf([&] { sim.Install("netses", 0, bogus); }) == ErrorKind::kUnresolvableCollectionRule);

  // New programs take effect at the next epoch boundary.
  RunOptions opts;
  opts.scheme = Scheme::kWnosT;
  Simulator late(BuildScenario(ScenarioConfig::Builtin(1)), p.problem, opts);
  for (int i = 0; i < 30; ++i) late.Step();
  CHECK(late.transport_updates() == 1);
  double r = late.net().sessions[0].rate;
  for (int i = 0; i < 30; ++i) late.Step();
  CHECK(late.net().sessions[0].rate == r);  // nothing installed yet
  late.Install("netses", 0, *transport);
  for (int i = 0; i < 30; ++i) late.Step();
  CHECK(late.net().sessions[0].rate != r);
}

TEST_CASE("power cap on the first session") {
  Pipeline capped("problems/cp3_powercap.wnos");
  Simulator sim = Make(capped, ScenarioConfig::Builtin(1));
  for (int l : sim.net().sessions[0].path) CHECK(sim.power_box(l).upper == 5.0);
  for (int l : sim.net().sessions[1].path) CHECK(sim.power_box(l).upper == 30.0);
  Trace t = sim.Run(60);
  for (int l : sim.net().sessions[0].path) {
    for (double p : t.Series("power_gain_db", l)) CHECK(p <= 5.0);
  }
}

TEST_CASE("power minimization holds the targets") {
  Pipeline pm("problems/powermin.wnos");
  Simulator sim = Make(pm, ScenarioConfig::Builtin(5));
  for (const Session& s : sim.net().sessions) CHECK(s.rate == s.target);
  Trace t = sim.Run(150);
  for (const Session& s : sim.net().sessions) {
    CHECK(std::abs(t.Mean("throughput_pps", s.id, 75) - s.target) <= 0.1 * s.target);
  }
  ScenarioConfig no_targets = ScenarioConfig::Builtin(5);
  no_targets.target_pps.clear();
  CHECK(KindOf([&] { Simulator(BuildScenario(no_targets), pm.problem); }) == ErrorKind::kConfigError);
}

TEST_CASE("without cross gains sessions do not interact") {
  RunOptions opts;
  opts.scheme = Scheme::kWnosT;
  auto run = [&](bool decoupled, double other_power) {
    NetState net = BuildScenario(ScenarioConfig::Builtin(3));
    if (decoupled) {
      for (Link& l : net.links) {
        for (auto& [k, g] : l.cross) g = 0.0;
      }
    }
    Simulator sim(std::move(net), LogRate().problem, opts);
    sim.InstallAll(LogRate().d.programs);
    for (int l : sim.net().sessions[1].path) sim.mutable_net().links[l].power = other_power;
    sim.Run(60);
    return sim.net().sessions[0].rate;
  };
  CHECK(run(true, 2.0) == run(true, 29.0));
  CHECK(run(false, 2.0) != run(false, 29.0));
}

TEST_CASE("registers mirror the last epoch") {
  Simulator sim = Make(LogRate(), ScenarioConfig::Builtin(1));
  sim.Step();
  const NetState& n = sim.net();
  const Link& l = n.links[1];
  CHECK(n.registers.Read(l.tx, Layer::kPhysical, "lnkpwr_01") == l.power);
  CHECK(n.registers.Read(l.rx, Layer::kPhysical, "lnkcap_01") == l.capacity);
  CHECK(n.registers.Read(n.sessions[0].source, Layer::kTransport, "sesrate_00") == n.sessions[0].rate);
  CHECK(!n.registers.Read(l.rx, Layer::kPhysical, "lnkpwr_01"));
}

TEST_CASE("trace csv") {
  Trace t = Make(LogRate(), ScenarioConfig::Builtin(1)).Run(2);
  CHECK(t.records.size() == 20 * (2 + 4 * 2 + 1));
  CHECK(Trace::FromCsv(t.ToCsv()) == t);
  CHECK(t.ToCsv().rfind("time,entity_kind,entity_id,metric,value\n", 0) == 0);
  CHECK(KindOf([] { Trace::FromCsv("t,kind,id,metric,value\n"); }) == ErrorKind::kSchemaMismatch);
  CHECK(KindOf([] {
          Trace::FromCsv("time,entity_kind,entity_id,metric,value\n0.1,link,0,speed,3\n");
        }) == ErrorKind::kSchemaMismatch);
  CHECK(KindOf([] {
          Trace::FromCsv("time,entity_kind,entity_id,metric,value\n0.1,link,0,lambda\n");
        }) == ErrorKind::kSchemaMismatch);
}
