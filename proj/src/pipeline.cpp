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

#include "wnos/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "wnos/error.hpp"
#include "wnos/instantiate.hpp"

namespace wnos {

namespace {

// Message without the repeated "<Kind>: " prefixes nested errors pick up.
std::string Bare(const Error& e) {
  std::string msg = e.what();
  const std::string tag = std::string(ErrorKindName(e.kind())) + ": ";
  for (std::size_t pos; (pos = msg.find(tag)) != std::string::npos;) msg.erase(pos, tag.size());
  return msg;
}

template <class F>
auto Stage(const std::string& stage, const std::string& context, F&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.kind(), "stage '" + stage + "' (" + context + "): " + Bare(e));
  }
}

void WriteFile(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) throw Error(ErrorKind::kIoError, "cannot write '" + path.string() + "'");
}

ScenarioConfig ResolveScenario(const std::string& scenario) {
  if (scenario.size() == 1 && scenario[0] >= '1' && scenario[0] <= '5') {
    return ScenarioConfig::Builtin(scenario[0] - '0');
  }
  return ScenarioConfig::Load(scenario);
}

std::string Fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string Row(const std::string& metric, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-28s %16.8g %16.8g %+16.8g", metric.c_str(), a, b, b - a);
  return buf;
}

}  // namespace

Summary Summary::Of(const Trace& t, int sessions, double duration_s) {
  Summary s;
  s.window_start_s = duration_s / 2;
  for (const TraceRecord& r : t.records) {
    if (r.metric == "sum_utility") s.final_sum_utility = r.value;
  }
  s.mean_sum_utility = t.Mean("sum_utility", 0, s.window_start_s);
  for (int i = 0; i < sessions; ++i) {
    s.session_throughput.push_back(t.Mean("throughput_pps", i, s.window_start_s));
  }
  s.mean_power = t.Mean("power_gain_db", -1, s.window_start_s);
  return s;
}

std::string Summary::Render() const {
  std::ostringstream os;
  os << "final_sum_utility: " << Fmt(final_sum_utility) << "\n";
  os << "mean_sum_utility: " << Fmt(mean_sum_utility) << "\n";
  for (std::size_t i = 0; i < session_throughput.size(); ++i) {
    os << "session_" << VarId("", static_cast<int>(i)).str().substr(1)
       << "_mean_throughput_pps: " << Fmt(session_throughput[i]) << "\n";
  }
  os << "mean_power_gain: " << Fmt(mean_power) << "\n";
  os << "window_start_s: " << Fmt(window_start_s) << "\n";
  return os.str();
}

std::string RenderPrograms(const Decomposition& d) {
  std::string out;
  for (const ControlProgram& p : d.programs) out += p.Render();
  return out;
}

std::string RenderInstances(const InstanceMap& m) {
  std::string out;
  for (const auto& [name, fam] : m.locals) out += DumpInstances(fam) + "\n";
  return out;
}

Experiment Prepare(const std::string& problem_path) {
  Experiment x;
  x.problem = Stage("parse", problem_path, [&] { return LoadProblem(problem_path); });
  InstantiatedProblem inst;
  std::tie(inst, x.design_map) = Stage("instantiate", problem_path, [&] {
    return InstantiateProblem(x.problem, InstanceConfig{});
  });
  x.decomposition = Stage("decompose", problem_path, [&] {
    return Decompose(x.problem, x.design_map, inst);
  });
  return x;
}

Experiment RunExperiment(const ExperimentSpec& spec) {
  namespace fs = std::filesystem;
  if (!(spec.duration_s > 0)) throw Error(ErrorKind::kConfigError, "duration must be positive");
  fs::path out(spec.out_dir);
  if (!spec.out_dir.empty()) {
    Stage("output", spec.out_dir, [&] {
      std::error_code ec;
      fs::create_directories(out, ec);
      if (ec || !fs::is_directory(out)) {
        throw Error(ErrorKind::kIoError, "cannot create output directory: " + ec.message());
      }
      return 0;
    });
  }

  Experiment x = Prepare(spec.problem_path);
  if (!spec.out_dir.empty()) {
    Stage("output", spec.out_dir, [&] {
      if (spec.dump_dual) WriteFile(out / "dual.txt", x.decomposition.dual.Render());
      if (spec.dump_programs) WriteFile(out / "programs.txt", RenderPrograms(x.decomposition));
      if (spec.dump_instances) WriteFile(out / "instances.txt", RenderInstances(x.design_map));
      return 0;
    });
  }

  x.scenario = Stage("scenario", spec.scenario, [&] { return ResolveScenario(spec.scenario); });
  if (spec.seed) x.scenario.seed = *spec.seed;

  RunOptions opts = spec.options;
  opts.scheme = spec.scheme;
  std::optional<Simulator> sim;
  Stage("install", spec.problem_path + " on " + spec.scenario, [&] {
    sim.emplace(BuildScenario(x.scenario), x.problem, opts);
    sim->InstallAll(x.decomposition.programs);
    return 0;
  });
  x.trace = Stage("simulate", spec.scenario, [&] { return sim->Run(spec.duration_s); });
  x.invariants = sim->invariants();
  x.summary = Summary::Of(x.trace, x.scenario.sessions, spec.duration_s);

  if (!spec.out_dir.empty()) {
    Stage("output", spec.out_dir, [&] {
      WriteFile(out / "trace.csv", x.trace.ToCsv());
      WriteFile(out / "summary.txt", x.summary.Render());
      return 0;
    });
  }
  return x;
}

Trace LoadTrace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIoError, "cannot read trace '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return Stage("compare", path, [&] { return Trace::FromCsv(ss.str()); });
}

Comparison CompareRuns(const Trace& a, const Trace& b) {
  using Key = std::tuple<std::string, int, std::string>;
  auto keys = [](const Trace& t) {
    std::set<Key> k;
    for (const TraceRecord& r : t.records) k.insert({r.entity_kind, r.entity_id, r.metric});
    return k;
  };
  std::set<Key> ka = keys(a);
  if (ka != keys(b)) {
    throw Error(ErrorKind::kSchemaMismatch, "traces cover different entities or metrics");
  }
  if (a.records.empty()) throw Error(ErrorKind::kSchemaMismatch, "empty traces");
  double from = std::min(a.records.back().time, b.records.back().time) / 2;

  Comparison c;
  char header[160];
  std::snprintf(header, sizeof header, "%-28s %16s %16s %16s", "metric", "a", "b", "b - a");
  c.lines.push_back(header);
  double ua = a.Mean("sum_utility", 0, from), ub = b.Mean("sum_utility", 0, from);
  c.utility_delta = ub - ua;
  c.lines.push_back(Row("sum_utility", ua, ub));
  double ta = 0.0, tb = 0.0;
  for (const auto& [kind, id, metric] : ka) {
    if (metric != "throughput_pps") continue;
    double x = a.Mean(metric, id, from), y = b.Mean(metric, id, from);
    ta += x;
    tb += y;
    c.lines.push_back(Row("throughput_pps " + kind + " " + std::to_string(id), x, y));
  }
  c.throughput_delta = tb - ta;
  c.lines.push_back(Row("throughput_pps total", ta, tb));
  double pa = a.Mean("power_gain_db", -1, from), pb = b.Mean("power_gain_db", -1, from);
  c.power_delta = pb - pa;
  c.lines.push_back(Row("power_gain_db mean", pa, pb));
  return c;
}

std::string Comparison::Render() const {
  std::string out;
  for (const std::string& l : lines) out += l + "\n";
  auto order = [](double d) { return d > 0 ? "b > a" : d < 0 ? "b < a" : "b = a"; };
  out += std::string("ordering: sum_utility ") + order(utility_delta) + ", throughput " +
         order(throughput_delta) + ", power " + order(power_delta) + "\n";
  return out;
}

}  // namespace wnos
