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

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "test_util.hpp"
#include "wnos/error.hpp"
#include "wnos/pipeline.hpp"

using namespace wnos;
using wnos::testing::ReadFile;
using wnos::testing::SourcePath;
namespace fs = std::filesystem;

namespace {

fs::path Scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("wnos_test_pipeline_" + name);
  fs::remove_all(p);
  return p;
}

std::vector<std::string> Lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

struct Shell {
  int status;
  std::string output;
};

// Runs the command-line tool with stdout and stderr captured.
Shell RunCli(const std::string& args, const fs::path& log) {
  std::string cmd = std::string(WNOS_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  int raw = std::system(cmd.c_str());
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, ReadFile(log.string())};
}

ErrorKind KindOf(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::kIoError;
}

ExperimentSpec Spec(const std::string& problem, const std::string& scenario) {
  ExperimentSpec s;
  s.problem_path = SourcePath(problem);
  s.scenario = scenario;
  s.duration_s = 30.0;
  s.seed = 1;
  return s;
}

}  // namespace

TEST_CASE("jocp on scenario 2 runs to completion") {
  fs::path out = Scratch("jocp");
  ExperimentSpec spec = Spec("problems/jocp.wnos", "2");
  spec.out_dir = out.string();
  spec.dump_dual = spec.dump_programs = spec.dump_instances = true;
  Experiment x = RunExperiment(spec);
  CHECK(std::isfinite(x.summary.final_sum_utility));
  CHECK(std::isfinite(x.summary.mean_sum_utility));
  CHECK(x.summary.session_throughput.size() == 2);
  for (const char* f : {"trace.csv", "summary.txt", "dual.txt", "programs.txt", "instances.txt"}) {
    CHECK(fs::exists(out / f));
  }
  std::string summary = ReadFile((out / "summary.txt").string());
  CHECK(summary.find("final_sum_utility: ") == 0);
  CHECK(summary.find("session_01_mean_throughput_pps: ") != std::string::npos);
  CHECK(summary.find("mean_power_gain: ") != std::string::npos);
  CHECK(ReadFile((out / "programs.txt").string()) == RenderPrograms(x.decomposition));

  SUBCASE("bit-reproducible") {
    Experiment y = RunExperiment(spec);
    CHECK(y.trace.ToCsv() == x.trace.ToCsv());
  }
  fs::remove_all(out);
}

TEST_CASE("sum-rate and sum-log differ only in the transport template") {
  std::vector<std::string> log_src = Lines(ReadFile(SourcePath("problems/jocp_log.wnos")));
  std::vector<std::string> rate_src = Lines(ReadFile(SourcePath("problems/jocp.wnos")));
  REQUIRE(log_src.size() == rate_src.size());
  int changed = 0;
  for (std::size_t i = 0; i < log_src.size(); ++i) {
    if (log_src[i].rfind("#", 0) != 0) changed += log_src[i] != rate_src[i];
  }
  CHECK(changed == 1);

  std::vector<std::string> a = Lines(RenderPrograms(Prepare(SourcePath("problems/jocp.wnos")).decomposition));
  std::vector<std::string> b =
      Lines(RenderPrograms(Prepare(SourcePath("problems/jocp_log.wnos")).decomposition));
  REQUIRE(a.size() == b.size());
  std::string program;
  std::vector<std::string> diffs;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].rfind("program ", 0) == 0) program = a[i];
    if (a[i] != b[i]) diffs.push_back(program + " |" + a[i]);
  }
  REQUIRE(diffs.size() == 2);
  CHECK(diffs[0] == "program transport netses |  objective: sesrate - sesrate * sum(lbd)");
  CHECK(diffs[1] == "program transport netses |  full: sesrate - sesrate * sum(lbd)");
}

TEST_CASE("errors name the stage") {
  auto message = [](const ExperimentSpec& s) {
    try {
      RunExperiment(s);
    } catch (const Error& e) {
      return std::pair{e.kind(), std::string(e.what())};
    }
    FAIL("expected an error");
    return std::pair{ErrorKind::kIoError, std::string()};
  };
  ExperimentSpec s = Spec("problems/missing.wnos", "2");
  auto [kind, msg] = message(s);
  CHECK(kind == ErrorKind::kIoError);
  CHECK(msg.find("stage 'parse'") != std::string::npos);
  CHECK(msg.find("missing.wnos") != std::string::npos);

  s = Spec("problems/jocp.wnos", "nowhere.cfg");
  std::tie(kind, msg) = message(s);
  CHECK(msg.find("stage 'scenario'") != std::string::npos);
  CHECK(msg.find("nowhere.cfg") != std::string::npos);

  fs::path dir = Scratch("stage");
  fs::create_directories(dir);
  ScenarioConfig bare = ScenarioConfig::Builtin(1);
  bare.target_pps.clear();
  std::ofstream((dir / "bare.cfg").string()) << bare.Render();
  s = Spec("problems/powermin.wnos", (dir / "bare.cfg").string());
  std::tie(kind, msg) = message(s);
  CHECK(kind == ErrorKind::kConfigError);
  CHECK(msg.find("stage 'install'") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("compare_runs") {
  ExperimentSpec spec = Spec("problems/jocp_log.wnos", "3");
  spec.duration_s = 60.0;
  Experiment tp = RunExperiment(spec);

  SUBCASE("a trace against itself") {
    Comparison c = CompareRuns(tp.trace, tp.trace);
    CHECK(c.utility_delta == 0.0);
    CHECK(c.throughput_delta == 0.0);
    CHECK(c.power_delta == 0.0);
    CHECK(c.Render().find("ordering: sum_utility b = a, throughput b = a, power b = a") !=
          std::string::npos);
  }

  SUBCASE("full control beats no control on scenario 3") {
    spec.scheme = Scheme::kNoControl;
    Experiment nc = RunExperiment(spec);
    Comparison c = CompareRuns(nc.trace, tp.trace);
    CHECK(c.utility_delta > 0.0);
    CHECK(c.lines.size() == 6);
  }

  SUBCASE("schema mismatch") {
    Experiment other = RunExperiment(Spec("problems/jocp_log.wnos", "4"));
    CHECK(KindOf([&] { CompareRuns(tp.trace, other.trace); }) == ErrorKind::kSchemaMismatch);
    CHECK(KindOf([] { CompareRuns(Trace{}, Trace{}); }) == ErrorKind::kSchemaMismatch);
  }

  SUBCASE("through csv") {
    fs::path dir = Scratch("csv");
    fs::create_directories(dir);
    std::ofstream(dir / "t.csv") << tp.trace.ToCsv();
    Comparison c = CompareRuns(LoadTrace((dir / "t.csv").string()), tp.trace);
    CHECK(std::abs(c.utility_delta) < 1e-9);
    CHECK(KindOf([&] { LoadTrace((dir / "absent.csv").string()); }) == ErrorKind::kIoError);
    fs::remove_all(dir);
  }
}

TEST_CASE("command line") {
  fs::path dir = Scratch("cli");
  fs::create_directories(dir);
  fs::path log = dir / "log.txt";

  Shell missing = RunCli("--problem " + (dir / "nope.wnos").string() + " --scenario 2", log);
  CHECK(missing.status != 0);
  CHECK(missing.output.find((dir / "nope.wnos").string()) != std::string::npos);
  CHECK(missing.output.find("stage 'parse'") != std::string::npos);

  std::string base = "--problem " + SourcePath("problems/jocp.wnos") + " --scenario " +
                     SourcePath("scenarios/s2.cfg") + " --duration 20";
  Shell ok = RunCli(base + " --seed 3 --out " + (dir / "a").string() + " --dump-programs", log);
  CHECK(ok.status == 0);
  CHECK(ok.output.find("final_sum_utility: ") == 0);
  CHECK(fs::exists(dir / "a" / "programs.txt"));

  Shell again = RunCli(base + " --seed 3 --out " + (dir / "b").string(), log);
  CHECK(again.status == 0);
  CHECK(ReadFile((dir / "a" / "trace.csv").string()) == ReadFile((dir / "b" / "trace.csv").string()));

  Shell self = RunCli("compare " + (dir / "a" / "trace.csv").string() + " " +
                          (dir / "b" / "trace.csv").string(),
                      log);
  CHECK(self.status == 0);
  CHECK(self.output.find("b = a, throughput b = a, power b = a") != std::string::npos);

  Shell sweep = RunCli(base + " --seeds 2 --out " + (dir / "sweep").string(), log);
  CHECK(sweep.status == 0);
  CHECK(fs::exists(dir / "sweep" / "seed_1" / "trace.csv"));
  CHECK(fs::exists(dir / "sweep" / "seed_2" / "trace.csv"));
  CHECK(fs::exists(dir / "sweep" / "sweep.tsv"));

  Shell scheme = RunCli(base + " --scheme fastest", log);
  CHECK(scheme.status != 0);
  CHECK(scheme.output.find("fastest") != std::string::npos);
  fs::remove_all(dir);
}
