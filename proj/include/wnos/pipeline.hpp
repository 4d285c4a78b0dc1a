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

// End-to-end experiments: problem file -> decomposition -> installed
// programs -> simulated trace, plus run comparison.

#ifndef WNOS_PIPELINE_HPP_
#define WNOS_PIPELINE_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wnos/decompose.hpp"
#include "wnos/netsim.hpp"

namespace wnos {

struct ExperimentSpec {
  std::string problem_path;
  std::string scenario;  // config file, or 1-5 for a stock scenario
  Scheme scheme = Scheme::kWnosTP;
  double duration_s = 300.0;
  std::optional<std::uint64_t> seed;  // overrides the scenario's seed
  std::string out_dir;                // empty: nothing is written
  bool dump_dual = false;
  bool dump_programs = false;
  bool dump_instances = false;
  RunOptions options;
};

// Steady-state figures over the second half of a run.
struct Summary {
  double final_sum_utility = 0.0;
  double mean_sum_utility = 0.0;
  std::vector<double> session_throughput;  // mean packets/s per session
  double mean_power = 0.0;                 // over links and epochs
  double window_start_s = 0.0;

  static Summary Of(const Trace& t, int sessions, double duration_s);
  std::string Render() const;
};

struct Experiment {
  ControlProblem problem;
  InstanceMap design_map;  // instance map the templates were derived on
  Decomposition decomposition;
  ScenarioConfig scenario;
  Trace trace;
  Summary summary;
  InvariantCounters invariants;
};

// Problem and templates only (parse through penalize). Errors carry the
// failing stage.
Experiment Prepare(const std::string& problem_path);

// Runs every stage and writes trace.csv, summary.txt and the requested
// dumps into spec.out_dir. Errors carry the failing stage.
Experiment RunExperiment(const ExperimentSpec& spec);

std::string RenderPrograms(const Decomposition& d);
std::string RenderInstances(const InstanceMap& m);

struct Comparison {
  std::vector<std::string> lines;  // metric, a, b, b - a
  double utility_delta = 0.0;      // mean sum utility, b - a
  double throughput_delta = 0.0;   // summed session means, b - a
  double power_delta = 0.0;        // mean power, b - a

  std::string Render() const;
};

// Steady-state deltas (second half of the shorter run) from `a` to `b`.
// Throws SchemaMismatch unless both traces cover the same entities and metrics.
Comparison CompareRuns(const Trace& a, const Trace& b);

Trace LoadTrace(const std::string& path);

}  // namespace wnos

#endif  // WNOS_PIPELINE_HPP_
