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

// wnos: run a control problem on a simulated network, or compare two runs.
//
//   wnos --problem problems/jocp.wnos --scenario 2 --out runs/s2
//   wnos compare runs/a/trace.csv runs/b/trace.csv

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "wnos/error.hpp"
#include "wnos/pipeline.hpp"

namespace {

int RunSweep(wnos::ExperimentSpec spec, int seeds) {
  namespace fs = std::filesystem;
  const std::uint64_t first = spec.seed.value_or(1);
  const std::string root = spec.out_dir;
  std::string table = "seed\tmean_sum_utility\tfinal_sum_utility\tmean_power_gain\n";
  for (int k = 0; k < seeds; ++k) {
    spec.seed = first + k;
    if (seeds > 1 && !root.empty()) spec.out_dir = (fs::path(root) / ("seed_" + std::to_string(*spec.seed))).string();
    wnos::Experiment x = wnos::RunExperiment(spec);
    char row[160];
    std::snprintf(row, sizeof row, "%llu\t%.10g\t%.10g\t%.10g\n",
                  static_cast<unsigned long long>(*spec.seed), x.summary.mean_sum_utility,
                  x.summary.final_sum_utility, x.summary.mean_power);
    table += row;
    if (seeds == 1) std::cout << x.summary.Render();
  }
  if (seeds > 1) {
    std::cout << table;
    if (!root.empty()) {
      std::ofstream(fs::path(root) / "sweep.tsv") << table;
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate distributed control programs from a network control problem and run them"};
  app.require_subcommand(0, 1);

  wnos::ExperimentSpec spec;
  std::string scheme = "wnos-t-p";
  std::uint64_t seed = 0;
  int seeds = 1;
  app.add_option("--problem", spec.problem_path, "Problem file (.wnos)");
  app.add_option("--scenario", spec.scenario, "Scenario config file, or 1-5 for a stock scenario");
  app.add_option("--scheme", scheme, "wnos-t-p, wnos-t, wnos-p, no-control or best-response")
      ->capture_default_str();
  app.add_option("--duration", spec.duration_s, "Simulated seconds")->capture_default_str();
  CLI::Option* seed_opt = app.add_option("--seed", seed, "Seed for the initial operating point");
  app.add_option("--out", spec.out_dir, "Output directory for trace.csv and summary.txt");
  app.add_flag("--dump-dual", spec.dump_dual, "Write the dual problem to dual.txt");
  app.add_flag("--dump-programs", spec.dump_programs, "Write the control programs to programs.txt");
  app.add_flag("--dump-instances", spec.dump_instances, "Write the instance map to instances.txt");
  app.add_option("--seeds", seeds, "Run this many consecutive seeds")->check(CLI::PositiveNumber);

  CLI::App* compare = app.add_subcommand("compare", "Steady-state deltas from trace A to trace B");
  std::string trace_a, trace_b;
  compare->add_option("a", trace_a, "Baseline trace.csv")->required();
  compare->add_option("b", trace_b, "Compared trace.csv")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (compare->parsed()) {
      wnos::Comparison c = wnos::CompareRuns(wnos::LoadTrace(trace_a), wnos::LoadTrace(trace_b));
      std::cout << c.Render();
      return 0;
    }
    if (spec.problem_path.empty() || spec.scenario.empty()) {
      std::cerr << "wnos: --problem and --scenario are required\n";
      return 2;
    }
    auto parsed = wnos::SchemeFromName(scheme);
    if (!parsed) {
      std::cerr << "wnos: unknown scheme '" << scheme << "'\n";
      return 2;
    }
    spec.scheme = *parsed;
    if (seed_opt->count()) spec.seed = seed;
    return RunSweep(spec, seeds);
  } catch (const wnos::Error& e) {
    std::cerr << "wnos: error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "wnos: internal error: " << e.what() << "\n";
    return 3;
  }
}
