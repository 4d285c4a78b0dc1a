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

// Python bindings for the main pipeline operations.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <optional>
#include <string>

#include "wnos/error.hpp"
#include "wnos/expr_parse.hpp"
#include "wnos/pipeline.hpp"

namespace py = pybind11;
using namespace wnos;

namespace {

py::dict SummaryDict(const Summary& s) {
  py::dict d;
  d["final_sum_utility"] = s.final_sum_utility;
  d["mean_sum_utility"] = s.mean_sum_utility;
  d["session_throughput"] = s.session_throughput;
  d["mean_power"] = s.mean_power;
  d["window_start_s"] = s.window_start_s;
  return d;
}

Scheme ParseScheme(const std::string& name) {
  auto s = SchemeFromName(name);
  if (!s) throw Error(ErrorKind::kConfigError, "unknown scheme '" + name + "'");
  return *s;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Network control problems to distributed control programs, and their simulation";

  // Leaked on purpose: the type must outlive the interpreter's module teardown.
  static py::handle error = py::exception<Error>(m, "WnosError", PyExc_RuntimeError).release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = error(e.what());
      exc.attr("kind") = std::string(ErrorKindName(e.kind()));
      PyErr_SetObject(error.ptr(), exc.ptr());
    }
  });

  m.def("parse_expr", [](const std::string& text) { return ParseExpr(text).str(); },
        py::arg("text"), "Canonical rendering of an expression.");
  m.def(
      "differentiate",
      [](const std::string& text, const std::string& var) {
        return Differentiate(ParseExpr(text), VarId::Parse(var)).str();
      },
      py::arg("expr"), py::arg("var"), "Symbolic derivative, rendered.");
  m.def(
      "evaluate",
      [](const std::string& text, const std::map<std::string, double>& values) {
        Env env;
        for (const auto& [k, v] : values) env.set(k, v);
        return Eval(ParseExpr(text), env);
      },
      py::arg("expr"), py::arg("values"));
  m.def("binomial", &Binomial, py::arg("n"), py::arg("k"));

  m.def(
      "decompose",
      [](const std::string& problem_path) {
        Experiment x = Prepare(problem_path);
        py::dict d;
        d["dual"] = x.decomposition.dual.Render();
        d["programs"] = RenderPrograms(x.decomposition);
        d["instances"] = RenderInstances(x.design_map);
        return d;
      },
      py::arg("problem_path"), "Dual, control programs and instance map of a problem file.");

  m.def("scenario", [](int n) { return ScenarioConfig::Builtin(n).Render(); }, py::arg("n"),
        "Configuration text of a stock scenario (1-5).");

  m.def(
      "run_experiment",
      [](const std::string& problem, const std::string& scenario, const std::string& scheme,
         double duration, std::optional<std::uint64_t> seed, const std::string& out_dir,
         bool dump_dual, bool dump_programs, bool dump_instances) {
        ExperimentSpec spec;
        spec.problem_path = problem;
        spec.scenario = scenario;
        spec.scheme = ParseScheme(scheme);
        spec.duration_s = duration;
        spec.seed = seed;
        spec.out_dir = out_dir;
        spec.dump_dual = dump_dual;
        spec.dump_programs = dump_programs;
        spec.dump_instances = dump_instances;
        Experiment x;
        {
          py::gil_scoped_release release;
          x = RunExperiment(spec);
        }
        py::dict d = SummaryDict(x.summary);
        d["trace_csv"] = x.trace.ToCsv();
        d["invariant_checks"] = x.invariants.lambda_checks + x.invariants.power_checks +
                                x.invariants.throughput_checks;
        return d;
      },
      py::arg("problem"), py::arg("scenario"), py::arg("scheme") = "wnos-t-p",
      py::arg("duration") = 300.0, py::arg("seed") = py::none(), py::arg("out_dir") = "",
      py::arg("dump_dual") = false, py::arg("dump_programs") = false,
      py::arg("dump_instances") = false,
      "Runs the whole pipeline; returns the summary plus the trace as CSV text.");

  m.def(
      "compare_runs",
      [](const std::string& csv_a, const std::string& csv_b) {
        Comparison c = CompareRuns(Trace::FromCsv(csv_a), Trace::FromCsv(csv_b));
        py::dict d;
        d["utility_delta"] = c.utility_delta;
        d["throughput_delta"] = c.throughput_delta;
        d["power_delta"] = c.power_delta;
        d["report"] = c.Render();
        return d;
      },
      py::arg("trace_a"), py::arg("trace_b"), "Steady-state deltas between two CSV traces.");
}
