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

// Fluid-flow simulator of a multi-hop wireless network.
//
// Sessions are rate processes over fixed paths of links. Links sharing a
// frequency band interfere; capacity follows the link capacity model of
// the element graph, evaluated through the expression engine. Every
// physical epoch each link measures its capacity, moves its dual price and
// (if a power program is installed) re-solves its power; every
// `timescale_ratio` epochs each session source collects prices along its
// path and re-solves its rate.

#ifndef WNOS_NETSIM_HPP_
#define WNOS_NETSIM_HPP_

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "wnos/decompose.hpp"
#include "wnos/instantiate.hpp"
#include "wnos/problem.hpp"
#include "wnos/solve.hpp"

namespace wnos {

// Sessions run along parallel chains: session s occupies nodes
// s*(hops+1) .. s*(hops+1)+hops, placed on the line y = s * chain_gap_m.
struct ScenarioConfig {
  int id = 0;  // 1..5 for the stock scenarios, 0 for custom
  int nodes = 6;
  int sessions = 2;
  int hops = 2;
  int bands = 2;
  double bandwidth_hz = 200e3;
  int packet_bits = 2048;
  std::uint64_t seed = 1;
  double physical_epoch_s = 0.1;
  int timescale_ratio = 30;
  double path_loss_exponent = 3.0;
  double noise = 3e-4;
  double max_gain = 30.0;
  double max_rate_pps = 0.0;  // 0: 1.5x the best interference-free capacity
  double chain_gap_m = 20.0;
  std::vector<double> hop_m;                  // per session
  std::vector<double> offset_m;               // x of each session's source
  std::vector<std::vector<int>> band_pattern;  // per session, per hop
  std::vector<double> budget_packets;         // per session, 0 = unlimited
  std::vector<double> target_pps;             // per session, for rate-as-parameter problems

  // Stock scenarios 1-5. Throws ConfigError.
  static ScenarioConfig Builtin(int id);
  // key=value lines; `#` starts a comment. Lists are comma separated and
  // band_pattern separates sessions with `;`. Throws ConfigError.
  static ScenarioConfig Parse(std::string_view text);
  static ScenarioConfig Load(const std::string& path);
  std::string Render() const;
  void Validate() const;
  bool operator==(const ScenarioConfig&) const = default;
};

struct Node {
  double x = 0.0;
  double y = 0.0;
  double max_gain = 30.0;
};

struct Link {
  int id = 0;
  int tx = 0;
  int rx = 0;
  int band = 0;
  double bandwidth_hz = 0.0;
  double power = 0.0;  // transmit gain value in [0, max_gain]
  double gain = 0.0;   // own channel gain
  double noise = 0.0;
  std::map<int, double> cross;  // interferer link -> gain from its transmitter to our receiver
  double lambda = 0.0;
  bool active = true;
  double itfpwr = 0.0;
  double capacity = 0.0;  // packets/s
};

struct Session {
  int id = 0;
  int source = 0;
  int destination = 0;
  std::vector<int> path;  // link ids, source to destination
  double rate = 0.0;      // packets/s
  double target = 0.0;
  double throughput = 0.0;
  double delivered = 0.0;
  double budget = 0.0;
  bool active = true;
};

// Per-node, per-layer parameter store: state for programs to read and
// decisions they write.
class Registers {
 public:
  void Write(int node, Layer layer, const std::string& key, double value);
  std::optional<double> Read(int node, Layer layer, const std::string& key) const;
  std::size_t size() const { return values_.size(); }

 private:
  std::map<std::tuple<int, Layer, std::string>, double> values_;
};

struct NetState {
  ScenarioConfig cfg;
  std::vector<Node> nodes;
  std::vector<Link> links;
  std::vector<Session> sessions;
  double clock = 0.0;
  int epoch = 0;
  Registers registers;

  // Run-time instance map: netses, netlnk, netnd, seslnk, lnkses, itflnk.
  InstanceMap Instances() const;
};

NetState BuildScenario(const ScenarioConfig& cfg);

// Channel gain between two nodes under log-distance path loss (1 m reference).
double ChannelGain(const NetState& net, int from, int to);

// Capacity of `link` in packets/s at the current powers. Throws DomainError.
double LinkCapacity(const Link& link, const NetState& net);

enum class Scheme { kWnosTP, kWnosT, kWnosP, kNoControl, kBestResponse };
std::string_view SchemeName(Scheme s);
std::optional<Scheme> SchemeFromName(std::string_view name);

struct TraceRecord {
  double time = 0.0;
  std::string entity_kind;  // session, link, network
  int entity_id = 0;
  std::string metric;  // throughput_pps, power_gain_db, lambda, sum_utility
  double value = 0.0;
  bool operator==(const TraceRecord&) const = default;
};

struct Trace {
  std::vector<TraceRecord> records;

  std::string ToCsv() const;
  static Trace FromCsv(std::string_view text);  // Throws SchemaMismatch
  // Time-averaged value of one metric for one entity (all entities if id < 0).
  double Mean(std::string_view metric, int entity_id = -1, double from_time = 0.0) const;
  std::vector<double> Series(std::string_view metric, int entity_id) const;
  bool operator==(const Trace&) const = default;
};

struct RunOptions {
  Scheme scheme = Scheme::kWnosTP;
  SolverConfig physical;
  SolverConfig transport;
  double dual_step = 0.0;        // absolute; 0 derives it from the programs
  double dual_step_rel = 0.1;    // fraction of the reference price moved per unit relative slack
  double rate_smoothing = 0.5;   // sources move this fraction toward each decision
  double power_smoothing = 0.05;  // transmitters likewise, against Jacobi oscillation
  double log_floor = 1e-3;       // throughput floor inside log utilities
};

struct InvariantCounters {
  long lambda_checks = 0;
  long power_checks = 0;
  long throughput_checks = 0;
};

class Simulator {
 public:
  // Resolves the problem's bounds on the topology and draws the initial
  // operating point from the scenario seed.
  Simulator(NetState net, const ControlProblem& problem, RunOptions opts = {});

  // Stores `prog` in the owner's decision register; takes effect at the next
  // epoch boundary. Throws UnknownEntity, UnresolvableCollectionRule.
  void Install(const std::string& entity_set, int id, const ControlProgram& prog);
  // Installs each program on every entity of its set.
  void InstallAll(const std::vector<ControlProgram>& programs);

  // One physical epoch. Throws ValidationError when an invariant breaks.
  void Step();
  Trace Run(double duration_s);

  const NetState& net() const { return net_; }
  NetState& mutable_net() { return net_; }
  const InvariantCounters& invariants() const { return counters_; }
  int transport_updates() const { return transport_updates_; }
  double dual_step() const { return dual_step_; }
  const Box& power_box(int link) const { return power_box_.at(link); }
  const Box& rate_box(int session) const { return rate_box_.at(session); }
  double SumUtility() const;

 private:
  struct Installed {
    ControlProgram program;
    std::shared_ptr<CompiledProgram> compiled;
  };
  using Owner = std::pair<std::string, int>;

  void Measure();
  void ActivatePending();
  void ResolveBounds();
  void InitOperatingPoint();
  double DeriveDualStep();
  double Lookup(const VarId& v, const Owner& owner, const std::map<int, double>& lambda) const;
  Env ParamsFor(const CompiledProgram& cp, const Owner& owner,
                const std::map<int, double>& lambda) const;
  bool RunsPhysical() const;
  bool RunsTransport() const;
  void CheckInvariants();
  void Record(Trace& trace) const;
  void RefreshUtility();

  NetState net_;
  ControlProblem problem_;
  RunOptions opts_;
  InstanceMap runtime_;
  std::map<Owner, Installed> programs_;
  std::map<Owner, Installed> pending_;
  std::vector<Box> power_box_;
  std::vector<Box> rate_box_;
  bool rates_are_params_ = false;
  double dual_step_ = 0.0;
  double reference_capacity_ = 0.0;
  int transport_updates_ = 0;
  Expr utility_;
  InvariantCounters counters_;
};

}  // namespace wnos

#endif  // WNOS_NETSIM_HPP_
