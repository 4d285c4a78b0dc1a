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

#include "wnos/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "wnos/compiled.hpp"
#include "wnos/error.hpp"
#include "wnos/expr_parse.hpp"

namespace wnos {

namespace {

[[noreturn]] void Bad(const std::string& msg) { throw Error(ErrorKind::kConfigError, msg); }

std::string Trim(std::string_view s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  std::size_t e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> Split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = s.find(sep, start);
    out.push_back(Trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double ToDouble(const std::string& key, const std::string& text) {
  char* end = nullptr;
  double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size() || !std::isfinite(v)) {
    Bad("'" + key + "': not a number: '" + text + "'");
  }
  return v;
}

int ToInt(const std::string& key, const std::string& text) {
  double v = ToDouble(key, text);
  if (v != std::floor(v) || std::abs(v) > 1e9) Bad("'" + key + "': not an integer: '" + text + "'");
  return static_cast<int>(v);
}

std::vector<double> ToList(const std::string& key, const std::string& text) {
  std::vector<double> out;
  if (text.empty()) return out;
  for (const std::string& item : Split(text, ',')) out.push_back(ToDouble(key, item));
  return out;
}

std::string Num(double v) {
  if (v == std::floor(v) && std::abs(v) < 1e15) return std::to_string(static_cast<long long>(v));
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // Prefer the shortest representation that reads back exactly.
  for (int prec = 1; prec < 17; ++prec) {
    char shorter[64];
    std::snprintf(shorter, sizeof shorter, "%.*g", prec, v);
    if (std::strtod(shorter, nullptr) == v) return shorter;
  }
  return buf;
}

std::string JoinNums(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + Num(v[i]);
  return out;
}

double Distance(const Node& a, const Node& b) { return std::hypot(a.x - b.x, a.y - b.y); }

// The capacity model compiled once for all links.
struct CapacityModel {
  SlotMap slots;
  CompiledExpr expr;
  int freq, pwr, gain, noise, gain_itf, itf;

  CapacityModel() {
    freq = slots.Intern(VarId("freq"));
    pwr = slots.Intern(VarId("lnkpwr"));
    gain = slots.Intern(VarId("lnkgain"));
    noise = slots.Intern(VarId("lnknoise"));
    gain_itf = slots.Intern(VarId("lnkgain_itf"));
    itf = slots.Intern(VarId("itfpwr"));
    expr = CompiledExpr(ParseExpr(kLinkCapacityModel), slots);
  }
};

const CapacityModel& Capacity() {
  static const CapacityModel model;
  return model;
}

double Frequency(const Link& l, const NetState& net) {
  return l.bandwidth_hz / net.cfg.packet_bits;
}

double Interference(const Link& l, const NetState& net) {
  double itf = 0.0;
  for (const auto& [k, g] : l.cross) {
    const Link& other = net.links[k];
    if (other.active) itf += g * other.power;
  }
  return itf;
}

LocalInstances MakeLocal(std::string element, std::string owner_set, std::string member_set,
                         std::map<int, std::vector<int>> members, bool derived) {
  LocalInstances li;
  li.element = std::move(element);
  li.owner_set = std::move(owner_set);
  li.member_set = std::move(member_set);
  for (auto& [owner, m] : members) {
    std::sort(m.begin(), m.end());
    li.hashes[owner] = HashId(m);
  }
  li.members = std::move(members);
  li.derived = derived;
  return li;
}

constexpr const char* kCsvHeader = "time,entity_kind,entity_id,metric,value";

bool KnownKind(std::string_view k) { return k == "session" || k == "link" || k == "network"; }
bool KnownMetric(std::string_view m) {
  return m == "throughput_pps" || m == "power_gain_db" || m == "lambda" || m == "sum_utility";
}

}  // namespace

// ---------------------------------------------------------------------------
// Scenario configuration

ScenarioConfig ScenarioConfig::Builtin(int id) {
  ScenarioConfig c;
  c.id = id;
  switch (id) {
    case 1:
    case 2:
    case 3:
      // Two parallel two-hop chains on two bands; session 0 has the
      // shorter hops. The band plan sets the interference level.
      c.nodes = 6;
      c.sessions = 2;
      c.hops = 2;
      c.bands = 2;
      c.hop_m = {8, 12};
      c.offset_m = {0, 0};
      if (id == 1) c.band_pattern = {{0, 1}, {1, 0}};
      if (id == 2) c.band_pattern = {{0, 1}, {0, 1}};
      if (id == 3) c.band_pattern = {{0, 0}, {0, 0}};
      c.budget_packets = {0, 0};
      c.target_pps = {200, 150};
      break;
    case 4:
      c.nodes = 9;
      c.sessions = 3;
      c.hops = 2;
      c.bands = 2;
      c.hop_m = {8, 10, 12};
      c.offset_m = {0, 0, 0};
      c.band_pattern = {{0, 1}, {1, 0}, {0, 1}};
      c.budget_packets = {0, 0, 0};
      c.target_pps = {200, 150, 120};
      break;
    case 5:
      // Three six-hop chains; hop k of every chain uses band k.
      c.nodes = 21;
      c.sessions = 3;
      c.hops = 6;
      c.bands = 6;
      c.hop_m = {9, 11, 10};
      c.offset_m = {0, 0, 0};
      c.band_pattern.assign(3, {0, 1, 2, 3, 4, 5});
      c.budget_packets = {0, 0, 0};
      c.target_pps = {150, 100, 120};
      break;
    default:
      Bad("no stock scenario " + std::to_string(id) + " (expected 1-5)");
  }
  c.Validate();
  return c;
}

ScenarioConfig ScenarioConfig::Parse(std::string_view text) {
  ScenarioConfig c;
  c.hop_m.clear();
  std::set<std::string> seen;
  int line_no = 0;
  for (const std::string& raw : Split(text, '\n')) {
    ++line_no;
    std::string line = raw.substr(0, raw.find('#'));
    line = Trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) Bad("line " + std::to_string(line_no) + ": expected key=value");
    std::string key = Trim(line.substr(0, eq));
    std::string val = Trim(line.substr(eq + 1));
    if (!seen.insert(key).second) Bad("line " + std::to_string(line_no) + ": duplicate '" + key + "'");
    if (key == "id") c.id = ToInt(key, val);
    else if (key == "nodes") c.nodes = ToInt(key, val);
    else if (key == "sessions") c.sessions = ToInt(key, val);
    else if (key == "hops") c.hops = ToInt(key, val);
    else if (key == "bands") c.bands = ToInt(key, val);
    else if (key == "bandwidth_hz") c.bandwidth_hz = ToDouble(key, val);
    else if (key == "packet_bits") c.packet_bits = ToInt(key, val);
    else if (key == "seed") {
      double s = ToDouble(key, val);
      if (s < 0 || s != std::floor(s)) Bad("'seed': expected a non-negative integer");
      c.seed = static_cast<std::uint64_t>(s);
    } else if (key == "physical_epoch_s") c.physical_epoch_s = ToDouble(key, val);
    else if (key == "timescale_ratio") c.timescale_ratio = ToInt(key, val);
    else if (key == "path_loss_exponent") c.path_loss_exponent = ToDouble(key, val);
    else if (key == "noise") c.noise = ToDouble(key, val);
    else if (key == "max_gain") c.max_gain = ToDouble(key, val);
    else if (key == "max_rate_pps") c.max_rate_pps = ToDouble(key, val);
    else if (key == "chain_gap_m") c.chain_gap_m = ToDouble(key, val);
    else if (key == "hop_m") c.hop_m = ToList(key, val);
    else if (key == "offset_m") c.offset_m = ToList(key, val);
    else if (key == "budget_packets") c.budget_packets = ToList(key, val);
    else if (key == "target_pps") c.target_pps = ToList(key, val);
    else if (key == "band_pattern") {
      c.band_pattern.clear();
      for (const std::string& ses : Split(val, ';')) {
        std::vector<int> bands;
        for (double b : ToList(key, ses)) bands.push_back(ToInt(key, Num(b)));
        c.band_pattern.push_back(bands);
      }
    } else {
      Bad("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  c.Validate();
  return c;
}

ScenarioConfig ScenarioConfig::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIoError, "cannot read scenario '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return Parse(ss.str());
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
}

std::string ScenarioConfig::Render() const {
  std::ostringstream os;
  os << "id = " << id << "\n";
  os << "nodes = " << nodes << "\n";
  os << "sessions = " << sessions << "\n";
  os << "hops = " << hops << "\n";
  os << "bands = " << bands << "\n";
  os << "bandwidth_hz = " << Num(bandwidth_hz) << "\n";
  os << "packet_bits = " << packet_bits << "\n";
  os << "seed = " << seed << "\n";
  os << "physical_epoch_s = " << Num(physical_epoch_s) << "\n";
  os << "timescale_ratio = " << timescale_ratio << "\n";
  os << "path_loss_exponent = " << Num(path_loss_exponent) << "\n";
  os << "noise = " << Num(noise) << "\n";
  os << "max_gain = " << Num(max_gain) << "\n";
  os << "max_rate_pps = " << Num(max_rate_pps) << "\n";
  os << "chain_gap_m = " << Num(chain_gap_m) << "\n";
  os << "hop_m = " << JoinNums(hop_m) << "\n";
  os << "offset_m = " << JoinNums(offset_m) << "\n";
  os << "band_pattern = ";
  for (std::size_t s = 0; s < band_pattern.size(); ++s) {
    os << (s ? "; " : "");
    for (std::size_t h = 0; h < band_pattern[s].size(); ++h) os << (h ? "," : "") << band_pattern[s][h];
  }
  os << "\n";
  os << "budget_packets = " << JoinNums(budget_packets) << "\n";
  os << "target_pps = " << JoinNums(target_pps) << "\n";
  return os.str();
}

void ScenarioConfig::Validate() const {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) Bad(msg);
  };
  need(sessions >= 1, "sessions must be >= 1");
  need(hops >= 1, "hops must be >= 1");
  need(nodes == sessions * (hops + 1),
       "nodes must equal sessions * (hops + 1) = " + std::to_string(sessions * (hops + 1)));
  need(bands >= 1, "bands must be >= 1");
  need(bandwidth_hz > 0, "bandwidth_hz must be positive");
  need(packet_bits > 0, "packet_bits must be positive");
  need(physical_epoch_s > 0, "physical_epoch_s must be positive");
  need(timescale_ratio >= 1, "timescale_ratio must be >= 1");
  need(path_loss_exponent > 0, "path_loss_exponent must be positive");
  need(noise > 0, "noise must be positive");
  need(max_gain > 0, "max_gain must be positive");
  need(max_rate_pps >= 0, "max_rate_pps must be >= 0");
  need(chain_gap_m > 0, "chain_gap_m must be positive");
  auto per_session = [&](std::size_t n, bool optional, const char* key) {
    need(n == static_cast<std::size_t>(sessions) || (optional && n == 0),
         std::string(key) + " needs one entry per session");
  };
  per_session(hop_m.size(), false, "hop_m");
  per_session(offset_m.size(), true, "offset_m");
  per_session(band_pattern.size(), false, "band_pattern");
  per_session(budget_packets.size(), true, "budget_packets");
  per_session(target_pps.size(), true, "target_pps");
  for (double h : hop_m) need(h > 0, "hop_m entries must be positive");
  for (double b : budget_packets) need(b >= 0, "budget_packets entries must be >= 0");
  for (double t : target_pps) need(t >= 0, "target_pps entries must be >= 0");
  for (const auto& row : band_pattern) {
    need(row.size() == static_cast<std::size_t>(hops), "band_pattern needs one band per hop");
    for (int b : row) need(b >= 0 && b < bands, "band_pattern entry out of range");
  }
}

// ---------------------------------------------------------------------------
// Network state

void Registers::Write(int node, Layer layer, const std::string& key, double value) {
  values_[{node, layer, key}] = value;
}

std::optional<double> Registers::Read(int node, Layer layer, const std::string& key) const {
  auto it = values_.find({node, layer, key});
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

InstanceMap NetState::Instances() const {
  InstanceMap m;
  std::vector<int> ses, lnk, nd;
  for (const Session& s : sessions) ses.push_back(s.id);
  for (const Link& l : links) lnk.push_back(l.id);
  for (std::size_t i = 0; i < nodes.size(); ++i) nd.push_back(static_cast<int>(i));
  m.globals["netses"] = ses;
  m.globals["netlnk"] = lnk;
  m.globals["netnd"] = nd;

  std::map<int, std::vector<int>> seslnk, lnkses, itflnk;
  for (const Session& s : sessions) seslnk[s.id] = s.path;
  for (const Link& l : links) {
    lnkses[l.id];
    std::vector<int>& itf = itflnk[l.id];
    for (const auto& [k, g] : l.cross) itf.push_back(k);
  }
  for (const Session& s : sessions) {
    for (int l : s.path) lnkses[l].push_back(s.id);
  }
  m.locals["seslnk"] = MakeLocal("seslnk", "netses", "netlnk", seslnk, false);
  m.locals["lnkses"] = MakeLocal("lnkses", "netlnk", "netses", lnkses, true);
  m.locals["itflnk"] = MakeLocal("itflnk", "netlnk", "netlnk", itflnk, false);
  return m;
}

double ChannelGain(const NetState& net, int from, int to) {
  double d = std::max(1.0, Distance(net.nodes.at(from), net.nodes.at(to)));
  return std::pow(d, -net.cfg.path_loss_exponent);
}

NetState BuildScenario(const ScenarioConfig& cfg) {
  cfg.Validate();
  NetState net;
  net.cfg = cfg;
  for (int s = 0; s < cfg.sessions; ++s) {
    double x0 = cfg.offset_m.empty() ? 0.0 : cfg.offset_m[s];
    for (int h = 0; h <= cfg.hops; ++h) {
      net.nodes.push_back({x0 + h * cfg.hop_m[s], s * cfg.chain_gap_m, cfg.max_gain});
    }
  }
  for (int s = 0; s < cfg.sessions; ++s) {
    Session ses;
    ses.id = s;
    ses.source = s * (cfg.hops + 1);
    ses.destination = ses.source + cfg.hops;
    ses.budget = cfg.budget_packets.empty() ? 0.0 : cfg.budget_packets[s];
    ses.target = cfg.target_pps.empty() ? 0.0 : cfg.target_pps[s];
    for (int h = 0; h < cfg.hops; ++h) {
      Link l;
      l.id = static_cast<int>(net.links.size());
      l.tx = ses.source + h;
      l.rx = l.tx + 1;
      l.band = cfg.band_pattern[s][h];
      l.bandwidth_hz = cfg.bandwidth_hz;
      l.noise = cfg.noise;
      ses.path.push_back(l.id);
      net.links.push_back(l);
    }
    net.sessions.push_back(ses);
  }
  for (Link& l : net.links) l.gain = ChannelGain(net, l.tx, l.rx);
  // Co-band transmitters reach our receiver. A transmitter sitting on our
  // own receiver is the relay itself and does not count.
  for (Link& l : net.links) {
    for (const Link& k : net.links) {
      if (k.id == l.id || k.band != l.band || k.tx == l.rx) continue;
      l.cross[k.id] = ChannelGain(net, k.tx, l.rx);
    }
  }
  return net;
}

double LinkCapacity(const Link& link, const NetState& net) {
  if (!link.active) return 0.0;
  const CapacityModel& cm = Capacity();
  std::vector<double> v(cm.slots.size());
  v[cm.freq] = Frequency(link, net);
  v[cm.pwr] = link.power;
  v[cm.gain] = link.gain;
  v[cm.noise] = link.noise;
  v[cm.gain_itf] = 1.0;
  v[cm.itf] = Interference(link, net);
  return cm.expr(v);
}

std::string_view SchemeName(Scheme s) {
  switch (s) {
    case Scheme::kWnosTP: return "wnos-t-p";
    case Scheme::kWnosT: return "wnos-t";
    case Scheme::kWnosP: return "wnos-p";
    case Scheme::kNoControl: return "no-control";
    case Scheme::kBestResponse: return "best-response";
  }
  return "?";
}

std::optional<Scheme> SchemeFromName(std::string_view name) {
  for (Scheme s : {Scheme::kWnosTP, Scheme::kWnosT, Scheme::kWnosP, Scheme::kNoControl,
                   Scheme::kBestResponse}) {
    if (SchemeName(s) == name) return s;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Traces

std::string Trace::ToCsv() const {
  std::string out = std::string(kCsvHeader) + "\n";
  char buf[160];
  for (const TraceRecord& r : records) {
    std::snprintf(buf, sizeof buf, "%.17g,%s,%d,%s,%.17g\n", r.time, r.entity_kind.c_str(),
                  r.entity_id, r.metric.c_str(), r.value);
    out += buf;
  }
  return out;
}

Trace Trace::FromCsv(std::string_view text) {
  auto fail = [](int line, const std::string& msg) {
    throw Error(ErrorKind::kSchemaMismatch, "line " + std::to_string(line) + ": " + msg);
  };
  Trace t;
  std::vector<std::string> lines = Split(text, '\n');
  if (lines.empty() || lines[0] != kCsvHeader) fail(1, std::string("expected header '") + kCsvHeader + "'");
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (line.empty()) continue;
    std::vector<std::string> f = Split(line, ',');
    int n = static_cast<int>(i) + 1;
    if (f.size() != 5) fail(n, "expected 5 fields, got " + std::to_string(f.size()));
    TraceRecord r;
    char* end = nullptr;
    r.time = std::strtod(f[0].c_str(), &end);
    if (f[0].empty() || *end) fail(n, "bad time '" + f[0] + "'");
    r.entity_kind = f[1];
    if (!KnownKind(r.entity_kind)) fail(n, "unknown entity kind '" + f[1] + "'");
    long id = std::strtol(f[2].c_str(), &end, 10);
    if (f[2].empty() || *end) fail(n, "bad entity id '" + f[2] + "'");
    r.entity_id = static_cast<int>(id);
    r.metric = f[3];
    if (!KnownMetric(r.metric)) fail(n, "unknown metric '" + f[3] + "'");
    r.value = std::strtod(f[4].c_str(), &end);
    if (f[4].empty() || *end) fail(n, "bad value '" + f[4] + "'");
    t.records.push_back(std::move(r));
  }
  return t;
}

double Trace::Mean(std::string_view metric, int entity_id, double from_time) const {
  double sum = 0.0;
  long n = 0;
  for (const TraceRecord& r : records) {
    if (r.metric != metric || r.time < from_time) continue;
    if (entity_id >= 0 && r.entity_id != entity_id) continue;
    sum += r.value;
    ++n;
  }
  return n ? sum / n : 0.0;
}

std::vector<double> Trace::Series(std::string_view metric, int entity_id) const {
  std::vector<double> out;
  for (const TraceRecord& r : records) {
    if (r.metric == metric && r.entity_id == entity_id) out.push_back(r.value);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Simulator

Simulator::Simulator(NetState net, const ControlProblem& problem, RunOptions opts)
    : net_(std::move(net)), problem_(problem), opts_(std::move(opts)) {
  opts_.physical.Validate();
  opts_.transport.Validate();
  if (!(opts_.rate_smoothing > 0 && opts_.rate_smoothing <= 1)) {
    Bad("rate_smoothing must lie in (0, 1]");
  }
  if (!(opts_.power_smoothing > 0 && opts_.power_smoothing <= 1)) {
    Bad("power_smoothing must lie in (0, 1]");
  }
  if (!(opts_.dual_step >= 0) || !(opts_.dual_step_rel > 0)) Bad("dual step must be positive");
  if (!problem_.utility) Bad("problem has no composed utility");
  runtime_ = net_.Instances();
  rates_are_params_ = !problem_.IsControlElement("sesrate");

  // Interference-free capacity at full power sets the rate and price scales.
  double best = 0.0, total = 0.0;
  for (Link& l : net_.links) {
    NetState solo = net_;
    for (Link& k : solo.links) k.active = k.id == l.id;
    solo.links[l.id].power = net_.nodes[l.tx].max_gain;
    double c = LinkCapacity(solo.links[l.id], solo);
    best = std::max(best, c);
    total += c;
  }
  reference_capacity_ = total / net_.links.size();
  if (net_.cfg.max_rate_pps <= 0) net_.cfg.max_rate_pps = 1.5 * best;

  ResolveBounds();
  InitOperatingPoint();
  RefreshUtility();
  Measure();
}

namespace {

// Entities reached by walking a quantified path over the topology.
struct Walk {
  std::string kind;  // session, link, node
  std::vector<int> ids;
};

std::vector<int> Select(const std::vector<int>& ids, const Quant& q) {
  if (q.kind != QuantKind::kOrdinal) return ids;
  if (q.ordinal < 1 || q.ordinal > static_cast<int>(ids.size())) {
    Bad("ordinal " + std::to_string(q.ordinal) + " out of range");
  }
  return {ids[q.ordinal - 1]};
}

}  // namespace

void Simulator::ResolveBounds() {
  const double max_rate = net_.cfg.max_rate_pps;
  power_box_.clear();
  rate_box_.clear();
  for (const Link& l : net_.links) power_box_.push_back({0.0, net_.nodes[l.tx].max_gain});
  for (std::size_t s = 0; s < net_.sessions.size(); ++s) rate_box_.push_back({1.0, max_rate});

  const ElementGraph& g = problem_.graph();
  for (const Bound& b : problem_.bounds) {
    std::string element = g.Canonical(b.element);
    if (element != "lnkpwr" && element != "sesrate") {
      Bad("bound on '" + element + "' has no simulator counterpart");
    }
    Walk w;
    for (std::size_t i = 0; i + 1 < b.path.size(); ++i) {
      std::string step = g.Canonical(b.path[i]);
      Quant q = i < b.quants.size() ? b.quants[i] : Quant::All();
      std::vector<int> next;
      std::string kind;
      if (step == "netses") {
        kind = "session";
        next = runtime_.Global("netses");
      } else if (step == "netlnk") {
        kind = "link";
        next = runtime_.Global("netlnk");
      } else if (step == "netnd") {
        kind = "node";
        next = runtime_.Global("netnd");
      } else if (step == "seslnk" && w.kind == "session") {
        kind = "link";
        for (int s : w.ids) {
          const auto& m = runtime_.Local("seslnk").members.at(s);
          next.insert(next.end(), m.begin(), m.end());
        }
      } else if (step == "lnkses" && w.kind == "link") {
        kind = "session";
        for (int l : w.ids) {
          const auto& m = runtime_.Local("lnkses").members.at(l);
          next.insert(next.end(), m.begin(), m.end());
        }
      } else if ((step == "Link" || step == "lnknd") && w.kind == "node") {
        kind = "link";
        for (const Link& l : net_.links) {
          if (std::count(w.ids.begin(), w.ids.end(), l.tx)) next.push_back(l.id);
        }
      } else {
        Bad("cannot resolve bound path step '" + step + "'");
      }
      std::sort(next.begin(), next.end());
      next.erase(std::unique(next.begin(), next.end()), next.end());
      w.kind = kind;
      w.ids = Select(next, q);
    }
    std::string want = element == "lnkpwr" ? "link" : "session";
    if (w.kind == "node" && element == "lnkpwr") {
      // A node-level cap binds every link the node transmits on.
      std::vector<int> links;
      for (const Link& l : net_.links) {
        if (std::count(w.ids.begin(), w.ids.end(), l.tx)) links.push_back(l.id);
      }
      w = {"link", links};
    }
    if (w.kind != want) Bad("bound on '" + element + "' does not end at a " + want);
    std::vector<Box>& boxes = element == "lnkpwr" ? power_box_ : rate_box_;
    for (int id : w.ids) {
      Box& box = boxes[id];
      if (b.upper) box.upper = std::min(box.upper, *b.upper);
      if (b.lower) box.lower = std::max(box.lower, *b.lower);
      if (!(box.lower <= box.upper)) Bad("empty box on " + element + " of entity " + std::to_string(id));
    }
  }
}

void Simulator::InitOperatingPoint() {
  std::mt19937_64 rng(net_.cfg.seed);
  for (Link& l : net_.links) {
    const Box& b = power_box_[l.id];
    l.power = std::uniform_real_distribution<double>(b.lower, b.upper)(rng);
    if (opts_.scheme == Scheme::kBestResponse) l.power = b.upper;
  }
  for (Session& s : net_.sessions) {
    const Box& b = rate_box_[s.id];
    s.rate = std::uniform_real_distribution<double>(b.lower, b.upper)(rng);
    if (opts_.scheme == Scheme::kBestResponse) s.rate = b.upper;
    if (rates_are_params_) {
      if (net_.cfg.target_pps.empty()) Bad("problem fixes session rates but the scenario has no target_pps");
      s.rate = s.target;
    }
  }
}

void Simulator::RefreshUtility() {
  InstanceMap active = runtime_;
  std::vector<int> ses, lnk;
  for (const Session& s : net_.sessions) {
    if (s.active) ses.push_back(s.id);
  }
  for (const Link& l : net_.links) {
    if (l.active) lnk.push_back(l.id);
  }
  active.globals["netses"] = ses;
  active.globals["netlnk"] = lnk;
  utility_ = ExpandAgainst(*problem_.utility, active, "", 0);
}

double Simulator::SumUtility() const {
  Env env;
  for (const Session& s : net_.sessions) {
    env.set(VarId("sesrate", s.id), std::max(s.throughput, opts_.log_floor));
  }
  for (const Link& l : net_.links) env.set(VarId("lnkpwr", l.id), l.power);
  return Eval(utility_, env);
}

void Simulator::Measure() {
  for (Link& l : net_.links) {
    l.itfpwr = l.active ? Interference(l, net_) : 0.0;
    l.capacity = LinkCapacity(l, net_);
  }
}

void Simulator::Install(const std::string& entity_set, int id, const ControlProgram& prog) {
  auto g = runtime_.globals.find(entity_set);
  if (g == runtime_.globals.end() || !std::count(g->second.begin(), g->second.end(), id)) {
    throw Error(ErrorKind::kUnknownEntity, entity_set + " has no entity " + std::to_string(id));
  }
  if (prog.entity_set != entity_set) {
    throw Error(ErrorKind::kUnknownEntity,
                "program for " + prog.entity_set + " installed on " + entity_set);
  }
  const std::string& rule = prog.collection;
  if (!rule.empty() && rule != "self") {
    if (!runtime_.HasLocal(rule) || runtime_.Local(rule).owner_set != entity_set ||
        !runtime_.Local(rule).members.count(id)) {
      throw Error(ErrorKind::kUnresolvableCollectionRule,
                  "collection rule '" + rule + "' has no instance for " + entity_set + " " +
                      std::to_string(id));
    }
  }
  EntityProgram ep;
  try {
    ep = Concretize(prog, runtime_, id);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kUnboundIndexSet) throw;
    throw Error(ErrorKind::kUnresolvableCollectionRule, e.what());
  }
  for (std::size_t i = 0; i < ep.controls.size(); ++i) {
    const std::string& base = ep.controls[i].base;
    if (base == "lnkpwr") ep.boxes[i] = power_box_.at(id);
    else if (base == "sesrate") ep.boxes[i] = rate_box_.at(id);
    else Bad("control '" + base + "' has no simulator actuator");
  }
  pending_[{entity_set, id}] = {prog, std::make_shared<CompiledProgram>(std::move(ep))};
}

void Simulator::InstallAll(const std::vector<ControlProgram>& programs) {
  for (const ControlProgram& p : programs) {
    if (rates_are_params_ && p.layer == Layer::kTransport) continue;
    for (int id : runtime_.Global(p.entity_set)) Install(p.entity_set, id, p);
  }
}

void Simulator::ActivatePending() {
  for (auto& [owner, inst] : pending_) programs_[owner] = std::move(inst);
  pending_.clear();
}

bool Simulator::RunsPhysical() const {
  return opts_.scheme == Scheme::kWnosTP || opts_.scheme == Scheme::kWnosP;
}

bool Simulator::RunsTransport() const {
  return opts_.scheme == Scheme::kWnosTP || opts_.scheme == Scheme::kWnosT;
}

double Simulator::Lookup(const VarId& v, const Owner& owner,
                         const std::map<int, double>& lambda) const {
  if (!v.index) throw Error(ErrorKind::kUnboundVariable, "'" + v.str() + "' has no entity index");
  int i = *v.index;
  auto link = [&]() -> const Link& {
    if (i < 0 || i >= static_cast<int>(net_.links.size())) {
      throw Error(ErrorKind::kUnknownEntity, "no link " + std::to_string(i) + " for " + v.str());
    }
    return net_.links[i];
  };
  const std::string& b = v.base;
  if (b == "lbd") return lambda.count(i) ? lambda.at(i) : link().lambda;
  if (b == "lnkpwr" || b == "lnkpwr0") return link().power;
  if (b == "freq") return Frequency(link(), net_);
  if (b == "lnkgain") return link().gain;
  if (b == "lnknoise") return link().noise;
  if (b == "lnkgain_itf") return 1.0;
  if (b == "itfpwr") return link().itfpwr;
  if (b == "lnkcap") return link().capacity;
  if (b == "xgain") {
    // Gain from the owner's transmitter into link i's receiver.
    if (owner.first != "netlnk") throw Error(ErrorKind::kUnboundVariable, v.str() + " outside a link program");
    const auto& cross = link().cross;
    auto it = cross.find(owner.second);
    return it == cross.end() ? 0.0 : it->second;
  }
  if (b == "sesrate" || b == "sesrate0") {
    if (i < 0 || i >= static_cast<int>(net_.sessions.size())) {
      throw Error(ErrorKind::kUnknownEntity, "no session " + std::to_string(i) + " for " + v.str());
    }
    return net_.sessions[i].rate;
  }
  throw Error(ErrorKind::kUnboundVariable, "simulator has no value for '" + v.str() + "'");
}

Env Simulator::ParamsFor(const CompiledProgram& cp, const Owner& owner,
                         const std::map<int, double>& lambda) const {
  Env env;
  for (const VarId& v : cp.parameters()) env.set(v, Lookup(v, owner, lambda));
  // Controls start from the current operating point.
  for (const VarId& c : cp.program().controls) env.set(c, Lookup(c, owner, lambda));
  return env;
}

double Simulator::DeriveDualStep() {
  double c_ref = reference_capacity_;
  const Installed* pick = nullptr;
  for (const auto& [owner, inst] : programs_) {
    if (inst.program.layer == Layer::kTransport) {
      pick = &inst;
      break;
    }
  }
  if (!pick && !programs_.empty()) pick = &programs_.begin()->second;
  double lambda_ref = 1.0;
  if (pick) {
    const ControlProgram& p = pick->program;
    Owner owner;
    for (const auto& [o, inst] : programs_) {
      if (&inst == pick) owner = o;
    }
    Expr full = ExpandAgainst(p.objective_full, runtime_, p.entity_set, owner.second);
    const VarId control(p.controls.at(0), owner.second);
    Env env;
    for (const VarId& v : FreeVars(full)) {
      if (v.base == "lbd") continue;
      env.set(v, Lookup(v, owner, {}));
    }
    const Box& box = control.base == "sesrate" ? rate_box_[owner.second] : power_box_[owner.second];
    env.set(control, control.base == "sesrate" ? std::min(c_ref, box.upper) : 0.5 * (box.lower + box.upper));
    Expr slope = Differentiate(full, control);
    auto at = [&](double l) {
      Env e = env;
      for (const VarId& v : FreeVars(full)) {
        if (v.base == "lbd") e.set(v, l);
      }
      return Eval(slope, e);
    };
    double g0 = at(0.0), g1 = at(1.0);
    if (std::abs(g1 - g0) > 1e-12 && std::abs(g0) > 1e-12) lambda_ref = std::abs(g0) / std::abs(g1 - g0);
  }
  return opts_.dual_step_rel * lambda_ref / c_ref;
}

void Simulator::CheckInvariants() {
  auto fail = [&](const std::string& msg) {
    throw Error(ErrorKind::kValidationError,
                "invariant violated at epoch " + std::to_string(net_.epoch) + ": " + msg);
  };
  for (const Link& l : net_.links) {
    ++counters_.lambda_checks;
    if (!(l.lambda >= 0.0) || !std::isfinite(l.lambda)) fail("lbd_" + std::to_string(l.id) + " < 0");
    ++counters_.power_checks;
    const Box& b = power_box_[l.id];
    if (l.active && (l.power < b.lower - 1e-9 || l.power > b.upper + 1e-9)) {
      fail("power of link " + std::to_string(l.id) + " outside its box");
    }
  }
  for (const Session& s : net_.sessions) {
    if (!s.active) continue;
    ++counters_.throughput_checks;
    double share = std::numeric_limits<double>::infinity();
    for (int id : s.path) {
      const Link& l = net_.links[id];
      double load = 0.0;
      for (int o : runtime_.Local("lnkses").members.at(id)) {
        if (net_.sessions[o].active) load += net_.sessions[o].rate;
      }
      share = std::min(share, load > 0 ? l.capacity * s.rate / load : l.capacity);
    }
    if (s.throughput > share + 1e-9 * std::max(1.0, share)) {
      fail("throughput of session " + std::to_string(s.id) + " exceeds its bottleneck share");
    }
  }
}

void Simulator::Step() {
  ActivatePending();
  if (dual_step_ == 0.0) dual_step_ = opts_.dual_step > 0 ? opts_.dual_step : DeriveDualStep();
  ++net_.epoch;
  const double dt = net_.cfg.physical_epoch_s;
  net_.clock = net_.epoch * dt;

  Measure();

  // Prices move on the measured slack; programs read last epoch's prices of
  // their peers.
  std::map<int, double> previous;
  for (const Link& l : net_.links) previous[l.id] = l.lambda;
  for (Link& l : net_.links) {
    if (!l.active) {
      l.lambda = 0.0;
      continue;
    }
    double load = 0.0;
    for (int s : runtime_.Local("lnkses").members.at(l.id)) {
      if (net_.sessions[s].active) load += net_.sessions[s].rate;
    }
    l.lambda = std::max(0.0, l.lambda - dual_step_ * (l.capacity - load));
  }

  if (RunsPhysical()) {
    std::map<int, double> decided;
    for (auto& [owner, inst] : programs_) {
      if (inst.program.layer != Layer::kPhysical || owner.first != "netlnk") continue;
      const Link& l = net_.links[owner.second];
      if (!l.active) continue;
      std::map<int, double> lam = previous;
      lam[l.id] = l.lambda;
      Decision d = inst.compiled->Solve(ParamsFor(*inst.compiled, owner, lam), opts_.physical);
      decided[l.id] = d.at(VarId("lnkpwr", l.id));
    }
    for (const auto& [id, p] : decided) {
      Link& l = net_.links[id];
      l.power = power_box_[id].Clamp(l.power + opts_.power_smoothing * (p - l.power));
    }
  }

  if (RunsTransport() && net_.epoch % net_.cfg.timescale_ratio == 0) {
    ++transport_updates_;
    for (auto& [owner, inst] : programs_) {
      if (inst.program.layer == Layer::kPhysical || owner.first != "netses") continue;
      Session& s = net_.sessions[owner.second];
      if (!s.active) continue;
      Decision d = inst.compiled->Solve(ParamsFor(*inst.compiled, owner, previous), opts_.transport);
      double target = d.at(VarId("sesrate", s.id));
      s.rate += opts_.rate_smoothing * (target - s.rate);
      s.rate = rate_box_[s.id].Clamp(s.rate);
    }
  }

  // Throughput at the new operating point: each link splits its capacity
  // in proportion to the offered rates when overloaded.
  Measure();
  bool changed = false;
  for (Session& s : net_.sessions) {
    if (!s.active) {
      s.throughput = 0.0;
      continue;
    }
    double thr = s.rate;
    for (int id : s.path) {
      const Link& l = net_.links[id];
      double load = 0.0;
      for (int o : runtime_.Local("lnkses").members.at(id)) {
        if (net_.sessions[o].active) load += net_.sessions[o].rate;
      }
      if (load > l.capacity) thr = std::min(thr, load > 0 ? l.capacity * s.rate / load : 0.0);
    }
    s.throughput = thr;
    s.delivered += thr * dt;
  }
  CheckInvariants();
  for (Session& s : net_.sessions) {
    if (s.active && s.budget > 0 && s.delivered >= s.budget) {
      s.active = false;
      changed = true;
    }
  }
  if (changed) {
    for (Link& l : net_.links) {
      bool used = false;
      for (int o : runtime_.Local("lnkses").members.at(l.id)) used = used || net_.sessions[o].active;
      if (!used && l.active) {
        l.active = false;
        l.power = 0.0;
        l.lambda = 0.0;
      }
    }
    for (Session& s : net_.sessions) {
      if (!s.active) s.rate = 0.0;
    }
    RefreshUtility();
    Measure();
  }

  for (const Link& l : net_.links) {
    Registers& r = net_.registers;
    std::string id = VarId("", l.id).str();
    r.Write(l.tx, Layer::kPhysical, "lnkpwr" + id, l.power);
    r.Write(l.tx, Layer::kPhysical, "lbd" + id, l.lambda);
    r.Write(l.rx, Layer::kPhysical, "lnkcap" + id, l.capacity);
    r.Write(l.rx, Layer::kPhysical, "itfpwr" + id, l.itfpwr);
  }
  for (const Session& s : net_.sessions) {
    std::string id = VarId("", s.id).str();
    net_.registers.Write(s.source, Layer::kTransport, "sesrate" + id, s.rate);
    net_.registers.Write(s.destination, Layer::kTransport, "throughput" + id, s.throughput);
  }
}

void Simulator::Record(Trace& trace) const {
  const double t = net_.clock;
  for (const Session& s : net_.sessions) {
    trace.records.push_back({t, "session", s.id, "throughput_pps", s.throughput});
  }
  for (const Link& l : net_.links) {
    trace.records.push_back({t, "link", l.id, "power_gain_db", l.power});
    trace.records.push_back({t, "link", l.id, "lambda", l.lambda});
  }
  trace.records.push_back({t, "network", 0, "sum_utility", SumUtility()});
}

Trace Simulator::Run(double duration_s) {
  if (!(duration_s > 0)) Bad("duration must be positive");
  Trace trace;
  const int epochs = static_cast<int>(std::llround(duration_s / net_.cfg.physical_epoch_s));
  for (int e = 0; e < epochs; ++e) {
    Step();
    Record(trace);
  }
  return trace;
}

}  // namespace wnos
