#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "miir/case_io.hpp"
#include "miir/error.hpp"
#include "miir/network.hpp"

namespace miir {

inline std::string bus_entity_id(int bus) { return "B" + std::to_string(bus); }
inline std::string line_entity_id(int branch_index) { return "T" + std::to_string(branch_index); }

/// Oriented real-power flow on one branch (1-based index into mpc.branch).
struct DirectedFlow {
  int branch = 0;
  int source = 0;
  int sink = 0;
  double mw = 0.0;  // magnitude, >= 0
};

struct BuildOptions {
  double balance_tolerance = PowerNetwork::kBalanceTolerance;
};

namespace detail {

inline std::map<int, double> generation_by_bus(const RawCase& rc, const Snapshot& snap) {
  std::map<int, double> out;
  for (const auto& g : rc.generators) out[g.bus] += g.p_gen;
  for (const auto& [bus, mw] : snap.gen_outputs) out[bus] = mw;
  return out;
}

inline std::map<int, double> capacity_by_bus(const RawCase& rc) {
  std::map<int, double> out;
  for (const auto& g : rc.generators) out[g.bus] += g.p_max;
  return out;
}

}  // namespace detail

/// Replaces every generator bus carrying demand d > 0 by a zero-demand
/// generator bus, a new load bus (id = max bus id + running count) and a new
/// branch carrying d. The new branch gets rate_a = d + 1 and an explicit flow
/// entry in the returned snapshot.
inline std::pair<RawCase, Snapshot> split_generator_buses(const RawCase& rc, const Snapshot& snap) {
  RawCase out = rc;
  Snapshot s = snap;
  std::set<int> gen_buses;
  for (const auto& g : rc.generators) gen_buses.insert(g.bus);
  int next_id = 0;
  for (const auto& b : rc.buses) next_id = std::max(next_id, b.id);
  const std::size_t original = out.buses.size();
  for (std::size_t i = 0; i < original; ++i) {
    auto& bus = out.buses[i];
    if (!gen_buses.count(bus.id) || !(bus.p_demand > 0.0)) continue;
    double d = bus.p_demand;
    bus.p_demand = 0.0;
    CaseBus load;
    load.id = ++next_id;
    load.type = BusType::PQ;
    load.p_demand = d;
    CaseBranch link;
    link.from = bus.id;
    link.to = load.id;
    link.x = 1e-4;
    link.rate_a = d + 1.0;
    out.buses.push_back(load);
    out.branches.push_back(link);
    if (!s.line_flows) s.line_flows.emplace();
    (*s.line_flows)[static_cast<int>(out.branches.size())] = d;
    if (s.voltages && s.voltages->count(bus.id)) (*s.voltages)[load.id] = s.voltages->at(bus.id);
  }
  return {std::move(out), std::move(s)};
}

/// Real power from bus 1 to bus 2 of a series impedance, in p.u.
inline double branch_power_pu(std::complex<double> v1, std::complex<double> v2, std::complex<double> z) {
  if (z == std::complex<double>(0.0, 0.0)) throw Error(ErrorKind::Singular, "zero branch impedance");
  return std::real(v1 * std::conj((v1 - v2) / z));
}

/// One oriented flow per branch. Explicit snapshot flows take precedence over
/// the voltage formula branch by branch.
inline std::vector<DirectedFlow> compute_line_flows(const RawCase& rc, const Snapshot& snap) {
  std::vector<DirectedFlow> out;
  out.reserve(rc.branches.size());
  for (std::size_t k = 0; k < rc.branches.size(); ++k) {
    const auto& br = rc.branches[k];
    int index = static_cast<int>(k) + 1;
    double signed_mw = 0.0;
    if (snap.line_flows && snap.line_flows->count(index)) {
      signed_mw = snap.line_flows->at(index);
    } else {
      if (!snap.voltages || !snap.voltages->count(br.from) || !snap.voltages->count(br.to))
        throw Error(ErrorKind::Invalid, "no flow or voltage data for branch " + std::to_string(index));
      double pu = branch_power_pu(snap.voltages->at(br.from), snap.voltages->at(br.to), {br.r, br.x});
      signed_mw = pu * rc.base_mva;
    }
    if (signed_mw >= 0.0)
      out.push_back({index, br.from, br.to, signed_mw});
    else
      out.push_back({index, br.to, br.from, -signed_mw});
  }
  return out;
}

/// Lossless linearized flow: B' theta = P with the first REF bus at angle 0.
/// The reference bus absorbs the generation/demand mismatch.
inline Snapshot solve_dc_flow(const RawCase& rc) {
  const std::size_t n = rc.buses.size();
  std::map<int, std::size_t> pos;
  for (std::size_t i = 0; i < n; ++i) pos[rc.buses[i].id] = i;
  std::size_t ref = n;
  for (std::size_t i = 0; i < n && ref == n; ++i)
    if (rc.buses[i].type == BusType::REF) ref = i;
  if (ref == n) throw Error(ErrorKind::Invalid, "case has no reference bus");

  std::vector<std::vector<std::size_t>> adj(n);
  for (const auto& br : rc.branches) {
    adj[pos[br.from]].push_back(pos[br.to]);
    adj[pos[br.to]].push_back(pos[br.from]);
  }
  std::vector<char> seen(n, 0);
  std::queue<std::size_t> bfs;
  bfs.push(ref);
  seen[ref] = 1;
  while (!bfs.empty()) {
    auto u = bfs.front();
    bfs.pop();
    for (auto v : adj[u])
      if (!seen[v]) seen[v] = 1, bfs.push(v);
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!seen[i])
      throw Error(ErrorKind::Singular,
                  "network is disconnected (bus " + std::to_string(rc.buses[i].id) + " unreachable)");

  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (const auto& br : rc.branches) {
    auto a = static_cast<Eigen::Index>(pos[br.from]), b = static_cast<Eigen::Index>(pos[br.to]);
    if (a == b) continue;
    double y = 1.0 / br.x;
    B(a, a) += y;
    B(b, b) += y;
    B(a, b) -= y;
    B(b, a) -= y;
  }
  std::map<int, double> gen;
  for (const auto& g : rc.generators) gen[g.bus] += g.p_gen;
  Eigen::VectorXd P(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& bus = rc.buses[i];
    double g = gen.count(bus.id) ? gen[bus.id] : 0.0;
    P(static_cast<Eigen::Index>(i)) = (g - bus.p_demand) / rc.base_mva;
  }

  std::vector<Eigen::Index> keep;
  for (std::size_t i = 0; i < n; ++i)
    if (i != ref) keep.push_back(static_cast<Eigen::Index>(i));
  const auto m = static_cast<Eigen::Index>(keep.size());
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  if (m > 0) {
    Eigen::MatrixXd Br(m, m);
    Eigen::VectorXd Pr(m);
    for (Eigen::Index r = 0; r < m; ++r) {
      Pr(r) = P(keep[r]);
      for (Eigen::Index c = 0; c < m; ++c) Br(r, c) = B(keep[r], keep[c]);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(Br);
    if (!lu.isInvertible()) throw Error(ErrorKind::Singular, "susceptance matrix is singular");
    Eigen::VectorXd sol = lu.solve(Pr);
    for (Eigen::Index r = 0; r < m; ++r) theta(keep[r]) = sol(r);
  }

  Snapshot snap;
  snap.time_label = "dc";
  snap.line_flows.emplace();
  std::vector<double> net_out(n, 0.0);
  for (std::size_t k = 0; k < rc.branches.size(); ++k) {
    const auto& br = rc.branches[k];
    auto a = pos[br.from], b = pos[br.to];
    double f = (theta(static_cast<Eigen::Index>(a)) - theta(static_cast<Eigen::Index>(b))) / br.x * rc.base_mva;
    (*snap.line_flows)[static_cast<int>(k) + 1] = f;
    net_out[a] += f;
    net_out[b] -= f;
  }
  for (const auto& [bus, g] : gen) snap.gen_outputs[bus] = g;
  // The reference bus takes whatever injection the flows require.
  const auto& ref_bus = rc.buses[ref];
  snap.gen_outputs[ref_bus.id] = net_out[ref] + ref_bus.p_demand;
  return snap;
}

/// IDRs from oriented lines: each bus with incoming lines depends on
/// {line, source} for every line delivering power into it.
inline std::vector<Idr> generate_idrs(const std::map<std::string, LineEnds>& lines) {
  std::map<std::string, std::vector<Minterm>> by_sink;
  for (const auto& [line, ends] : lines) by_sink[ends.sink].push_back({line, ends.source});
  std::vector<Idr> out;
  for (auto& [sink, minterms] : by_sink) out.push_back({sink, std::move(minterms)});
  return out;
}

inline std::map<std::string, LineEnds> oriented_lines(const std::vector<DirectedFlow>& flows) {
  std::map<std::string, LineEnds> out;
  for (const auto& f : flows)
    out[line_entity_id(f.branch)] = {bus_entity_id(f.source), bus_entity_id(f.sink)};
  return out;
}

inline std::vector<Idr> generate_idrs(const RawCase&, const std::vector<DirectedFlow>& flows) {
  return generate_idrs(oriented_lines(flows));
}

/// Case + solved snapshot to the MIIR abstraction. Bus entities are named
/// B<bus id>, lines T<branch index>.
inline PowerNetwork build_network(const RawCase& input, const Snapshot& input_snap,
                                  const BuildOptions& opts = {}) {
  auto [rc, snap] = split_generator_buses(input, input_snap);
  auto flows = compute_line_flows(rc, snap);
  auto generation = detail::generation_by_bus(rc, snap);
  auto capacity = detail::capacity_by_bus(rc);
  double total_capacity = 0.0;
  for (const auto& [bus, cap] : capacity) total_capacity += cap;

  std::vector<Entity> entities;
  for (const auto& bus : rc.buses) {
    Entity e;
    e.id = bus_entity_id(bus.id);
    if (capacity.count(bus.id)) {
      e.kind = EntityKind::Generator;
      e.upper_bound = capacity[bus.id];
      e.value = generation[bus.id];
      if (e.value < 0.0)
        throw Error(ErrorKind::Invalid, "negative generation at bus " + std::to_string(bus.id));
      if (e.value > e.upper_bound + opts.balance_tolerance)
        throw Error(ErrorKind::Invalid, "generation at bus " + std::to_string(bus.id) + " exceeds Pmax");
      e.value = std::min(e.value, e.upper_bound);
    } else if (bus.p_demand > 0.0) {
      e.kind = EntityKind::Load;
      e.lower_bound = e.upper_bound = e.value = bus.p_demand;
    } else if (bus.p_demand < 0.0) {
      throw Error(ErrorKind::Invalid, "negative demand at non-generator bus " + std::to_string(bus.id));
    } else {
      e.kind = EntityKind::Neutral;
    }
    entities.push_back(std::move(e));
  }
  for (const auto& f : flows) {
    const auto& br = rc.branches[static_cast<std::size_t>(f.branch - 1)];
    Entity e;
    e.id = line_entity_id(f.branch);
    e.kind = EntityKind::Line;
    e.value = f.mw;
    e.upper_bound = br.rate_a > 0.0 ? br.rate_a : std::max(total_capacity, f.mw);
    if (e.value > e.upper_bound)
      throw Error(ErrorKind::Invalid, "line " + e.id + " carries " + std::to_string(e.value) +
                                          " MW above its rating " + std::to_string(e.upper_bound));
    entities.push_back(std::move(e));
  }
  auto lines = oriented_lines(flows);
  auto idrs = generate_idrs(lines);
  return PowerNetwork(std::move(entities), std::move(idrs), std::move(lines), opts.balance_tolerance);
}

}  // namespace miir
