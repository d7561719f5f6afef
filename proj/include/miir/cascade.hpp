#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "miir/error.hpp"
#include "miir/network.hpp"

namespace miir {

struct CascadeResult {
  std::map<std::string, int> failed_at;
  std::set<std::string> final_failed;
  int steps = 0;

  /// (timestep, id) rows ordered by time, then id.
  std::vector<std::pair<int, std::string>> timeline() const {
    std::vector<std::pair<int, std::string>> rows;
    for (const auto& [id, t] : failed_at) rows.emplace_back(t, id);
    std::sort(rows.begin(), rows.end());
    return rows;
  }
};

/// Index-level propagation result. failed_at[i] == -1 for survivors.
struct Propagation {
  std::vector<int> failed_at;
  std::vector<int> order;  // entities in failure order
  int steps = 0;
};

/// IDR-only cascade with unit delay: a bus with an IDR fails at t when each of
/// its minterms holds an entity failed before t; a line fails in the step its
/// source bus fails. Entities flagged in `excluded` are treated as already
/// gone: they count as failed inside minterms but are never reported.
inline Propagation propagate(const Topology& topo, const std::vector<int>& initial,
                             const std::vector<char>* excluded = nullptr) {
  const std::size_t n = topo.size();
  Propagation out;
  out.failed_at.assign(n, -1);
  auto gone = [&](int e) { return excluded && (*excluded)[e]; };

  std::vector<int> frontier;
  auto fail = [&](int e, int t) {
    out.failed_at[e] = t;
    out.order.push_back(e);
    frontier.push_back(e);
  };
  auto fail_out_lines = [&](int bus, int t) {
    for (int l : topo.out_lines[bus])
      if (out.failed_at[l] < 0 && !gone(l)) fail(l, t);
  };

  for (int e : initial)
    if (out.failed_at[e] < 0 && !gone(e)) fail(e, 0);
  for (std::size_t k = 0, m = frontier.size(); k < m; ++k)
    if (is_bus(topo.kinds[frontier[k]])) fail_out_lines(frontier[k], 0);

  std::vector<int> candidates, fresh;
  for (int t = 1; !frontier.empty(); ++t) {
    candidates.clear();
    for (int e : frontier)
      for (int d : topo.dependents[e]) candidates.push_back(d);
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    frontier.clear();

    auto down = [&](int j) { return gone(j) || (out.failed_at[j] >= 0 && out.failed_at[j] < t); };
    fresh.clear();
    for (int c : candidates) {
      if (out.failed_at[c] >= 0 || gone(c) || !topo.has_idr(c)) continue;
      bool dead = true;
      for (const auto& m : topo.minterms[c]) {
        if (std::none_of(m.begin(), m.end(), down)) {
          dead = false;
          break;
        }
      }
      if (dead) fresh.push_back(c);
    }
    for (int c : fresh) fail(c, t);
    for (int c : fresh) fail_out_lines(c, t);
    if (!frontier.empty()) out.steps = t;
  }
  return out;
}

inline std::vector<int> resolve_ids(const PowerNetwork& net, const std::vector<std::string>& ids) {
  std::vector<int> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(net.require_index(id));
  return out;
}

inline CascadeResult to_result(const Topology& topo, const Propagation& p) {
  CascadeResult r;
  r.steps = p.steps;
  for (int e : p.order) {
    r.failed_at.emplace(topo.ids[e], p.failed_at[e]);
    r.final_failed.insert(topo.ids[e]);
  }
  return r;
}

inline CascadeResult propagate_idr_cascade(const PowerNetwork& net, const std::vector<std::string>& initial) {
  return to_result(net.topology(), propagate(net.topology(), resolve_ids(net, initial)));
}

inline CascadeResult propagate_idr_cascade(const PowerNetwork& net, const std::set<std::string>& initial) {
  return propagate_idr_cascade(net, std::vector<std::string>(initial.begin(), initial.end()));
}

/// Entities of the IDR closure of {e}, in failure order.
inline std::vector<int> kill_set_indices(const Topology& topo, int e, const std::vector<char>* excluded = nullptr) {
  return propagate(topo, {e}, excluded).order;
}

/// Fractional minterm hit value of a kill set: sum of |m & KS| / |m| over the
/// minterms of every IDR whose target survives. Minterms holding an excluded
/// entity no longer exist and are skipped.
inline double fmhv_of(const Topology& topo, const std::vector<char>& in_kill_set,
                      const std::vector<char>* excluded = nullptr) {
  double total = 0.0;
  for (std::size_t b = 0; b < topo.size(); ++b) {
    if (in_kill_set[b] || (excluded && (*excluded)[b])) continue;
    for (const auto& m : topo.minterms[b]) {
      std::size_t hits = 0;
      bool removed = false;
      for (int j : m) {
        hits += in_kill_set[j] ? 1 : 0;
        removed = removed || (excluded && (*excluded)[j]);
      }
      if (removed) continue;
      total += static_cast<double>(hits) / static_cast<double>(m.size());
    }
  }
  return total;
}

inline std::set<std::string> kill_set(const PowerNetwork& net, std::string_view id) {
  const auto& topo = net.topology();
  std::set<std::string> out;
  for (int e : kill_set_indices(topo, net.require_index(id))) out.insert(topo.ids[e]);
  return out;
}

inline double fmhv(const PowerNetwork& net, std::string_view id) {
  const auto& topo = net.topology();
  std::vector<char> mask(topo.size(), 0);
  for (int e : kill_set_indices(topo, net.require_index(id))) mask[e] = 1;
  return fmhv_of(topo, mask);
}

}  // namespace miir
