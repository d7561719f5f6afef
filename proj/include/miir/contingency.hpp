#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "miir/bb.hpp"
#include "miir/cascade.hpp"
#include "miir/error.hpp"
#include "miir/mip.hpp"
#include "miir/network.hpp"
#include "miir/reduction.hpp"

namespace miir {

enum class EvalMode { IdrOnly, Wccp };

inline std::string to_string(EvalMode m) { return m == EvalMode::IdrOnly ? "idr" : "wccp"; }

struct RoundLog {
  std::string entity;
  int kill_set_size = 0;
  double fmhv = 0.0;
};

struct ContingencyReport {
  std::vector<std::string> chosen;
  int idr_dead_count = 0;
  std::optional<int> wccp_dead_count;
  std::vector<RoundLog> per_round_log;
  long sets_evaluated = 0;  // exhaustive search only
  long sets_skipped = 0;    // Wccp sets without a valid flow
};

struct WccpEvaluation {
  SolutionStatus status = SolutionStatus::Infeasible;
  int dead = 0;
  double bound = 0.0;
  CascadeResult timeline;
  BbResult bb;
};

/// Fixed-initial WCCP model solved by the built-in branch and bound.
inline WccpEvaluation evaluate_wccp(const PowerNetwork& net, const std::set<std::string>& initial,
                                    const BbOptions& opt = {}, const MipOptions& mopt = {}) {
  auto m = build_fixed_initial_mip(net, initial, mopt);
  WccpEvaluation out;
  out.bb = solve_mip_bb(m, opt);
  out.status = out.bb.status;
  out.bound = out.bb.bound;
  if (!out.bb.values.empty()) {
    out.dead = dead_count(m, out.bb.values);
    out.timeline = extract_timeline(m, out.bb.values);
  }
  return out;
}

/// Dead count after failing `initial`. Wccp needs a proven optimum; anything
/// else raises a Solver error.
inline int evaluate_initial_set(const PowerNetwork& net, const std::set<std::string>& initial, EvalMode mode,
                                const BbOptions& opt = {}) {
  for (const auto& id : initial) net.require_index(id);
  if (mode == EvalMode::IdrOnly) return static_cast<int>(propagate_idr_cascade(net, initial).final_failed.size());
  auto ev = evaluate_wccp(net, initial, opt);
  if (ev.status != SolutionStatus::Optimal)
    throw Error(ErrorKind::Solver, std::string("no optimal WCCP solution (") + to_string(ev.status) + ")");
  return ev.dead;
}

namespace detail {

struct Candidate {
  int entity = -1;
  int size = 0;
  double fmhv = 0.0;
};

inline Candidate score(const Topology& topo, int e, const std::vector<char>& excluded) {
  auto ks = kill_set_indices(topo, e, &excluded);
  std::vector<char> mask(topo.size(), 0);
  for (int j : ks) mask[j] = 1;
  return {e, static_cast<int>(ks.size()), fmhv_of(topo, mask, &excluded)};
}

// Larger kill set, then higher FMHV, then lower index (ids are sorted).
inline bool better(const Candidate& a, const Candidate& b) {
  if (b.entity < 0) return true;
  if (a.size != b.size) return a.size > b.size;
  if (a.fmhv != b.fmhv) return a.fmhv > b.fmhv;
  return a.entity < b.entity;
}

// Buses whose every minterm holds an excluded entity are excluded too.
inline void close_exclusions(const Topology& topo, std::vector<char>& excluded) {
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t b = 0; b < topo.size(); ++b) {
      if (excluded[b] || !topo.has_idr(static_cast<int>(b))) continue;
      bool all_dead = std::all_of(topo.minterms[b].begin(), topo.minterms[b].end(), [&](const auto& m) {
        return std::any_of(m.begin(), m.end(), [&](int j) { return excluded[j] != 0; });
      });
      if (all_dead) excluded[b] = changed = 1;
    }
  }
}

}  // namespace detail

/// Greedy K-round selection by kill-set size. After each round the winner's
/// kill set leaves the network: it no longer counts as a candidate, minterms
/// naming it are gone, and a bus left with no minterm is gone as well.
inline ContingencyReport heuristic_k_list(const PowerNetwork& net, int k, int threads = 1) {
  const auto& topo = net.topology();
  const int n = static_cast<int>(topo.size());
  if (k < 0 || k > n) throw Error(ErrorKind::Range, "K must lie in [0, |E|]");
  threads = std::max(1, threads);
  ContingencyReport rep;
  std::vector<char> excluded(n, 0);
  for (int round = 0; round < k; ++round) {
    std::vector<int> live;
    for (int e = 0; e < n; ++e)
      if (!excluded[e]) live.push_back(e);
    if (live.empty()) break;
    std::vector<detail::Candidate> scores(live.size());
    auto sweep = [&](std::size_t from, std::size_t step) {
      for (std::size_t i = from; i < live.size(); i += step) scores[i] = detail::score(topo, live[i], excluded);
    };
    if (threads == 1 || live.size() < 2) {
      sweep(0, 1);
    } else {
      std::vector<std::thread> pool;
      const std::size_t t = std::min<std::size_t>(threads, live.size());
      for (std::size_t w = 0; w < t; ++w) pool.emplace_back(sweep, w, t);
      for (auto& th : pool) th.join();
    }
    detail::Candidate best;
    for (const auto& c : scores)
      if (detail::better(c, best)) best = c;
    rep.chosen.push_back(topo.ids[best.entity]);
    rep.per_round_log.push_back({topo.ids[best.entity], best.size, best.fmhv});
    for (int j : kill_set_indices(topo, best.entity, &excluded)) excluded[j] = 1;
    detail::close_exclusions(topo, excluded);
  }
  rep.idr_dead_count = static_cast<int>(propagate_idr_cascade(net, rep.chosen).final_failed.size());
  return rep;
}

/// Every K-subset in lexicographic order of sorted ids; the first maximum
/// wins. In Wccp mode sets whose model has no valid flow are skipped and
/// counted.
inline ContingencyReport exhaustive_k_list(const PowerNetwork& net, int k, EvalMode mode, double budget = 1e6,
                                           const BbOptions& opt = {}) {
  const auto& topo = net.topology();
  const int n = static_cast<int>(topo.size());
  if (k < 0 || k > n) throw Error(ErrorKind::Range, "K must lie in [0, |E|]");
  if (binomial(n, k) > budget) throw Error(ErrorKind::Budget, "enumeration budget exceeded");
  ContingencyReport rep;
  int best = -1;
  std::vector<int> pick(k);
  for (int i = 0; i < k; ++i) pick[i] = i;
  while (true) {
    std::set<std::string> initial;
    for (int e : pick) initial.insert(topo.ids[e]);
    ++rep.sets_evaluated;
    int dead = -1;
    if (mode == EvalMode::IdrOnly) {
      dead = static_cast<int>(propagate(topo, pick).order.size());
    } else {
      auto ev = evaluate_wccp(net, initial, opt);
      if (ev.status == SolutionStatus::Optimal) dead = ev.dead;
      else if (ev.status == SolutionStatus::Infeasible) ++rep.sets_skipped;
      else throw Error(ErrorKind::Solver, "WCCP evaluation hit its limit on a candidate set");
    }
    if (dead > best) {
      best = dead;
      rep.chosen.assign(initial.begin(), initial.end());
    }
    int i = k - 1;
    while (i >= 0 && pick[i] == n - k + i) --i;
    if (i < 0) break;
    ++pick[i];
    for (int j = i + 1; j < k; ++j) pick[j] = pick[j - 1] + 1;
  }
  if (best < 0) throw Error(ErrorKind::Solver, "no candidate set admits a valid flow");
  rep.idr_dead_count = static_cast<int>(propagate_idr_cascade(net, rep.chosen).final_failed.size());
  if (mode == EvalMode::Wccp) rep.wccp_dead_count = best;
  return rep;
}

}  // namespace miir
