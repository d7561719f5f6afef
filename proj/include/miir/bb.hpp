#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "miir/cascade.hpp"
#include "miir/lp.hpp"
#include "miir/mip.hpp"

namespace miir {

struct BbOptions {
  double time_limit = 60.0;  // seconds; <= 0 means no limit
  double integrality_tolerance = 1e-6;
  long node_limit = 0;       // 0: none
  // Binary values of a candidate trajectory, tried as the first incumbent.
  std::optional<std::vector<double>> start;
  // For fixed-initial models without a start, try the IDR-closure trajectory.
  bool closure_start = true;
};

struct BbResult {
  SolutionStatus status = SolutionStatus::Infeasible;
  double objective = 0.0;      // incumbent objective
  std::vector<double> values;  // dense, model order; empty when no incumbent
  double bound = 0.0;          // proven upper bound on the objective
  double gap = 0.0;            // bound - incumbent objective
  long nodes = 0;
  long lp_solves = 0;
  double seconds = 0.0;
};

namespace detail {

/// Bound propagation over the model rows, with integer rounding on binaries.
class Propagator {
 public:
  explicit Propagator(const MipModel& m) : m_(m) {
    const std::size_t n = m.num_variables();
    col_start_.assign(n + 1, 0);
    for (int j : m.row_cols) ++col_start_[j + 1];
    for (std::size_t j = 0; j < n; ++j) col_start_[j + 1] += col_start_[j];
    col_rows_.resize(m.row_cols.size());
    std::vector<int> fill(col_start_.begin(), col_start_.end() - 1);
    for (std::size_t r = 0; r < m.num_rows(); ++r)
      for (int p = m.row_start[r]; p < m.row_start[r + 1]; ++p) col_rows_[fill[m.row_cols[p]]++] = static_cast<int>(r);
    queued_.assign(m.num_rows(), 0);
  }

  /// Tightens lb/ub in place. `touched` lists variables whose bounds changed
  /// since the last fixpoint; empty means "check every row". Returns false on
  /// infeasibility.
  bool run(std::vector<double>& lb, std::vector<double>& ub, const std::vector<int>& touched) {
    std::vector<int> queue;
    if (touched.empty()) {
      queue.resize(m_.num_rows());
      std::iota(queue.begin(), queue.end(), 0);
      std::fill(queued_.begin(), queued_.end(), 1);
    } else {
      for (int j : touched) enqueue_rows(j, queue);
    }
    long budget = 50L * static_cast<long>(m_.num_rows()) + 1000;
    bool ok = true;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      int r = queue[head];
      queued_[r] = 0;
      if (!ok || --budget < 0) continue;
      if (!tighten_row(r, lb, ub, queue)) ok = false;
    }
    for (std::size_t head = 0; head < queue.size(); ++head) queued_[queue[head]] = 0;
    return ok;
  }

 private:
  void enqueue_rows(int j, std::vector<int>& queue) {
    for (int p = col_start_[j]; p < col_start_[j + 1]; ++p) {
      int r = col_rows_[p];
      if (!queued_[r]) {
        queued_[r] = 1;
        queue.push_back(r);
      }
    }
  }

  bool tighten_row(int r, std::vector<double>& lb, std::vector<double>& ub, std::vector<int>& queue) {
    const int b = m_.row_start[r], e = m_.row_start[r + 1];
    double minact = 0.0, maxact = 0.0;
    for (int p = b; p < e; ++p) {
      double a = m_.row_vals[p];
      int j = m_.row_cols[p];
      minact += a > 0 ? a * lb[j] : a * ub[j];
      maxact += a > 0 ? a * ub[j] : a * lb[j];
    }
    const Rel rel = m_.row_rel[r];
    const double rhs = m_.row_rhs[r];
    const double tol = 1e-7 * std::max(1.0, std::abs(rhs));
    bool has_upper = rel != Rel::Ge, has_lower = rel != Rel::Le;
    if (has_upper && minact > rhs + tol) return false;
    if (has_lower && maxact < rhs - tol) return false;
    // no single variable can move the row past its rhs: nothing to tighten
    if ((!has_upper || maxact <= rhs) && (!has_lower || minact >= rhs)) return true;
    for (int p = b; p < e; ++p) {
      double a = m_.row_vals[p];
      int j = m_.row_cols[p];
      if (lb[j] == ub[j]) continue;
      double new_lb = lb[j], new_ub = ub[j];
      if (has_upper) {
        double slack = rhs - minact;
        if (a > 0) new_ub = std::min(new_ub, lb[j] + slack / a);
        else new_lb = std::max(new_lb, ub[j] + slack / a);
      }
      if (has_lower) {
        double slack = maxact - rhs;
        if (a > 0) new_lb = std::max(new_lb, ub[j] - slack / a);
        else new_ub = std::min(new_ub, lb[j] - slack / a);
      }
      if (!apply(j, new_lb, new_ub, lb, ub)) return false;
      if (lb[j] != lbs_before_ || ub[j] != ubs_before_) enqueue_rows(j, queue);
    }
    return true;
  }

  bool apply(int j, double new_lb, double new_ub, std::vector<double>& lb, std::vector<double>& ub) {
    lbs_before_ = lb[j];
    ubs_before_ = ub[j];
    if (m_.binary[j]) {
      new_lb = std::ceil(new_lb - 1e-6);
      new_ub = std::floor(new_ub + 1e-6);
      if (new_lb > lb[j]) lb[j] = new_lb;
      if (new_ub < ub[j]) ub[j] = new_ub;
      return lb[j] <= ub[j];
    }
    double scale = 1e-6 * std::max(1.0, ub[j] - lb[j]);
    if (new_lb > lb[j] + scale) lb[j] = new_lb;
    if (new_ub < ub[j] - scale) ub[j] = new_ub;
    if (lb[j] > ub[j]) {
      if (lb[j] > ub[j] + 1e-6 * std::max(1.0, std::abs(ub[j]))) return false;
      lb[j] = ub[j] = 0.5 * (lb[j] + ub[j]);
    }
    return true;
  }

  const MipModel& m_;
  std::vector<int> col_start_, col_rows_;
  std::vector<char> queued_;
  double lbs_before_ = 0.0, ubs_before_ = 0.0;
};

/// LP relaxation restricted to the free variables of a node, split into
/// independent components. Component results are cached by content.
class ComponentLp {
 public:
  explicit ComponentLp(const MipModel& m) : m_(m) {}

  long solves = 0;

  // Passed to every simplex call; an LP cut short leaves `timed_out` set.
  std::chrono::steady_clock::time_point deadline = std::chrono::steady_clock::time_point::max();

  struct Outcome {
    bool feasible = false;
    bool timed_out = false;
    double objective = 0.0;
    std::vector<double> x;
  };

  Outcome solve(const std::vector<double>& lb, const std::vector<double>& ub) {
    const int n = static_cast<int>(m_.num_variables());
    const int nrows = static_cast<int>(m_.num_rows());
    Outcome out;
    out.x.assign(lb.begin(), lb.end());
    parent_.resize(n);
    std::iota(parent_.begin(), parent_.end(), 0);
    auto find = [&](int v) {
      while (parent_[v] != v) v = parent_[v] = parent_[parent_[v]];
      return v;
    };
    auto is_free = [&](int j) { return lb[j] != ub[j]; };
    double total = 0.0;
    for (int j = 0; j < n; ++j)
      if (!is_free(j)) total += m_.objective[j] * lb[j];
    // rows with free variables, with fixed parts moved to the rhs
    rows_.clear();
    rhs_.resize(nrows);
    for (int r = 0; r < nrows; ++r) {
      double fixed = 0.0;
      int first = -1;
      for (int p = m_.row_start[r]; p < m_.row_start[r + 1]; ++p) {
        int j = m_.row_cols[p];
        if (!is_free(j)) {
          fixed += m_.row_vals[p] * lb[j];
        } else if (first < 0) {
          first = j;
        } else {
          int a = find(first), b = find(j);
          if (a != b) parent_[std::max(a, b)] = std::min(a, b);
        }
      }
      rhs_[r] = m_.row_rhs[r] - fixed;
      if (first >= 0) {
        rows_.push_back(r);
        continue;
      }
      double tol = 1e-6 * std::max(1.0, std::abs(m_.row_rhs[r]));
      Rel rel = m_.row_rel[r];
      if ((rel != Rel::Ge && rhs_[r] < -tol) || (rel != Rel::Le && rhs_[r] > tol)) return out;
    }
    // components numbered by first free variable; members grouped by counting sort
    comp_of_.assign(n, -1);
    int ncomp = 0;
    for (int j = 0; j < n; ++j)
      if (is_free(j)) {
        int root = find(j);
        if (comp_of_[root] < 0) comp_of_[root] = ncomp++;
        comp_of_[j] = comp_of_[root];
      }
    auto group = [&](const std::vector<int>& items, auto comp_of_item, std::vector<int>& start, std::vector<int>& sorted) {
      start.assign(ncomp + 1, 0);
      for (int it : items) ++start[comp_of_item(it) + 1];
      for (int c = 0; c < ncomp; ++c) start[c + 1] += start[c];
      sorted.resize(items.size());
      fill_.assign(start.begin(), start.end() - 1);
      for (int it : items) sorted[fill_[comp_of_item(it)]++] = it;
    };
    free_vars_.clear();
    for (int j = 0; j < n; ++j)
      if (is_free(j)) free_vars_.push_back(j);
    group(free_vars_, [&](int j) { return comp_of_[j]; }, var_start_, var_sorted_);
    group(rows_, [&](int r) {
      for (int p = m_.row_start[r];; ++p)
        if (is_free(m_.row_cols[p])) return comp_of_[m_.row_cols[p]];
    }, row_start_, row_sorted_);

    local_.resize(n);
    for (int c = 0; c < ncomp; ++c) {
      const int vb = var_start_[c], ve = var_start_[c + 1];
      const int rb = row_start_[c], re = row_start_[c + 1];
      for (int k = vb; k < ve; ++k) local_[var_sorted_[k]] = k - vb;
      key_.clear();
      for (int k = vb; k < ve; ++k) {
        int j = var_sorted_[k];
        put(lb[j]);
        put(ub[j]);
        put(m_.objective[j]);
      }
      for (int k = rb; k < re; ++k) {
        int r = row_sorted_[k];
        key_.push_back(static_cast<char>(m_.row_rel[r]));
        put(rhs_[r]);
        for (int q = m_.row_start[r]; q < m_.row_start[r + 1]; ++q) {
          int j = m_.row_cols[q];
          if (!is_free(j)) continue;
          put(static_cast<double>(local_[j]));
          put(m_.row_vals[q]);
        }
        key_.push_back('|');
      }
      auto it = cache_.find(key_);
      if (it == cache_.end()) {
        LpProblem p;
        for (int k = vb; k < ve; ++k) {
          int j = var_sorted_[k];
          p.add_variable(lb[j], ub[j], m_.objective[j]);
        }
        for (int k = rb; k < re; ++k) {
          int r = row_sorted_[k];
          LpRow row;
          row.rel = m_.row_rel[r];
          row.rhs = rhs_[r];
          for (int q = m_.row_start[r]; q < m_.row_start[r + 1]; ++q)
            if (is_free(m_.row_cols[q])) row.terms.emplace_back(local_[m_.row_cols[q]], m_.row_vals[q]);
          p.rows.push_back(std::move(row));
        }
        ++solves;
        SimplexOptions sopt;
        sopt.deadline = deadline;
        auto res = solve_lp_simplex(p, sopt);
        if (res.status == LpStatus::TimeLimit) {
          out.timed_out = true;
          return out;
        }
        if (cache_.size() > 200000) cache_.clear();
        it = cache_.emplace(key_, std::move(res)).first;
      }
      const LpResult& res = it->second;
      if (res.status != LpStatus::Optimal) {
        if (res.status == LpStatus::IterationLimit)
          throw Error(ErrorKind::Solver, "simplex iteration limit reached in branch-and-bound node");
        return out;
      }
      for (int k = vb; k < ve; ++k) out.x[var_sorted_[k]] = res.x[k - vb];
      total += res.objective;
    }
    out.feasible = true;
    out.objective = total;
    return out;
  }

 private:
  void put(double v) {
    char buf[sizeof(double)];
    std::memcpy(buf, &v, sizeof v);
    key_.append(buf, sizeof buf);
  }

  const MipModel& m_;
  std::unordered_map<std::string, LpResult> cache_;
  std::string key_;
  std::vector<int> parent_, rows_, comp_of_, free_vars_, var_start_, var_sorted_, row_start_, row_sorted_, fill_, local_;
  std::vector<double> rhs_;
};

}  // namespace detail

/// Completes fixed binary values with a continuous assignment (LP over the
/// remaining variables). Returns nullopt if none exists.
inline std::optional<std::vector<double>> complete_binaries(const MipModel& m, const std::vector<double>& binaries) {
  std::vector<double> lb = m.lower, ub = m.upper;
  for (std::size_t j = 0; j < m.num_variables(); ++j)
    if (m.binary[j]) {
      double v = std::round(binaries[j]);
      if (v < lb[j] || v > ub[j]) return std::nullopt;
      lb[j] = ub[j] = v;
    }
  detail::ComponentLp lp(m);
  auto res = lp.solve(lb, ub);
  if (!res.feasible) return std::nullopt;
  return res.x;
}

/// Binary values of the IDR-only trajectory from the model's fixed initial
/// set, in the model's timing: a line following an initially failed bus goes
/// down at t = 1.
inline std::vector<double> idr_closure_binaries(const MipModel& m) {
  if (!m.initial) throw Error(ErrorKind::Invalid, "model has no fixed initial set");
  std::vector<int> initial;
  for (const auto& id : *m.initial) {
    auto it = std::lower_bound(m.ids.begin(), m.ids.end(), id);
    if (it == m.ids.end() || *it != id) throw Error(ErrorKind::Reference, "unknown entity " + id);
    initial.push_back(static_cast<int>(it - m.ids.begin()));
  }
  auto p = propagate(m.topo, initial);
  std::vector<char> is_initial(m.ids.size(), 0);
  for (int i : initial) is_initial[i] = 1;
  std::vector<double> v(m.num_variables(), 0.0);
  for (std::size_t i = 0; i < m.ids.size(); ++i) {
    int at = p.failed_at[i];
    if (at < 0) continue;
    if (at == 0 && !is_initial[i]) at = 1;
    for (int t = at; t <= m.horizon; ++t) v[m.x(static_cast<int>(i), t)] = 1.0;
  }
  for (std::size_t k = 0; k < m.minterms.size(); ++k)
    for (int t = 1; t <= m.horizon; ++t)
      for (int j : m.minterms[k].members)
        if (v[m.x(j, t - 1)] > 0.5) v[m.c(static_cast<int>(k), t)] = 1.0;
  return v;
}

/// Depth-first branch-and-bound: bound propagation and a propagation bound at
/// every node, then the LP relaxation; branches on the most fractional binary
/// (ties by variable order), exploring the up-branch first. Free x[i][0] are
/// branched on before any LP is solved, in variable order.
inline BbResult solve_mip_bb(const MipModel& m, const BbOptions& opt = {}) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(clock::now() - start).count(); };
  const double tol = 1e-7;

  BbResult out;
  detail::Propagator prop(m);
  detail::ComponentLp lp(m);
  if (opt.time_limit > 0)
    lp.deadline = start + std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(opt.time_limit));
  std::optional<std::vector<double>> incumbent;
  double best = -std::numeric_limits<double>::infinity();
  auto offer = [&](std::vector<double> v) {
    double obj = 0.0;
    for (std::size_t j = 0; j < m.num_variables(); ++j) obj += m.objective[j] * v[j];
    if (obj > best + tol) {
      best = obj;
      incumbent = std::move(v);
    }
  };
  std::optional<std::vector<double>> seed = opt.start;
  if (!seed && opt.closure_start && m.initial) seed = idr_closure_binaries(m);
  if (seed) {
    auto full = complete_binaries(m, *seed);
    if (full && verify_solution(m, *full).passed) offer(std::move(*full));
  }

  struct Node {
    std::vector<double> lb, ub;
    std::vector<int> touched;
    double bound;
  };
  std::vector<Node> stack;
  stack.push_back({m.lower, m.upper, {}, std::numeric_limits<double>::infinity()});
  bool stopped = false;
  double open_bound = -std::numeric_limits<double>::infinity();

  while (!stack.empty()) {
    if ((opt.time_limit > 0 && elapsed() > opt.time_limit) || (opt.node_limit > 0 && out.nodes >= opt.node_limit)) {
      stopped = true;
      for (const auto& nd : stack) open_bound = std::max(open_bound, nd.bound);
      break;
    }
    Node node = std::move(stack.back());
    stack.pop_back();
    if (node.bound <= best + tol) continue;
    ++out.nodes;
    if (!prop.run(node.lb, node.ub, node.touched)) continue;
    double trivial = 0.0;
    for (std::size_t j = 0; j < m.num_variables(); ++j)
      trivial += m.objective[j] * (m.objective[j] > 0 ? node.ub[j] : node.lb[j]);
    if (trivial <= best + tol) continue;

    // Initial-failure decisions come first and without an LP: once they are
    // fixed, propagation settles most of the trajectory.
    int initial_free = -1;
    for (int i = 0; i < static_cast<int>(m.ids.size()) && initial_free < 0; ++i)
      if (node.lb[m.x(i, 0)] != node.ub[m.x(i, 0)]) initial_free = m.x(i, 0);
    if (initial_free >= 0) {
      Node down{node.lb, node.ub, {initial_free}, std::min(trivial, node.bound)};
      down.ub[initial_free] = 0.0;
      Node up{std::move(node.lb), std::move(node.ub), {initial_free}, down.bound};
      up.lb[initial_free] = 1.0;
      stack.push_back(std::move(down));
      stack.push_back(std::move(up));
      continue;
    }

    auto res = lp.solve(node.lb, node.ub);
    if (res.timed_out) {
      stopped = true;
      open_bound = std::max(open_bound, std::min(trivial, node.bound));
      for (const auto& nd : stack) open_bound = std::max(open_bound, nd.bound);
      break;
    }
    if (!res.feasible) continue;
    double bound = std::min(res.objective, node.bound);
    if (bound <= best + tol) continue;

    int pick = -1;
    double frac_best = opt.integrality_tolerance;
    for (std::size_t j = 0; j < m.num_variables(); ++j) {
      if (!m.binary[j] || node.lb[j] == node.ub[j]) continue;
      double f = std::abs(res.x[j] - std::round(res.x[j]));
      if (f > frac_best + 1e-12) {
        frac_best = f;
        pick = static_cast<int>(j);
      }
    }
    if (pick < 0) {
      // integral: settle the continuous part against the rounded binaries
      auto full = complete_binaries(m, res.x);
      if (full) offer(std::move(*full));
      continue;
    }
    Node down{node.lb, node.ub, {pick}, bound};
    down.ub[pick] = 0.0;
    Node up{std::move(node.lb), std::move(node.ub), {pick}, bound};
    up.lb[pick] = 1.0;
    stack.push_back(std::move(down));
    stack.push_back(std::move(up));
  }

  out.lp_solves = lp.solves;
  out.seconds = elapsed();
  if (incumbent) {
    out.status = stopped ? SolutionStatus::TimeLimit : SolutionStatus::Optimal;
    out.values = std::move(*incumbent);
    out.objective = best;
    out.bound = stopped ? std::max(best, open_bound) : best;
    out.gap = out.bound - best;
  } else {
    out.status = stopped ? SolutionStatus::TimeLimit : SolutionStatus::Infeasible;
    out.bound = stopped ? open_bound : -std::numeric_limits<double>::infinity();
    out.gap = std::numeric_limits<double>::infinity();
  }
  return out;
}

}  // namespace miir
