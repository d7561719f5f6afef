#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "miir/error.hpp"

namespace miir {

enum class Rel { Le, Eq, Ge };

inline const char* to_string(Rel r) {
  switch (r) {
    case Rel::Le: return "<=";
    case Rel::Eq: return "=";
    case Rel::Ge: return ">=";
  }
  return "?";
}

struct LpRow {
  std::vector<std::pair<int, double>> terms;
  Rel rel = Rel::Le;
  double rhs = 0.0;
};

/// max c'x subject to rows and lower <= x <= upper (all bounds finite).
struct LpProblem {
  std::vector<double> lower, upper, objective;
  std::vector<LpRow> rows;

  int add_variable(double lb, double ub, double c = 0.0) {
    lower.push_back(lb);
    upper.push_back(ub);
    objective.push_back(c);
    return static_cast<int>(lower.size()) - 1;
  }
  void add_row(std::vector<std::pair<int, double>> terms, Rel rel, double rhs) {
    rows.push_back({std::move(terms), rel, rhs});
  }
  std::size_t num_variables() const { return lower.size(); }
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit, TimeLimit };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
    case LpStatus::IterationLimit: return "iteration-limit";
    case LpStatus::TimeLimit: return "time-limit";
  }
  return "?";
}

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  std::vector<double> x;
  double objective = 0.0;
  long iterations = 0;
};

struct SimplexOptions {
  double pivot_tolerance = 1e-9;
  double feasibility_tolerance = 1e-9;
  double optimality_tolerance = 1e-9;
  // Consecutive degenerate pivots before switching to Bland's rule.
  int degenerate_switch = 50;
  long iteration_limit = 0;  // 0: automatic
  std::chrono::steady_clock::time_point deadline = std::chrono::steady_clock::time_point::max();
};

namespace detail {

/// Dictionary-form bounded simplex. Each row i reads
///   x[basic[i]] + sum_k T(i, k) * x[nonbasic[k]] = const,
/// and row m holds the negated reduced costs of the current objective.
/// The dense tableau is rebuilt from a sparse LU of the basis every
/// `kRefactorEvery` pivots and before optimality is declared.
class BoundedSimplex {
 public:
  static constexpr double kInf = std::numeric_limits<double>::infinity();
  static constexpr int kRefactorEvery = 100;
  // A tableau this few pivots away from a fresh one is trusted as is.
  static constexpr int kTrustedPivots = 50;
  // Bases up to this size are factored densely.
  static constexpr int kDenseFactorRows = 120;

  BoundedSimplex(const LpProblem& p, const SimplexOptions& opt) : opt_(opt) { setup(p); }

  LpResult run() {
    LpResult res;
    if (infeasible_bounds_) {
      res.status = LpStatus::Infeasible;
      return res;
    }
    long limit = opt_.iteration_limit > 0 ? opt_.iteration_limit
                                          : 200L * static_cast<long>(m_ + cols_) + 10000L;
    if (num_artificial_ > 0) {
      std::vector<double> phase1(total_, 0.0);
      for (int a = first_artificial_; a < total_; ++a) phase1[a] = -1.0;
      obj_ = phase1;
      load_objective();
      auto st = iterate(limit);
      res.iterations = iterations_;
      if (st == LpStatus::IterationLimit || st == LpStatus::TimeLimit) {
        res.status = st;
        return res;
      }
      double infeas = 0.0;
      for (int a = first_artificial_; a < total_; ++a) infeas += std::max(0.0, value_[a]);
      if (infeas > std::max(1e-7, 1e-9 * rhs_scale_)) {
        res.status = LpStatus::Infeasible;
        return res;
      }
      for (int a = first_artificial_; a < total_; ++a) {
        lower_[a] = upper_[a] = 0.0;
        if (pos_[a] >= 0) value_[a] = 0.0;
      }
    }
    obj_ = cost_;
    load_objective();
    auto st = iterate(limit);
    res.iterations = iterations_;
    res.status = st;
    if (st != LpStatus::Optimal) return res;
    res.x.assign(n_, 0.0);
    double z = 0.0;
    for (int j = 0; j < n_; ++j) {
      res.x[j] = std::clamp(value_[j], lower_[j], upper_[j]);
      z += cost_[j] * res.x[j];
    }
    res.objective = z;
    return res;
  }

 private:
  double& T(int i, int k) { return tab_[static_cast<std::size_t>(i) * cols_ + k]; }

  void setup(const LpProblem& p) {
    n_ = static_cast<int>(p.num_variables());
    m_ = static_cast<int>(p.rows.size());
    for (int j = 0; j < n_; ++j) {
      if (!std::isfinite(p.lower[j]) || !std::isfinite(p.upper[j]))
        throw Error(ErrorKind::Range, "simplex requires finite variable bounds");
      if (p.lower[j] > p.upper[j] + opt_.feasibility_tolerance) infeasible_bounds_ = true;
    }
    // variables: structural [0, n), slacks [n, n + m), artificials after
    lower_.assign(n_ + m_, 0.0);
    upper_.assign(n_ + m_, 0.0);
    value_.assign(n_ + m_, 0.0);
    cost_.assign(n_ + m_, 0.0);
    for (int j = 0; j < n_; ++j) {
      lower_[j] = p.lower[j];
      upper_[j] = std::max(p.lower[j], p.upper[j]);
      value_[j] = lower_[j];
      cost_[j] = p.objective[j];
    }
    rhs_.assign(m_, 0.0);
    std::vector<double> residual(m_);
    for (int i = 0; i < m_; ++i) {
      const auto& row = p.rows[i];
      double act = 0.0;
      for (auto [j, a] : row.terms) act += a * value_[j];
      rhs_[i] = row.rhs;
      residual[i] = row.rhs - act;
      rhs_scale_ = std::max(rhs_scale_, std::abs(row.rhs));
      int s = n_ + i;
      switch (row.rel) {
        case Rel::Le: lower_[s] = 0.0, upper_[s] = kInf; break;
        case Rel::Ge: lower_[s] = -kInf, upper_[s] = 0.0; break;
        case Rel::Eq: lower_[s] = 0.0, upper_[s] = 0.0; break;
      }
    }
    // decide which rows need an artificial
    std::vector<int> sign(m_, 0);
    for (int i = 0; i < m_; ++i) {
      int s = n_ + i;
      double r = residual[i];
      bool fits = r >= lower_[s] - opt_.feasibility_tolerance && r <= upper_[s] + opt_.feasibility_tolerance;
      if (!fits) sign[i] = r > 0 ? 1 : -1;
    }
    first_artificial_ = n_ + m_;
    num_artificial_ = static_cast<int>(std::count_if(sign.begin(), sign.end(), [](int s) { return s != 0; }));
    total_ = n_ + m_ + num_artificial_;
    lower_.resize(total_, 0.0);
    upper_.resize(total_, kInf);
    value_.resize(total_, 0.0);
    cost_.resize(total_, 0.0);

    // column storage of [A | I | artificials], used when refactoring
    columns_.assign(total_, {});
    for (int i = 0; i < m_; ++i)
      for (auto [j, a] : p.rows[i].terms) columns_[j].emplace_back(i, a);
    for (int i = 0; i < m_; ++i) columns_[n_ + i].emplace_back(i, 1.0);

    basic_.assign(m_, -1);
    pos_.assign(total_, -1);
    nonbasic_.clear();
    for (int j = 0; j < n_; ++j) nonbasic_.push_back(j);
    int next_art = first_artificial_;
    for (int i = 0; i < m_; ++i) {
      int s = n_ + i;
      if (sign[i] == 0) {
        basic_[i] = s;
        value_[s] = residual[i];
      } else {
        int a = next_art++;
        columns_[a].emplace_back(i, static_cast<double>(sign[i]));
        basic_[i] = a;
        value_[s] = 0.0;
        value_[a] = std::abs(residual[i]);
        nonbasic_.push_back(s);
      }
    }
    cols_ = static_cast<int>(nonbasic_.size());
    for (int k = 0; k < cols_; ++k) pos_[nonbasic_[k]] = k;
    tab_.assign(static_cast<std::size_t>(m_ + 1) * cols_, 0.0);
    for (int i = 0; i < m_; ++i) {
      double sg = sign[i] == 0 ? 1.0 : static_cast<double>(sign[i]);
      for (auto [j, a] : p.rows[i].terms) T(i, pos_[j]) += sg * a;
      if (sign[i] != 0) T(i, pos_[n_ + i]) = sg;
    }
  }

  void load_objective() {
    for (int k = 0; k < cols_; ++k) {
      double r = obj_[nonbasic_[k]];
      for (int i = 0; i < m_; ++i) r -= obj_[basic_[i]] * T(i, k);
      T(m_, k) = -r;
    }
  }

  double reduced_cost(int k) { return -T(m_, k); }

  /// Rebuilds the tableau, the basic values and the reduced costs from the
  /// original columns. Keeps the current tableau if the basis looks singular.
  bool refactor() {
    since_refactor_ = 0;
    if (m_ == 0) return true;
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(m_, cols_ + 1);
    for (int i = 0; i < m_; ++i) rhs(i, cols_) = rhs_[i];
    for (int k = 0; k < cols_; ++k) {
      int v = nonbasic_[k];
      for (auto [r, a] : columns_[v]) {
        rhs(r, k) = a;
        rhs(r, cols_) -= a * value_[v];
      }
    }
    Eigen::MatrixXd sol;
    if (m_ <= kDenseFactorRows) {
      Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(m_, m_);
      for (int i = 0; i < m_; ++i)
        for (auto [r, a] : columns_[basic_[i]]) basis(r, i) = a;
      Eigen::FullPivLU<Eigen::MatrixXd> lu(basis);
      if (!lu.isInvertible()) return false;
      sol = lu.solve(rhs);
    } else {
      using Sparse = Eigen::SparseMatrix<double>;
      std::vector<Eigen::Triplet<double>> trips;
      for (int i = 0; i < m_; ++i)
        for (auto [r, a] : columns_[basic_[i]]) trips.emplace_back(r, i, a);
      Sparse basis(m_, m_);
      basis.setFromTriplets(trips.begin(), trips.end());
      basis.makeCompressed();
      Eigen::SparseLU<Sparse> lu;
      lu.compute(basis);
      if (lu.info() != Eigen::Success) return false;
      sol = lu.solve(rhs);
      if (lu.info() != Eigen::Success) return false;
    }
    if (!sol.allFinite()) return false;
    for (int i = 0; i < m_; ++i) {
      for (int k = 0; k < cols_; ++k) T(i, k) = sol(i, k);
      value_[basic_[i]] = sol(i, cols_);
    }
    load_objective();
    return true;
  }

  LpStatus iterate(long limit) {
    int degenerate_run = 0;
    bool bland = false;
    while (true) {
      if (iterations_ >= limit) return LpStatus::IterationLimit;
      if (iterations_ % 16 == 0 && opt_.deadline != std::chrono::steady_clock::time_point::max() &&
          std::chrono::steady_clock::now() > opt_.deadline)
        return LpStatus::TimeLimit;
      if (since_refactor_ >= kRefactorEvery) refactor();
      int q = price(bland);
      if (q < 0 && since_refactor_ > kTrustedPivots) {
        // confirm on a fresh tableau before declaring optimality
        refactor();
        q = price(bland);
      }
      if (q < 0) return LpStatus::Optimal;
      int entering = nonbasic_[q];
      double dir = reduced_cost(q) > 0 ? 1.0 : -1.0;

      // Harris two-pass ratio test: find the largest step that keeps every
      // basic variable within a small tolerance of its bounds, then pivot on
      // the largest entry among the rows that block within that step.
      const double delta = opt_.feasibility_tolerance;
      double range = upper_[entering] - lower_[entering];
      double relaxed = range;
      for (int i = 0; i < m_; ++i) {
        double a = T(i, q);
        if (std::abs(a) <= opt_.pivot_tolerance) continue;
        double rate = -a * dir;  // change of basic i per unit step
        int b = basic_[i];
        if (rate < 0) {
          if (lower_[b] == -kInf) continue;
          relaxed = std::min(relaxed, (value_[b] - lower_[b] + delta) / -rate);
        } else {
          if (upper_[b] == kInf) continue;
          relaxed = std::min(relaxed, (upper_[b] - value_[b] + delta) / rate);
        }
      }
      if (relaxed == kInf) return LpStatus::Unbounded;
      int leave = -1;
      double theta = range;
      if (range > relaxed) {
        double best = 0.0;
        for (int i = 0; i < m_; ++i) {
          double a = T(i, q);
          if (std::abs(a) <= opt_.pivot_tolerance) continue;
          double rate = -a * dir;
          int b = basic_[i];
          double limit_i;
          if (rate < 0) {
            if (lower_[b] == -kInf) continue;
            limit_i = (value_[b] - lower_[b]) / -rate;
          } else {
            if (upper_[b] == kInf) continue;
            limit_i = (upper_[b] - value_[b]) / rate;
          }
          if (limit_i > relaxed) continue;
          bool take = leave < 0 || (bland ? b < basic_[leave] : std::abs(a) > best);
          if (take) {
            leave = i;
            best = std::abs(a);
            theta = std::max(limit_i, 0.0);
          }
        }
      }
      ++iterations_;

      // move
      value_[entering] += dir * theta;
      for (int i = 0; i < m_; ++i) value_[basic_[i]] -= T(i, q) * dir * theta;

      if (theta <= delta) {
        if (++degenerate_run >= opt_.degenerate_switch) bland = true;
      } else {
        degenerate_run = 0;
        bland = false;
      }

      if (leave < 0) {
        // bound flip
        value_[entering] = dir > 0 ? upper_[entering] : lower_[entering];
        continue;
      }
      int leaving = basic_[leave];
      double a = T(leave, q);
      value_[leaving] = (-a * dir < 0) ? lower_[leaving] : upper_[leaving];
      pivot(leave, q);
      ++since_refactor_;
    }
  }

  int price(bool bland) {
    int q = -1;
    double best = 0.0;
    for (int k = 0; k < cols_; ++k) {
      int v = nonbasic_[k];
      if (upper_[v] - lower_[v] <= 0.0) continue;
      double d = reduced_cost(k);
      bool at_lower = value_[v] <= lower_[v];
      bool at_upper = value_[v] >= upper_[v];
      double gain = 0.0;
      if (d > opt_.optimality_tolerance && !at_upper) gain = d;
      if (d < -opt_.optimality_tolerance && !at_lower) gain = -d;
      if (gain <= 0.0) continue;
      if (bland) {
        if (q < 0 || v < nonbasic_[q]) q = k;
      } else if (gain > best) {
        best = gain;
        q = k;
      }
    }
    return q;
  }

  void pivot(int r, int q) {
    double p = T(r, q);
    double* row_r = &tab_[static_cast<std::size_t>(r) * cols_];
    for (int k = 0; k < cols_; ++k) row_r[k] /= p;
    row_r[q] = 1.0 / p;
    // the models are sparse; only the pivot row's nonzeros take part
    nz_.clear();
    for (int k = 0; k < cols_; ++k)
      if (k != q && row_r[k] != 0.0) nz_.push_back(k);
    for (int i = 0; i <= m_; ++i) {
      if (i == r) continue;
      double* row_i = &tab_[static_cast<std::size_t>(i) * cols_];
      double f = row_i[q];
      if (f == 0.0) continue;
      for (int k : nz_) row_i[k] -= f * row_r[k];
      row_i[q] = -f / p;
    }
    int entering = nonbasic_[q];
    int leaving = basic_[r];
    basic_[r] = entering;
    nonbasic_[q] = leaving;
    pos_[entering] = -1;
    pos_[leaving] = q;
  }

  SimplexOptions opt_;
  int n_ = 0, m_ = 0, cols_ = 0, total_ = 0;
  int first_artificial_ = 0, num_artificial_ = 0;
  bool infeasible_bounds_ = false;
  double rhs_scale_ = 1.0;
  long iterations_ = 0;
  int since_refactor_ = 0;
  std::vector<double> lower_, upper_, value_, cost_, obj_, rhs_;
  std::vector<std::vector<std::pair<int, double>>> columns_;
  std::vector<int> basic_, nonbasic_, pos_;
  std::vector<double> tab_;
  std::vector<int> nz_;
};

}  // namespace detail

/// Bounded-variable primal simplex (two phases, Dantzig pricing with a
/// fallback to Bland's rule on degenerate stalls, Harris ratio test).
/// Fixed variables are substituted out, singleton rows become bounds and
/// redundant rows are dropped before the tableau is built.
inline LpResult solve_lp_simplex(const LpProblem& p, const SimplexOptions& opt = {}) {
  const int n = static_cast<int>(p.num_variables());
  for (int j = 0; j < n; ++j)
    if (!std::isfinite(p.lower[j]) || !std::isfinite(p.upper[j]))
      throw Error(ErrorKind::Range, "simplex requires finite variable bounds");
  for (int j = 0; j < n; ++j)
    if (p.lower[j] > p.upper[j] + opt.feasibility_tolerance) return LpResult{LpStatus::Infeasible, {}, 0.0, 0};

  std::vector<int> map(n, -1);
  LpProblem reduced;
  for (int j = 0; j < n; ++j)
    if (p.upper[j] - p.lower[j] > 0.0) map[j] = reduced.add_variable(p.lower[j], p.upper[j], p.objective[j]);
  double constant = 0.0;
  for (int j = 0; j < n; ++j)
    if (map[j] < 0) constant += p.objective[j] * p.lower[j];
  for (const auto& row : p.rows) {
    LpRow r;
    r.rel = row.rel;
    r.rhs = row.rhs;
    for (auto [j, a] : row.terms) {
      if (a == 0.0) continue;
      if (map[j] < 0)
        r.rhs -= a * p.lower[j];
      else
        r.terms.emplace_back(map[j], a);
    }
    if (r.terms.empty()) {
      double tol = 1e-9 * std::max(1.0, std::abs(row.rhs));
      bool ok = (r.rel == Rel::Le && 0.0 <= r.rhs + tol) || (r.rel == Rel::Ge && 0.0 >= r.rhs - tol) ||
                (r.rel == Rel::Eq && std::abs(r.rhs) <= tol);
      if (!ok) return LpResult{LpStatus::Infeasible, {}, 0.0, 0};
      continue;
    }
    reduced.rows.push_back(std::move(r));
  }
  // singleton rows become bounds; rows the bounds already imply are dropped
  {
    std::vector<LpRow> kept;
    for (auto& r : reduced.rows) {
      if (r.terms.size() != 1) continue;
      auto [j, a] = r.terms[0];
      double v = r.rhs / a;
      bool upper = (r.rel == Rel::Le) == (a > 0);
      if (r.rel == Rel::Eq || upper) reduced.upper[j] = std::min(reduced.upper[j], v);
      if (r.rel == Rel::Eq || !upper) reduced.lower[j] = std::max(reduced.lower[j], v);
    }
    for (std::size_t j = 0; j < reduced.num_variables(); ++j)
      if (reduced.lower[j] > reduced.upper[j] + opt.feasibility_tolerance * std::max(1.0, std::abs(reduced.upper[j])))
        return LpResult{LpStatus::Infeasible, {}, 0.0, 0};
      else if (reduced.lower[j] > reduced.upper[j])
        reduced.lower[j] = reduced.upper[j];
    for (auto& r : reduced.rows) {
      if (r.terms.size() == 1) continue;
      double lo = 0.0, hi = 0.0;
      for (auto [j, a] : r.terms) {
        lo += a * (a > 0 ? reduced.lower[j] : reduced.upper[j]);
        hi += a * (a > 0 ? reduced.upper[j] : reduced.lower[j]);
      }
      if ((r.rel == Rel::Le && hi <= r.rhs) || (r.rel == Rel::Ge && lo >= r.rhs)) continue;
      kept.push_back(std::move(r));
    }
    reduced.rows = std::move(kept);
  }

  detail::BoundedSimplex simplex(reduced, opt);
  auto inner = simplex.run();
  LpResult out;
  out.status = inner.status;
  out.iterations = inner.iterations;
  if (inner.status != LpStatus::Optimal) return out;
  out.x.assign(n, 0.0);
  for (int j = 0; j < n; ++j) out.x[j] = map[j] < 0 ? p.lower[j] : inner.x[map[j]];
  out.objective = inner.objective + constant;
  return out;
}

}  // namespace miir
