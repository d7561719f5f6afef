#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "miir/cascade.hpp"
#include "miir/error.hpp"
#include "miir/lp.hpp"
#include "miir/network.hpp"

namespace miir {

// Worst-case cascade MIP over timesteps 0..T, T = |E| - 1.
//
// Variables
//   x[i][t]  binary, entity i non-operational at t
//   c[m][t]  binary, minterm m has a member down at t - 1 (c[m][0] = 0)
//   y[i][t]  real power: lines and generators in [0, u + 1] (t = 0 pinned to
//            the build value), loads pinned to demand, neutrals to 0
//   o[i][t]  overload indicator for lines and generators, t >= 1
//   q[t]     "something failed at t", t < T; a quiet step ends the cascade
//
// Rows (t >= 1 unless noted)
//   card / init   initial failures (Sum x[.][0] = K, or a fixed set)
//   mono          x[i][t] >= x[i][t-1]
//   mor / mand    c[m][t] is exactly the OR of its members' x at t-1
//   idr / frc     bus fails iff every minterm is hit (generators may also
//                 fail by overload); hold keeps buses without an IDR alive
//   fol / why     a line is down once its source is; otherwise it only fails
//                 by overload
//   ovx/ovy/ovc   o <= delta x, y >= (u+1) o, y <= u + o
//   ovi           a generator whose IDR is dead cannot claim an overload
//   fdp/fds/fdt/fdg  no flow through dead lines or into/out of dead buses
//   bal/bhi/blo   conservation; a non-generator bus must serve its demand
//                 exactly unless it fails at t+1, in which case it may run a
//                 deficit
//   qhi / qlo     quiescence, t = 0..T-1
//
// The objective is Sum_i x[i][T] - eps * Sum_{i, t>=1} x[i][t]; eps * |E| * T < 1
// so the dead count dominates and ties go to the latest failure times.

enum class VarKind : std::uint8_t { X, C, Y, O, Q };

struct VarTag {
  VarKind kind;
  int a = -1;  // entity (X, Y, O) or minterm (C)
  int t = 0;
};

enum class RowKind : std::uint8_t {
  Card, Init, Mono, MintermOr, MintermAnd, Idr, Forced, Hold, Follow, Reason,
  OverDelta, OverFlow, OverCap, OverIdr, DeadPrev, DeadSource, DeadSink, DeadGen,
  BalGen, BalHi, BalLo, QuietHi, QuietLo,
};

inline const char* row_prefix(RowKind k) {
  switch (k) {
    case RowKind::Card: return "card";
    case RowKind::Init: return "init";
    case RowKind::Mono: return "mono";
    case RowKind::MintermOr: return "mor";
    case RowKind::MintermAnd: return "mand";
    case RowKind::Idr: return "idr";
    case RowKind::Forced: return "frc";
    case RowKind::Hold: return "hold";
    case RowKind::Follow: return "fol";
    case RowKind::Reason: return "why";
    case RowKind::OverDelta: return "ovx";
    case RowKind::OverFlow: return "ovy";
    case RowKind::OverCap: return "ovc";
    case RowKind::OverIdr: return "ovi";
    case RowKind::DeadPrev: return "fdp";
    case RowKind::DeadSource: return "fds";
    case RowKind::DeadSink: return "fdt";
    case RowKind::DeadGen: return "fdg";
    case RowKind::BalGen: return "bal";
    case RowKind::BalHi: return "bhi";
    case RowKind::BalLo: return "blo";
    case RowKind::QuietHi: return "qhi";
    case RowKind::QuietLo: return "qlo";
  }
  return "row";
}

struct RowTag {
  RowKind kind;
  int a = -1;  // entity, or minterm for mor/mand
  int b = -1;  // member position for mand
  int t = -1;
};

struct MintermRef {
  int target = -1;
  int position = 0;  // 1-based within the target's IDR
  std::vector<int> members;
};

struct MipOptions {
  bool paper_literal = false;  // printed sign of the line-follows-source rows
};

class MipModel {
 public:
  // Network view
  std::vector<std::string> ids;    // original entity ids
  std::vector<std::string> names;  // LP-safe entity ids
  Topology topo;
  std::vector<double> upper_bound, value;
  std::vector<MintermRef> minterms;
  int horizon = 0;  // T
  std::optional<int> k;
  std::optional<std::set<std::string>> initial;
  bool paper_literal = false;
  double epsilon = 0.0;

  // Variables
  std::vector<double> lower, upper, objective;
  std::vector<char> binary;
  std::vector<VarTag> var_tags;

  // Rows in compressed form
  std::vector<int> row_start{0};
  std::vector<int> row_cols;
  std::vector<double> row_vals;
  std::vector<Rel> row_rel;
  std::vector<double> row_rhs;
  std::vector<RowTag> row_tags;

  std::size_t num_variables() const { return lower.size(); }
  std::size_t num_rows() const { return row_rel.size(); }

  int x(int i, int t) const { return x_[i * (horizon + 1) + t]; }
  int y(int i, int t) const { return y_[i * (horizon + 1) + t]; }
  int c(int m, int t) const { return c_[m * (horizon + 1) + t]; }
  int o(int i, int t) const { return o_.empty() ? -1 : o_[i * (horizon + 1) + t]; }
  int q(int t) const { return t < static_cast<int>(q_.size()) ? q_[t] : -1; }

  std::string var_name(int j) const {
    const auto& tag = var_tags[j];
    std::string t = std::to_string(tag.t);
    switch (tag.kind) {
      case VarKind::X: return "x_" + names[tag.a] + "_" + t;
      case VarKind::Y: return "y_" + names[tag.a] + "_" + t;
      case VarKind::O: return "o_" + names[tag.a] + "_" + t;
      case VarKind::Q: return "q_" + t;
      case VarKind::C: {
        const auto& m = minterms[tag.a];
        return "c_" + names[m.target] + "_" + std::to_string(m.position) + "_" + t;
      }
    }
    return {};
  }

  std::string row_name(int r) const {
    const auto& tag = row_tags[r];
    std::string out = row_prefix(tag.kind);
    if (tag.kind == RowKind::MintermOr || tag.kind == RowKind::MintermAnd) {
      const auto& m = minterms[tag.a];
      out += "_" + names[m.target] + "_" + std::to_string(m.position);
      if (tag.kind == RowKind::MintermAnd) out += "_" + names[m.members[tag.b]];
    } else if (tag.a >= 0) {
      out += "_" + names[tag.a];
    }
    if (tag.t >= 0) out += "_" + std::to_string(tag.t);
    return out;
  }

  std::optional<int> find_variable(std::string_view name) const {
    auto& lk = *lookup_;
    std::call_once(lk.once, [&] {
      for (std::size_t j = 0; j < num_variables(); ++j) lk.index.emplace(var_name(static_cast<int>(j)), static_cast<int>(j));
    });
    auto it = lk.index.find(std::string(name));
    if (it == lk.index.end()) return std::nullopt;
    return it->second;
  }

  double row_activity(int r, const std::vector<double>& v) const {
    double act = 0.0;
    for (int p = row_start[r]; p < row_start[r + 1]; ++p) act += row_vals[p] * v[row_cols[p]];
    return act;
  }

  /// Relaxation of the model as a plain LP (integrality dropped).
  LpProblem relaxation() const {
    LpProblem p;
    p.lower = lower;
    p.upper = upper;
    p.objective = objective;
    p.rows.reserve(num_rows());
    for (std::size_t r = 0; r < num_rows(); ++r) {
      LpRow row;
      row.rel = row_rel[r];
      row.rhs = row_rhs[r];
      for (int k = row_start[r]; k < row_start[r + 1]; ++k) row.terms.emplace_back(row_cols[k], row_vals[k]);
      p.rows.push_back(std::move(row));
    }
    return p;
  }

 private:
  friend class MipAssembler;
  std::vector<int> x_, y_, c_, o_, q_;
  // Name index, built on first lookup; copies share it (names never change).
  struct Lookup {
    std::once_flag once;
    std::unordered_map<std::string, int> index;
  };
  std::shared_ptr<Lookup> lookup_ = std::make_shared<Lookup>();
};

inline std::string lp_safe_name(std::string_view id) {
  static constexpr std::string_view extra = "!\"#$%&()/,.;?@_`'{}|~";
  std::string out;
  out.reserve(id.size());
  for (char ch : id) {
    bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') ||
              extra.find(ch) != std::string_view::npos;
    out.push_back(ok ? ch : '_');
  }
  return out;
}

class MipAssembler {
 public:
  MipAssembler(const PowerNetwork& net, const MipOptions& opt) : net_(net), topo_(net.topology()) {
    m_.paper_literal = opt.paper_literal;
    m_.topo = topo_;
    n_ = static_cast<int>(topo_.size());
    T_ = std::max(0, n_ - 1);
    m_.horizon = T_;
    std::set<std::string> seen;
    for (int i = 0; i < n_; ++i) {
      const auto& e = net.entity(i);
      m_.ids.push_back(e.id);
      m_.names.push_back(lp_safe_name(e.id));
      if (!seen.insert(m_.names.back()).second)
        throw Error(ErrorKind::Invalid, "entity id '" + e.id + "' collides with another id after LP-name sanitizing");
      m_.upper_bound.push_back(e.upper_bound);
      m_.value.push_back(e.value);
    }
    for (int b = 0; b < n_; ++b)
      for (std::size_t k = 0; k < topo_.minterms[b].size(); ++k)
        m_.minterms.push_back({b, static_cast<int>(k) + 1, topo_.minterms[b][k]});
    m_.epsilon = T_ > 0 ? 1.0 / (static_cast<double>(n_) * T_ + 1.0) : 0.0;
  }

  MipModel build(std::optional<int> k, const std::vector<char>* initial) {
    declare_variables();
    if (initial) {
      for (int i = 0; i < n_; ++i)
        add({RowKind::Init, i, -1, -1}, {{m_.x(i, 0), 1.0}}, Rel::Eq, (*initial)[i] ? 1.0 : 0.0);
    } else if (n_ > 0) {
      std::vector<std::pair<int, double>> terms;
      for (int i = 0; i < n_; ++i) terms.emplace_back(m_.x(i, 0), 1.0);
      add({RowKind::Card, -1, -1, -1}, std::move(terms), Rel::Eq, static_cast<double>(*k));
    }
    for (int i = 0; i < n_; ++i)
      for (int t = 1; t <= T_; ++t)
        add({RowKind::Mono, i, -1, t}, {{m_.x(i, t), 1.0}, {m_.x(i, t - 1), -1.0}}, Rel::Ge, 0.0);
    minterm_rows();
    bus_rows();
    line_rows();
    overload_rows();
    dead_flow_rows();
    balance_rows();
    quiet_rows();
    return std::move(m_);
  }

 private:
  using Terms = std::vector<std::pair<int, double>>;

  int var(VarKind kind, int a, int t, double lb, double ub, bool bin) {
    m_.lower.push_back(lb);
    m_.upper.push_back(ub);
    m_.objective.push_back(0.0);
    m_.binary.push_back(bin ? 1 : 0);
    m_.var_tags.push_back({kind, a, t});
    return static_cast<int>(m_.lower.size()) - 1;
  }

  void add(RowTag tag, Terms terms, Rel rel, double rhs) {
    for (auto [j, a] : terms) {
      m_.row_cols.push_back(j);
      m_.row_vals.push_back(a);
    }
    m_.row_start.push_back(static_cast<int>(m_.row_cols.size()));
    m_.row_rel.push_back(rel);
    m_.row_rhs.push_back(rhs);
    m_.row_tags.push_back(tag);
  }

  bool flows(int i) const {
    auto kind = topo_.kinds[i];
    return kind == EntityKind::Line || kind == EntityKind::Generator;
  }
  double cap(int i) const { return m_.upper_bound[i] + 1.0; }

  void declare_variables() {
    const int span = T_ + 1;
    m_.x_.assign(static_cast<std::size_t>(n_) * span, -1);
    m_.y_.assign(static_cast<std::size_t>(n_) * span, -1);
    m_.c_.assign(m_.minterms.size() * span, -1);
    m_.o_.assign(static_cast<std::size_t>(n_) * span, -1);
    for (int i = 0; i < n_; ++i)
      for (int t = 0; t <= T_; ++t) {
        int j = var(VarKind::X, i, t, 0.0, 1.0, true);
        m_.x_[i * span + t] = j;
        if (t == T_) m_.objective[j] += 1.0;
        if (t >= 1) m_.objective[j] -= m_.epsilon;
      }
    for (std::size_t m = 0; m < m_.minterms.size(); ++m)
      for (int t = 0; t <= T_; ++t)
        m_.c_[m * span + t] = var(VarKind::C, static_cast<int>(m), t, 0.0, t == 0 ? 0.0 : 1.0, true);
    for (int i = 0; i < n_; ++i)
      for (int t = 0; t <= T_; ++t) {
        double lb = 0.0, ub = 0.0;
        if (flows(i)) {
          if (t == 0) lb = ub = m_.value[i];
          else ub = cap(i);
        } else if (topo_.kinds[i] == EntityKind::Load) {
          lb = ub = m_.value[i];
        }
        m_.y_[i * span + t] = var(VarKind::Y, i, t, lb, ub, false);
      }
    for (int i = 0; i < n_; ++i)
      if (flows(i))
        for (int t = 1; t <= T_; ++t) m_.o_[i * span + t] = var(VarKind::O, i, t, 0.0, 1.0, false);
    for (int t = 0; t < T_; ++t) m_.q_.push_back(var(VarKind::Q, -1, t, 0.0, 1.0, false));
  }

  void minterm_rows() {
    for (std::size_t mi = 0; mi < m_.minterms.size(); ++mi) {
      const auto& mt = m_.minterms[mi];
      int m = static_cast<int>(mi);
      for (int t = 1; t <= T_; ++t) {
        Terms terms{{m_.c(m, t), 1.0}};
        for (int j : mt.members) terms.emplace_back(m_.x(j, t - 1), -1.0);
        add({RowKind::MintermOr, m, -1, t}, std::move(terms), Rel::Le, 0.0);
        for (std::size_t p = 0; p < mt.members.size(); ++p)
          add({RowKind::MintermAnd, m, static_cast<int>(p), t},
              {{m_.c(m, t), 1.0}, {m_.x(mt.members[p], t - 1), -1.0}}, Rel::Ge, 0.0);
      }
    }
  }

  // Minterm indices of bus b.
  std::vector<int> minterms_of(int b) const {
    std::vector<int> out;
    for (std::size_t m = 0; m < m_.minterms.size(); ++m)
      if (m_.minterms[m].target == b) out.push_back(static_cast<int>(m));
    return out;
  }

  void bus_rows() {
    for (int b = 0; b < n_; ++b) {
      if (!is_bus(topo_.kinds[b])) continue;
      bool gen = topo_.kinds[b] == EntityKind::Generator;
      auto ms = minterms_of(b);
      double N = static_cast<double>(ms.size());
      for (int t = 1; t <= T_; ++t) {
        if (ms.empty()) {
          Terms terms{{m_.x(b, t), 1.0}, {m_.x(b, t - 1), -1.0}};
          if (gen) terms.emplace_back(m_.o(b, t), -1.0);
          add({RowKind::Hold, b, -1, t}, std::move(terms), Rel::Le, 0.0);
          continue;
        }
        Terms idr{{m_.x(b, t), N}, {m_.x(b, t - 1), -N}};
        for (int m : ms) idr.emplace_back(m_.c(m, t), -1.0);
        if (gen) idr.emplace_back(m_.o(b, t), -N);
        add({RowKind::Idr, b, -1, t}, std::move(idr), Rel::Le, 0.0);
        Terms frc{{m_.x(b, t), 1.0}};
        for (int m : ms) frc.emplace_back(m_.c(m, t), -1.0);
        add({RowKind::Forced, b, -1, t}, std::move(frc), Rel::Ge, -(N - 1.0));
        if (gen) {
          Terms ovi{{m_.o(b, t), N}};
          for (int m : ms) ovi.emplace_back(m_.c(m, t), 1.0);
          add({RowKind::OverIdr, b, -1, t}, std::move(ovi), Rel::Le, N);
        }
      }
    }
  }

  void line_rows() {
    for (int l = 0; l < n_; ++l) {
      if (topo_.kinds[l] != EntityKind::Line) continue;
      int src = topo_.line_source[l];
      for (int t = 1; t <= T_; ++t) {
        add({RowKind::Follow, l, -1, t}, {{m_.x(l, t), 1.0}, {m_.x(src, t), -1.0}},
            m_.paper_literal ? Rel::Le : Rel::Ge, 0.0);
        add({RowKind::Reason, l, -1, t},
            {{m_.x(l, t), 1.0}, {m_.x(l, t - 1), -1.0}, {m_.o(l, t), -1.0}, {m_.x(src, t), -1.0}}, Rel::Le, 0.0);
      }
    }
  }

  void overload_rows() {
    for (int i = 0; i < n_; ++i) {
      if (!flows(i)) continue;
      for (int t = 1; t <= T_; ++t) {
        add({RowKind::OverDelta, i, -1, t}, {{m_.o(i, t), 1.0}, {m_.x(i, t), -1.0}, {m_.x(i, t - 1), 1.0}},
            Rel::Le, 0.0);
        add({RowKind::OverFlow, i, -1, t}, {{m_.y(i, t), 1.0}, {m_.o(i, t), -cap(i)}}, Rel::Ge, 0.0);
        add({RowKind::OverCap, i, -1, t}, {{m_.y(i, t), 1.0}, {m_.o(i, t), -1.0}}, Rel::Le, m_.upper_bound[i]);
      }
    }
  }

  // Terms of "bus b carries no flow at t", scaled by s.
  void flow_dead(Terms& terms, int b, int t, double s) const {
    terms.emplace_back(m_.x(b, t), s);
    if (topo_.kinds[b] == EntityKind::Generator) terms.emplace_back(m_.o(b, t), -s);
  }

  void dead_flow_rows() {
    for (int i = 0; i < n_; ++i) {
      double u = cap(i);
      for (int t = 1; t <= T_; ++t) {
        if (topo_.kinds[i] == EntityKind::Line) {
          add({RowKind::DeadPrev, i, -1, t}, {{m_.y(i, t), 1.0}, {m_.x(i, t - 1), u}}, Rel::Le, u);
          Terms src{{m_.y(i, t), 1.0}};
          flow_dead(src, topo_.line_source[i], t, u);
          add({RowKind::DeadSource, i, -1, t}, std::move(src), Rel::Le, u);
          Terms snk{{m_.y(i, t), 1.0}};
          flow_dead(snk, topo_.line_sink[i], t, u);
          add({RowKind::DeadSink, i, -1, t}, std::move(snk), Rel::Le, u);
        } else if (topo_.kinds[i] == EntityKind::Generator) {
          Terms g{{m_.y(i, t), 1.0}};
          flow_dead(g, i, t, u);
          add({RowKind::DeadGen, i, -1, t}, std::move(g), Rel::Le, u);
        }
      }
    }
  }

  void balance_rows() {
    for (int b = 0; b < n_; ++b) {
      if (!is_bus(topo_.kinds[b])) continue;
      double big = m_.value[b];
      for (int l : topo_.out_lines[b]) big += cap(l);
      for (int t = 1; t <= T_; ++t) {
        Terms net;
        for (int l : topo_.in_lines[b]) net.emplace_back(m_.y(l, t), 1.0);
        for (int l : topo_.out_lines[b]) net.emplace_back(m_.y(l, t), -1.0);
        if (topo_.kinds[b] == EntityKind::Generator) {
          net.emplace_back(m_.y(b, t), 1.0);
          add({RowKind::BalGen, b, -1, t}, std::move(net), Rel::Eq, 0.0);
          continue;
        }
        double d = m_.value[b];
        Terms hi = net;
        if (d != 0.0) hi.emplace_back(m_.x(b, t), d);
        add({RowKind::BalHi, b, -1, t}, std::move(hi), Rel::Le, d);
        Terms lo = std::move(net);
        if (t < T_) {
          lo.emplace_back(m_.x(b, t + 1), big);
          if (d - big != 0.0) lo.emplace_back(m_.x(b, t), d - big);
        } else if (d != 0.0) {
          lo.emplace_back(m_.x(b, t), d);
        }
        add({RowKind::BalLo, b, -1, t}, std::move(lo), Rel::Ge, d);
      }
    }
  }

  void quiet_rows() {
    const double n = static_cast<double>(n_);
    for (int t = 0; t < T_; ++t) {
      Terms hi{{m_.q(t), 1.0}};
      for (int i = 0; i < n_; ++i) {
        hi.emplace_back(m_.x(i, t), -1.0);
        if (t > 0) hi.emplace_back(m_.x(i, t - 1), 1.0);
      }
      add({RowKind::QuietHi, -1, -1, t}, std::move(hi), Rel::Le, 0.0);
      Terms lo{{m_.q(t), -n}};
      for (int i = 0; i < n_; ++i) {
        lo.emplace_back(m_.x(i, t + 1), 1.0);
        lo.emplace_back(m_.x(i, t), -1.0);
      }
      add({RowKind::QuietLo, -1, -1, t}, std::move(lo), Rel::Le, 0.0);
    }
  }

  const PowerNetwork& net_;
  const Topology& topo_;
  MipModel m_;
  int n_ = 0, T_ = 0;
};

inline MipModel build_mip(const PowerNetwork& net, int k, const MipOptions& opt = {}) {
  if (k < 0 || k > static_cast<int>(net.size()))
    throw Error(ErrorKind::Range, "K must lie in [0, " + std::to_string(net.size()) + "]");
  auto m = MipAssembler(net, opt).build(k, nullptr);
  m.k = k;
  return m;
}

inline MipModel build_fixed_initial_mip(const PowerNetwork& net, const std::set<std::string>& initial,
                                        const MipOptions& opt = {}) {
  std::vector<char> mask(net.size(), 0);
  for (const auto& id : initial) mask[net.require_index(id)] = 1;
  auto m = MipAssembler(net, opt).build(std::nullopt, &mask);
  m.initial = initial;
  return m;
}

// ---------------------------------------------------------------------------
// Census

struct MipCensus {
  std::size_t x = 0, y = 0, c = 0, o = 0, q = 0;
  std::size_t binaries = 0, continuous = 0;
  std::map<std::string, std::size_t> rows;  // by name prefix
  std::size_t total_rows = 0;

  friend bool operator==(const MipCensus&, const MipCensus&) = default;
};

inline MipCensus census_of(const MipModel& m) {
  MipCensus out;
  for (std::size_t j = 0; j < m.num_variables(); ++j) {
    switch (m.var_tags[j].kind) {
      case VarKind::X: ++out.x; break;
      case VarKind::Y: ++out.y; break;
      case VarKind::C: ++out.c; break;
      case VarKind::O: ++out.o; break;
      case VarKind::Q: ++out.q; break;
    }
    (m.binary[j] ? out.binaries : out.continuous) += 1;
  }
  for (const auto& tag : m.row_tags) ++out.rows[row_prefix(tag.kind)];
  out.total_rows = m.num_rows();
  return out;
}

/// Counts predicted from the network alone.
inline MipCensus closed_form_census(const PowerNetwork& net, bool fixed_initial) {
  const auto& topo = net.topology();
  const std::size_t n = topo.size(), T = n > 0 ? n - 1 : 0, span = T + 1;
  std::size_t lines = 0, gens = 0, gens_idr = 0, buses_idr = 0, buses_bare = 0, nongen = 0, members = 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto kind = topo.kinds[i];
    if (kind == EntityKind::Line) { ++lines; continue; }
    if (kind == EntityKind::Generator) {
      ++gens;
      if (topo.has_idr(static_cast<int>(i))) ++gens_idr;
    } else {
      ++nongen;
    }
    (topo.has_idr(static_cast<int>(i)) ? buses_idr : buses_bare) += 1;
    for (const auto& m : topo.minterms[i]) members += m.size();
  }
  const std::size_t M = topo.minterm_count();
  MipCensus c;
  c.x = n * span;
  c.y = n * span;
  c.c = M * span;
  c.o = (lines + gens) * T;
  c.q = T;
  c.binaries = c.x + c.c;
  c.continuous = c.y + c.o + c.q;
  auto put = [&](const char* key, std::size_t v) {
    if (v) c.rows[key] = v;
  };
  if (fixed_initial) put("init", n);
  else put("card", n > 0 ? 1 : 0);
  put("mono", n * T);
  put("mor", M * T);
  put("mand", members * T);
  put("idr", buses_idr * T);
  put("frc", buses_idr * T);
  put("hold", buses_bare * T);
  put("ovi", gens_idr * T);
  put("fol", lines * T);
  put("why", lines * T);
  put("ovx", (lines + gens) * T);
  put("ovy", (lines + gens) * T);
  put("ovc", (lines + gens) * T);
  put("fdp", lines * T);
  put("fds", lines * T);
  put("fdt", lines * T);
  put("fdg", gens * T);
  put("bal", gens * T);
  put("bhi", nongen * T);
  put("blo", nongen * T);
  put("qhi", T);
  put("qlo", T);
  for (const auto& [k, v] : c.rows) c.total_rows += v;
  return c;
}

// ---------------------------------------------------------------------------
// LP text

inline std::string format_number(double v) {
  if (v == 0.0) v = 0.0;  // drop negative zero
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

namespace detail {

inline void emit_terms(std::string& out, const MipModel& m, const int* cols, const double* vals, int count) {
  for (int k = 0; k < count; ++k) {
    if (k > 0 && k % 8 == 0) out += "\n   ";
    double a = vals[k];
    out += a < 0 ? " - " : " + ";
    out += format_number(std::abs(a));
    out += ' ';
    out += m.var_name(cols[k]);
  }
}

}  // namespace detail

inline std::string emit_lp(const MipModel& m) {
  std::string out;
  out += "Maximize\n obj:";
  std::vector<int> cols;
  std::vector<double> vals;
  for (std::size_t j = 0; j < m.num_variables(); ++j)
    if (m.objective[j] != 0.0) {
      cols.push_back(static_cast<int>(j));
      vals.push_back(m.objective[j]);
    }
  detail::emit_terms(out, m, cols.data(), vals.data(), static_cast<int>(cols.size()));
  out += "\nSubject To\n";
  for (std::size_t r = 0; r < m.num_rows(); ++r) {
    out += ' ';
    out += m.row_name(static_cast<int>(r));
    out += ':';
    int b = m.row_start[r], e = m.row_start[r + 1];
    detail::emit_terms(out, m, m.row_cols.data() + b, m.row_vals.data() + b, e - b);
    out += ' ';
    out += to_string(m.row_rel[r]);
    out += ' ';
    out += format_number(m.row_rhs[r]);
    out += '\n';
  }
  out += "Bounds\n";
  for (std::size_t j = 0; j < m.num_variables(); ++j) {
    double lb = m.lower[j], ub = m.upper[j];
    if (m.binary[j] && lb == 0.0 && ub == 1.0) continue;
    auto name = m.var_name(static_cast<int>(j));
    if (lb == ub)
      out += " " + name + " = " + format_number(lb) + "\n";
    else
      out += " " + format_number(lb) + " <= " + name + " <= " + format_number(ub) + "\n";
  }
  out += "Binaries\n";
  int on_line = 0;
  for (std::size_t j = 0; j < m.num_variables(); ++j) {
    if (!m.binary[j]) continue;
    out += ' ';
    out += m.var_name(static_cast<int>(j));
    if (++on_line == 10) {
      out += '\n';
      on_line = 0;
    }
  }
  if (on_line) out += '\n';
  out += "End\n";
  return out;
}

// ---------------------------------------------------------------------------
// Solutions

enum class SolutionStatus { Optimal, Feasible, Infeasible, TimeLimit };

inline const char* to_string(SolutionStatus s) {
  switch (s) {
    case SolutionStatus::Optimal: return "optimal";
    case SolutionStatus::Feasible: return "feasible";
    case SolutionStatus::Infeasible: return "infeasible";
    case SolutionStatus::TimeLimit: return "time-limit";
  }
  return "?";
}

struct LpSolution {
  std::map<std::string, double> assignment;
  double objective_value = 0.0;
  SolutionStatus status = SolutionStatus::Feasible;
};

/// Dense value vector in model order; names absent from the assignment are 0.
inline std::vector<double> dense_values(const MipModel& m, const LpSolution& sol) {
  std::vector<double> v(m.num_variables(), 0.0);
  for (const auto& [name, value] : sol.assignment) {
    auto j = m.find_variable(name);
    if (!j) throw Error(ErrorKind::Reference, "unknown variable '" + name + "'");
    v[*j] = value;
  }
  return v;
}

inline LpSolution make_solution(const MipModel& m, const std::vector<double>& v, SolutionStatus status) {
  LpSolution s;
  s.status = status;
  s.objective_value = 0.0;
  for (std::size_t j = 0; j < m.num_variables(); ++j) {
    s.assignment.emplace(m.var_name(static_cast<int>(j)), v[j]);
    s.objective_value += m.objective[j] * v[j];
  }
  return s;
}

/// Solution text: objective line, then one "<name> <value>" line per variable.
inline std::string write_solution(const MipModel& m, const LpSolution& sol) {
  std::string out = "# Objective value = " + format_number(sol.objective_value) + "\n";
  auto v = dense_values(m, sol);
  for (std::size_t j = 0; j < m.num_variables(); ++j)
  {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v[j] == 0.0 ? 0.0 : v[j]);
    out += m.var_name(static_cast<int>(j)) + " " + buf + "\n";
  }
  return out;
}

namespace detail {

inline std::optional<double> parse_real(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace detail

/// Accepts "# Objective value = v", "objective v" or "obj v" as the objective
/// line (first non-blank line); every later line is "<name> <value>".
inline LpSolution parse_solution(std::string_view text, const MipModel& m) {
  LpSolution sol;
  bool have_objective = false;
  int line_no = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    auto words = detail::split_ws(line);
    if (words.empty()) continue;
    auto where = "line " + std::to_string(line_no) + ": ";
    if (!have_objective) {
      std::optional<double> v;
      if (words.front().starts_with("#")) {
        auto eq = line.find('=');
        if (eq != std::string_view::npos) {
          auto rest = detail::split_ws(line.substr(eq + 1));
          if (rest.size() == 1) v = detail::parse_real(rest[0]);
        }
      } else if (words.size() == 2 && (words[0] == "objective" || words[0] == "obj" || words[0] == "Objective")) {
        v = detail::parse_real(words[1]);
      }
      if (!v) throw Error(ErrorKind::Syntax, where + "expected an objective line");
      sol.objective_value = *v;
      have_objective = true;
      continue;
    }
    if (words.front().starts_with("#")) continue;
    if (words.size() != 2) throw Error(ErrorKind::Syntax, where + "expected '<name> <value>'");
    if (!m.find_variable(words[0]))
      throw Error(ErrorKind::Reference, where + "unknown variable '" + std::string(words[0]) + "'");
    auto v = detail::parse_real(words[1]);
    if (!v) throw Error(ErrorKind::Syntax, where + "non-numeric value '" + std::string(words[1]) + "'");
    sol.assignment[std::string(words[0])] = *v;
  }
  if (!have_objective) throw Error(ErrorKind::Syntax, "solution has no objective line");
  return sol;
}

// ---------------------------------------------------------------------------
// Verification

struct Violation {
  std::string name;
  double residual = 0.0;
};

struct VerificationReport {
  bool passed = true;
  double max_residual = 0.0;
  std::vector<Violation> violations;
  std::vector<std::string> non_integral;
};

namespace detail {

inline double row_residual(Rel rel, double act, double rhs) {
  switch (rel) {
    case Rel::Le: return std::max(0.0, act - rhs);
    case Rel::Ge: return std::max(0.0, rhs - act);
    case Rel::Eq: return std::abs(act - rhs);
  }
  return 0.0;
}

// Failure audit straight from the cascade rules, independent of the rows.
inline void strict_audit(const MipModel& m, const std::vector<double>& v, VerificationReport& rep) {
  const auto& topo = m.topo;
  const int n = static_cast<int>(topo.size()), T = m.horizon;
  auto down = [&](int i, int t) { return v[m.x(i, t)] >= 0.5; };
  auto flag = [&](const std::string& what, int i, int t) {
    rep.violations.push_back({"strict:" + what + "_" + m.names[i] + "_" + std::to_string(t), 1.0});
  };
  for (int t = 1; t <= T; ++t)
    for (int i = 0; i < n; ++i) {
      bool fresh = down(i, t) && !down(i, t - 1);
      bool overloaded = false;
      if (m.o(i, t) >= 0) overloaded = v[m.y(i, t)] > m.upper_bound[i] + 1e-6;
      if (overloaded && !down(i, t)) flag("overload", i, t);
      if (topo.kinds[i] == EntityKind::Line) {
        bool src = down(topo.line_source[i], t);
        if (src && !down(i, t)) flag("follow", i, t);
        if (fresh && !src && !overloaded) flag("unjustified", i, t);
        continue;
      }
      bool idr_dead = false;
      if (topo.has_idr(i)) {
        idr_dead = true;
        for (const auto& mt : topo.minterms[i])
          if (std::none_of(mt.begin(), mt.end(), [&](int j) { return down(j, t - 1); })) idr_dead = false;
        if (idr_dead && !down(i, t)) flag("forced", i, t);
      }
      if (fresh && !idr_dead && !(topo.kinds[i] == EntityKind::Generator && overloaded)) flag("unjustified", i, t);
    }
}

}  // namespace detail

/// Re-checks bounds, every row and binary integrality. Strict mode also audits
/// each failure against the cascade rules.
inline VerificationReport verify_solution(const MipModel& m, const std::vector<double>& v, bool strict = false,
                                          double tol = 1e-6) {
  VerificationReport rep;
  for (std::size_t j = 0; j < m.num_variables(); ++j) {
    double r = std::max({0.0, m.lower[j] - v[j], v[j] - m.upper[j]});
    rep.max_residual = std::max(rep.max_residual, r);
    if (r > tol) rep.violations.push_back({"bound:" + m.var_name(static_cast<int>(j)), r});
    if (m.binary[j] && std::min(std::abs(v[j]), std::abs(v[j] - 1.0)) > tol)
      rep.non_integral.push_back(m.var_name(static_cast<int>(j)));
  }
  for (std::size_t r = 0; r < m.num_rows(); ++r) {
    double res = detail::row_residual(m.row_rel[r], m.row_activity(static_cast<int>(r), v), m.row_rhs[r]);
    rep.max_residual = std::max(rep.max_residual, res);
    if (res > tol) rep.violations.push_back({m.row_name(static_cast<int>(r)), res});
  }
  if (strict && rep.non_integral.empty()) detail::strict_audit(m, v, rep);
  rep.passed = rep.violations.empty() && rep.non_integral.empty();
  return rep;
}

inline VerificationReport verify_solution(const MipModel& m, const LpSolution& sol, bool strict = false) {
  return verify_solution(m, dense_values(m, sol), strict);
}

// ---------------------------------------------------------------------------
// Timeline

inline CascadeResult extract_timeline(const MipModel& m, const std::vector<double>& v) {
  CascadeResult r;
  for (std::size_t i = 0; i < m.ids.size(); ++i) {
    int first = -1;
    for (int t = 0; t <= m.horizon; ++t) {
      bool down = v[m.x(static_cast<int>(i), t)] >= 0.5;
      if (down && first < 0) first = t;
      if (!down && first >= 0)
        throw Error(ErrorKind::Invalid, "x for " + m.ids[i] + " returns to operational at t = " + std::to_string(t));
    }
    if (first < 0) continue;
    r.failed_at.emplace(m.ids[i], first);
    r.final_failed.insert(m.ids[i]);
    r.steps = std::max(r.steps, first);
  }
  return r;
}

inline CascadeResult extract_timeline(const MipModel& m, const LpSolution& sol) {
  return extract_timeline(m, dense_values(m, sol));
}

/// Number of entities down at T.
inline int dead_count(const MipModel& m, const std::vector<double>& v) {
  int n = 0;
  for (std::size_t i = 0; i < m.ids.size(); ++i) n += v[m.x(static_cast<int>(i), m.horizon)] >= 0.5 ? 1 : 0;
  return n;
}

inline int dead_count(const MipModel& m, const LpSolution& sol) { return dead_count(m, dense_values(m, sol)); }

}  // namespace miir
