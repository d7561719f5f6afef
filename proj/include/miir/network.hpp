#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "miir/error.hpp"

namespace miir {

enum class EntityKind { Generator, Load, Neutral, Line };

inline std::string_view to_string(EntityKind kind) {
  switch (kind) {
    case EntityKind::Generator: return "generator";
    case EntityKind::Load: return "load";
    case EntityKind::Neutral: return "neutral";
    case EntityKind::Line: return "line";
  }
  return "unknown";
}

inline std::optional<EntityKind> parse_entity_kind(std::string_view text) {
  if (text == "generator") return EntityKind::Generator;
  if (text == "load") return EntityKind::Load;
  if (text == "neutral") return EntityKind::Neutral;
  if (text == "line") return EntityKind::Line;
  return std::nullopt;
}

inline bool is_bus(EntityKind kind) { return kind != EntityKind::Line; }

/// One network element with its operating envelope [lower_bound, upper_bound]
/// and its instantaneous real power (MW). For loads `value` is the demand.
struct Entity {
  std::string id;
  EntityKind kind = EntityKind::Neutral;
  double lower_bound = 0.0;
  double upper_bound = 0.0;
  double value = 0.0;

  friend bool operator==(const Entity&, const Entity&) = default;
};

using Minterm = std::vector<std::string>;

/// Dependency relation of one bus: it stays operational while at least one
/// minterm has every member operational.
struct Idr {
  std::string target;
  std::vector<Minterm> minterms;

  friend bool operator==(const Idr&, const Idr&) = default;
};

/// Line orientation taken from the pre-disturbance flow direction.
struct LineEnds {
  std::string source;
  std::string sink;

  friend bool operator==(const LineEnds&, const LineEnds&) = default;
};

/// Integer view of a network used by the propagation and optimization code.
/// Entity indices follow the id-sorted entity order of the owning network.
struct Topology {
  std::vector<std::string> ids;
  std::vector<EntityKind> kinds;
  // Per entity; empty for entities without an IDR.
  std::vector<std::vector<std::vector<int>>> minterms;
  // Per entity; -1 for buses.
  std::vector<int> line_source;
  std::vector<int> line_sink;
  // Per entity; empty for lines.
  std::vector<std::vector<int>> out_lines;
  std::vector<std::vector<int>> in_lines;
  // Buses whose IDR mentions the entity, deduplicated.
  std::vector<std::vector<int>> dependents;

  std::size_t size() const { return ids.size(); }
  bool has_idr(int e) const { return !minterms[e].empty(); }
  std::size_t minterm_count() const {
    std::size_t n = 0;
    for (const auto& m : minterms) n += m.size();
    return n;
  }
};

struct BalanceViolation {
  std::string bus;
  double residual = 0.0;  // outflow - inflow - injection, MW
};

/// The abstraction P(E, B, C_t, F): entities with bounds and instantaneous
/// values, bus dependency relations, and oriented line endpoints.
///
/// Construction validates every structural invariant and the build-time power
/// balance; a constructed network is immutable.
class PowerNetwork {
 public:
  static constexpr double kBalanceTolerance = 1e-6;

  PowerNetwork() { index(); }

  PowerNetwork(std::vector<Entity> entities, std::vector<Idr> idrs,
               std::map<std::string, LineEnds> lines,
               double balance_tolerance = kBalanceTolerance)
      : entities_(std::move(entities)), idrs_(std::move(idrs)), lines_(std::move(lines)) {
    std::sort(entities_.begin(), entities_.end(),
              [](const Entity& a, const Entity& b) { return a.id < b.id; });
    std::sort(idrs_.begin(), idrs_.end(),
              [](const Idr& a, const Idr& b) { return a.target < b.target; });
    validate_structure();
    index();
    check_acyclic();
    auto violations = balance_violations(balance_tolerance);
    if (!violations.empty()) {
      const auto& v = violations.front();
      throw Error(ErrorKind::Conservation,
                  "power balance violated at bus " + v.bus + " (residual " +
                      std::to_string(v.residual) + " MW)");
    }
  }

  const std::vector<Entity>& entities() const { return entities_; }
  const std::vector<Idr>& idrs() const { return idrs_; }
  const std::map<std::string, LineEnds>& lines() const { return lines_; }
  const Topology& topology() const { return topo_; }
  std::size_t size() const { return entities_.size(); }

  std::optional<int> index_of(std::string_view id) const {
    auto it = lookup_.find(std::string(id));
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
  }

  int require_index(std::string_view id) const {
    auto idx = index_of(id);
    if (!idx) throw Error(ErrorKind::Reference, "unknown entity '" + std::string(id) + "'");
    return *idx;
  }

  const Entity& entity(std::string_view id) const { return entities_[require_index(id)]; }
  const Entity& entity(int index) const { return entities_[index]; }

  const Idr* idr_of(std::string_view id) const {
    auto it = std::lower_bound(idrs_.begin(), idrs_.end(), id,
                               [](const Idr& a, std::string_view t) { return a.target < t; });
    if (it == idrs_.end() || it->target != id) return nullptr;
    return &*it;
  }

  /// Residual of the balance equation at every bus whose |residual| exceeds tol.
  std::vector<BalanceViolation> balance_violations(double tol) const {
    std::vector<BalanceViolation> out;
    for (std::size_t b = 0; b < entities_.size(); ++b) {
      const auto& e = entities_[b];
      if (!is_bus(e.kind)) continue;
      double flow_out = 0.0, flow_in = 0.0;
      for (int l : topo_.out_lines[b]) flow_out += entities_[l].value;
      for (int l : topo_.in_lines[b]) flow_in += entities_[l].value;
      double injection = 0.0;
      if (e.kind == EntityKind::Generator) injection = e.value;
      if (e.kind == EntityKind::Load) injection = -e.value;
      double residual = flow_out - flow_in - injection;
      if (std::abs(residual) > tol) out.push_back({e.id, residual});
    }
    return out;
  }

  friend bool operator==(const PowerNetwork& a, const PowerNetwork& b) {
    return a.entities_ == b.entities_ && a.idrs_ == b.idrs_ && a.lines_ == b.lines_;
  }

 private:
  void validate_structure() {
    for (std::size_t i = 0; i < entities_.size(); ++i) {
      const auto& e = entities_[i];
      if (e.id.empty()) throw Error(ErrorKind::Invalid, "entity with empty id");
      if (i > 0 && entities_[i - 1].id == e.id)
        throw Error(ErrorKind::Invalid, "duplicate entity id '" + e.id + "'");
      if (!std::isfinite(e.lower_bound) || !std::isfinite(e.upper_bound) || !std::isfinite(e.value))
        throw Error(ErrorKind::Invalid, "non-finite value on entity " + e.id);
      if (e.lower_bound > e.upper_bound)
        throw Error(ErrorKind::Invalid, "lower bound above upper bound on " + e.id);
      switch (e.kind) {
        case EntityKind::Load:
          if (e.lower_bound != e.value || e.upper_bound != e.value)
            throw Error(ErrorKind::Invalid, "load " + e.id + " must have bounds pinned to its demand");
          break;
        case EntityKind::Neutral:
          if (e.lower_bound != 0.0 || e.upper_bound != 0.0 || e.value != 0.0)
            throw Error(ErrorKind::Invalid, "neutral bus " + e.id + " must carry zeros");
          break;
        case EntityKind::Generator:
        case EntityKind::Line:
          if (e.lower_bound != 0.0)
            throw Error(ErrorKind::Invalid, "entity " + e.id + " must have lower bound 0");
          if (e.value < 0.0 || e.value > e.upper_bound)
            throw Error(ErrorKind::Invalid, "value of " + e.id + " outside [0, upper bound]");
          break;
      }
    }
    auto kind_of = [&](const std::string& id) -> std::optional<EntityKind> {
      auto it = std::lower_bound(entities_.begin(), entities_.end(), id,
                                 [](const Entity& a, const std::string& t) { return a.id < t; });
      if (it == entities_.end() || it->id != id) return std::nullopt;
      return it->kind;
    };
    for (const auto& [line, ends] : lines_) {
      auto k = kind_of(line);
      if (!k) throw Error(ErrorKind::Reference, "line '" + line + "' is not an entity");
      if (*k != EntityKind::Line) throw Error(ErrorKind::Invalid, "'" + line + "' is not a line");
      for (const auto* end : {&ends.source, &ends.sink}) {
        auto ek = kind_of(*end);
        if (!ek) throw Error(ErrorKind::Reference, "line " + line + " references unknown bus '" + *end + "'");
        if (!is_bus(*ek)) throw Error(ErrorKind::Invalid, "line " + line + " endpoint '" + *end + "' is not a bus");
      }
      if (ends.source == ends.sink) throw Error(ErrorKind::Invalid, "line " + line + " is a self loop");
    }
    for (const auto& e : entities_)
      if (e.kind == EntityKind::Line && !lines_.count(e.id))
        throw Error(ErrorKind::Invalid, "line " + e.id + " has no endpoints");
    for (std::size_t i = 0; i < idrs_.size(); ++i) {
      const auto& idr = idrs_[i];
      if (i > 0 && idrs_[i - 1].target == idr.target)
        throw Error(ErrorKind::Invalid, "two IDRs for " + idr.target);
      auto k = kind_of(idr.target);
      if (!k) throw Error(ErrorKind::Reference, "IDR target '" + idr.target + "' is not an entity");
      if (!is_bus(*k)) throw Error(ErrorKind::Invalid, "IDR target " + idr.target + " is a line");
      if (idr.minterms.empty()) throw Error(ErrorKind::Invalid, "IDR of " + idr.target + " has no minterms");
      for (const auto& m : idr.minterms) {
        if (m.empty()) throw Error(ErrorKind::Invalid, "empty minterm in IDR of " + idr.target);
        for (const auto& member : m)
          if (!kind_of(member))
            throw Error(ErrorKind::Reference,
                        "IDR of " + idr.target + " references unknown entity '" + member + "'");
      }
    }
  }

  void index() {
    const std::size_t n = entities_.size();
    lookup_.clear();
    topo_ = Topology{};
    topo_.ids.resize(n);
    topo_.kinds.resize(n);
    topo_.minterms.assign(n, {});
    topo_.line_source.assign(n, -1);
    topo_.line_sink.assign(n, -1);
    topo_.out_lines.assign(n, {});
    topo_.in_lines.assign(n, {});
    topo_.dependents.assign(n, {});
    for (std::size_t i = 0; i < n; ++i) {
      lookup_.emplace(entities_[i].id, static_cast<int>(i));
      topo_.ids[i] = entities_[i].id;
      topo_.kinds[i] = entities_[i].kind;
    }
    for (const auto& [line, ends] : lines_) {
      int l = lookup_.at(line), s = lookup_.at(ends.source), t = lookup_.at(ends.sink);
      topo_.line_source[l] = s;
      topo_.line_sink[l] = t;
      topo_.out_lines[s].push_back(l);
      topo_.in_lines[t].push_back(l);
    }
    for (const auto& idr : idrs_) {
      int target = lookup_.at(idr.target);
      for (const auto& m : idr.minterms) {
        std::vector<int> members;
        for (const auto& id : m) members.push_back(lookup_.at(id));
        std::sort(members.begin(), members.end());
        members.erase(std::unique(members.begin(), members.end()), members.end());
        for (int member : members) topo_.dependents[member].push_back(target);
        topo_.minterms[target].push_back(std::move(members));
      }
    }
    for (auto& deps : topo_.dependents) {
      std::sort(deps.begin(), deps.end());
      deps.erase(std::unique(deps.begin(), deps.end()), deps.end());
    }
  }

  // Kahn's algorithm over member -> target edges.
  void check_acyclic() const {
    const std::size_t n = topo_.size();
    std::vector<int> indegree(n, 0);
    for (std::size_t v = 0; v < n; ++v)
      for (int t : topo_.dependents[v]) ++indegree[t];
    std::vector<int> ready;
    for (std::size_t v = 0; v < n; ++v)
      if (indegree[v] == 0) ready.push_back(static_cast<int>(v));
    std::size_t seen = 0;
    while (!ready.empty()) {
      int v = ready.back();
      ready.pop_back();
      ++seen;
      for (int t : topo_.dependents[v])
        if (--indegree[t] == 0) ready.push_back(t);
    }
    if (seen != n) throw Error(ErrorKind::Invalid, "dependency relations contain a cycle");
  }

  std::vector<Entity> entities_;
  std::vector<Idr> idrs_;
  std::map<std::string, LineEnds> lines_;
  std::unordered_map<std::string, int> lookup_;
  Topology topo_;
};

/// Canonical form of an IDR's minterms (each sorted, list sorted) for
/// order-insensitive comparison.
inline std::set<std::set<std::string>> minterm_set(const Idr& idr) {
  std::set<std::set<std::string>> out;
  for (const auto& m : idr.minterms) out.emplace(m.begin(), m.end());
  return out;
}

}  // namespace miir
