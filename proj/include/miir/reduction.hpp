#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "miir/cascade.hpp"
#include "miir/error.hpp"
#include "miir/network.hpp"
#include "miir/network_builder.hpp"

namespace miir {

/// Vertices are kept sorted and unique; edges keep their input order and
/// their members are sorted.
struct Hypergraph {
  std::vector<std::string> vertices;
  std::vector<std::vector<std::string>> edges;

  Hypergraph() = default;
  Hypergraph(std::vector<std::string> vs, std::vector<std::vector<std::string>> es)
      : vertices(std::move(vs)), edges(std::move(es)) {
    std::sort(vertices.begin(), vertices.end());
    if (std::adjacent_find(vertices.begin(), vertices.end()) != vertices.end())
      throw Error(ErrorKind::Invalid, "duplicate hypergraph vertex");
    for (auto& e : edges) {
      if (e.empty()) throw Error(ErrorKind::Invalid, "empty hyperedge");
      std::sort(e.begin(), e.end());
      if (std::adjacent_find(e.begin(), e.end()) != e.end())
        throw Error(ErrorKind::Invalid, "vertex repeated inside a hyperedge");
      for (const auto& v : e)
        if (!std::binary_search(vertices.begin(), vertices.end(), v))
          throw Error(ErrorKind::Reference, "hyperedge names unknown vertex " + v);
    }
  }

  /// Vertex set taken from the edges.
  static Hypergraph from_edges(std::vector<std::vector<std::string>> es) {
    std::set<std::string> vs;
    for (const auto& e : es) vs.insert(e.begin(), e.end());
    return Hypergraph({vs.begin(), vs.end()}, std::move(es));
  }

  bool covers(const std::vector<std::string>& chosen, std::size_t edge) const {
    for (const auto& v : edges[edge])
      if (!std::binary_search(chosen.begin(), chosen.end(), v)) return false;
    return true;
  }

  int covered_edges(std::vector<std::string> chosen) const {
    std::sort(chosen.begin(), chosen.end());
    int n = 0;
    for (std::size_t j = 0; j < edges.size(); ++j) n += covers(chosen, j) ? 1 : 0;
    return n;
  }
};

/// One edge per line, members separated by whitespace. Blank lines and lines
/// starting with '#' are skipped.
inline Hypergraph parse_hypergraph(std::string_view text) {
  std::vector<std::vector<std::string>> edges;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    auto start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos || line[start] == '#') continue;
    std::istringstream ls(line);
    std::vector<std::string> e;
    for (std::string v; ls >> v;) e.push_back(v);
    edges.push_back(std::move(e));
  }
  return Hypergraph::from_edges(std::move(edges));
}

inline std::string write_hypergraph(const Hypergraph& h) {
  std::string out;
  for (const auto& e : h.edges) {
    for (std::size_t i = 0; i < e.size(); ++i) {
      if (i) out += ' ';
      out += e[i];
    }
    out += '\n';
  }
  return out;
}

enum class GeneratorBound {
  PerEdge,  // sum over incident edges of (demand + 1)
  Summed,   // (sum of incident demands) + 1
};

struct KcolInstance {
  PowerNetwork network;
  int k = 0;
  // The decision threshold for a coverage target M.
  int threshold(int m) const { return k + m; }
};

inline std::string reduction_generator_id(const std::string& v) { return "G_" + v; }
inline std::string reduction_load_id(std::size_t edge) { return "L_" + std::to_string(edge + 1); }
inline std::string reduction_line_id(const std::string& v, std::size_t edge) {
  return "T_" + v + "_" + std::to_string(edge + 1);
}

/// KCoL instance for the densest p-subhypergraph question on `h`: a generator
/// per vertex, a load per edge with demand |edge|, and a unit-flow line from
/// each member's generator into the edge's load.
inline KcolInstance build_kcol_from_hypergraph(const Hypergraph& h, int p,
                                               GeneratorBound rule = GeneratorBound::PerEdge) {
  if (p < 1 || p > static_cast<int>(h.vertices.size()))
    throw Error(ErrorKind::Range, "p must lie in [1, |V|]");
  std::map<std::string, double> output, bound;
  for (const auto& v : h.vertices) output[v] = bound[v] = 0.0;
  std::vector<Entity> entities;
  std::map<std::string, LineEnds> lines;
  for (std::size_t j = 0; j < h.edges.size(); ++j) {
    const double demand = static_cast<double>(h.edges[j].size());
    entities.push_back({reduction_load_id(j), EntityKind::Load, demand, demand, demand});
    for (const auto& v : h.edges[j]) {
      auto id = reduction_line_id(v, j);
      entities.push_back({id, EntityKind::Line, 0.0, demand + 1.0, 1.0});
      lines.emplace(id, LineEnds{reduction_generator_id(v), reduction_load_id(j)});
      output[v] += 1.0;
      bound[v] += rule == GeneratorBound::PerEdge ? demand + 1.0 : demand;
    }
  }
  for (const auto& v : h.vertices) {
    double cap = rule == GeneratorBound::PerEdge ? bound[v] : bound[v] + 1.0;
    entities.push_back({reduction_generator_id(v), EntityKind::Generator, 0.0, cap, output[v]});
  }
  auto idrs = generate_idrs(lines);
  return {PowerNetwork(std::move(entities), std::move(idrs), std::move(lines)), p};
}

struct DensestResult {
  std::vector<std::string> vertices;
  int covered = 0;
};

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return std::round(r);
}

/// Exhaustive search over p-subsets of vertices in lexicographic order; the
/// first maximum wins.
inline DensestResult brute_force_densest_subhypergraph(const Hypergraph& h, int p, double budget = 1e6) {
  const int n = static_cast<int>(h.vertices.size());
  if (p < 0 || p > n) throw Error(ErrorKind::Range, "p must lie in [0, |V|]");
  if (binomial(n, p) > budget) throw Error(ErrorKind::Budget, "enumeration budget exceeded");
  DensestResult best;
  best.covered = -1;
  std::vector<int> pick(p);
  for (int i = 0; i < p; ++i) pick[i] = i;
  std::vector<std::string> chosen(p);
  while (true) {
    for (int i = 0; i < p; ++i) chosen[i] = h.vertices[pick[i]];
    int c = h.covered_edges(chosen);
    if (c > best.covered) best = {chosen, c};
    int i = p - 1;
    while (i >= 0 && pick[i] == n - p + i) --i;
    if (i < 0) break;
    ++pick[i];
    for (int j = i + 1; j < p; ++j) pick[j] = pick[j - 1] + 1;
  }
  return best;
}

/// Calls `visit` once per isomorphism class of hypergraphs with at most
/// `max_vertices` (<= 6) non-isolated vertices and 1..`max_edges` distinct
/// edges. Vertices are named v1, v2, ... by position.
inline void enumerate_hypergraphs(int max_vertices, int max_edges,
                                  const std::function<void(const Hypergraph&)>& visit) {
  if (max_vertices < 1 || max_vertices > 6) throw Error(ErrorKind::Range, "max_vertices must lie in [1, 6]");
  if (max_edges < 1) throw Error(ErrorKind::Range, "max_edges must be positive");
  const int n = max_vertices;
  const int masks = 1 << n;
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  // image[p * masks + e]: edge bitmask e relabelled by permutation p
  std::vector<std::uint8_t> image;
  do {
    for (int e = 0; e < masks; ++e) {
      int r = 0;
      for (int i = 0; i < n; ++i)
        if (e >> i & 1) r |= 1 << perm[i];
      image.push_back(static_cast<std::uint8_t>(r));
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  const std::size_t perms = image.size() / masks;

  using Form = std::vector<std::uint8_t>;
  struct FormHash {
    std::size_t operator()(const Form& f) const {
      std::size_t h = 0;
      for (auto c : f) h = h * 131 + c;
      return h;
    }
  };
  auto canonical = [&](const Form& f) {
    Form best, g(f.size());
    for (std::size_t p = 0; p < perms; ++p) {
      const std::uint8_t* map = &image[p * masks];
      for (std::size_t i = 0; i < f.size(); ++i) g[i] = map[f[i]];
      std::sort(g.begin(), g.end());
      if (best.empty() || g < best) best = g;
    }
    return best;
  };
  auto to_hypergraph = [&](const Form& f) {
    std::vector<std::vector<std::string>> edges;
    for (auto e : f) {
      std::vector<std::string> edge;
      for (int i = 0; i < n; ++i)
        if (e >> i & 1) edge.push_back("v" + std::to_string(i + 1));
      edges.push_back(std::move(edge));
    }
    return Hypergraph::from_edges(std::move(edges));
  };

  std::vector<Form> level{Form{}};
  for (int k = 1; k <= max_edges && !level.empty(); ++k) {
    std::unordered_set<Form, FormHash> next;
    for (const auto& f : level)
      for (int e = 1; e < masks; ++e) {
        if (std::find(f.begin(), f.end(), e) != f.end()) continue;
        Form g = f;
        g.push_back(static_cast<std::uint8_t>(e));
        next.insert(canonical(g));
      }
    level.assign(next.begin(), next.end());
    std::sort(level.begin(), level.end());
    for (const auto& f : level) visit(to_hypergraph(f));
  }
}

struct ReductionCheck {
  int best_coverage = 0;          // M* for the given p
  int forward_dead = 0;           // dead count after failing the best vertices' generators
  bool forward_holds = false;     // forward_dead >= p + M*
  int max_induced_loads = 0;      // over every initial p-set of entities
  bool backward_holds = false;    // max_induced_loads <= M*
  std::set<std::string> forward_set;
};

/// Both directions of the densest-subhypergraph reduction on one instance.
/// Backward: for every initial p-set, each load killed through its IDR has
/// all of its members hit by a generator or line in the set, so substituting
/// those generators covers it; the induced load kills never exceed M*.
inline ReductionCheck check_reduction(const Hypergraph& h, int p, const KcolInstance& inst) {
  ReductionCheck out;
  auto best = brute_force_densest_subhypergraph(h, p);
  out.best_coverage = best.covered;
  for (const auto& v : best.vertices) out.forward_set.insert(reduction_generator_id(v));
  const auto& net = inst.network;
  const auto& topo = net.topology();
  out.forward_dead = static_cast<int>(propagate_idr_cascade(net, out.forward_set).final_failed.size());
  out.forward_holds = out.forward_dead >= p + best.covered;

  const int n = static_cast<int>(topo.size());
  std::vector<int> pick(p);
  for (int i = 0; i < p; ++i) pick[i] = i;
  while (p <= n) {
    auto prop = propagate(topo, pick);
    int induced = 0;
    for (int e = 0; e < n; ++e)
      if (topo.kinds[e] == EntityKind::Load && prop.failed_at[e] > 0) ++induced;
    out.max_induced_loads = std::max(out.max_induced_loads, induced);
    int i = p - 1;
    while (i >= 0 && pick[i] == n - p + i) --i;
    if (i < 0) break;
    ++pick[i];
    for (int j = i + 1; j < p; ++j) pick[j] = pick[j - 1] + 1;
  }
  out.backward_holds = out.max_induced_loads <= best.covered;
  return out;
}

}  // namespace miir
