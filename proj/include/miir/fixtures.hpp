#pragma once

#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "miir/network.hpp"
#include "miir/network_builder.hpp"

namespace miir::fixtures {

namespace detail {

struct LineSpec {
  const char* id;
  const char* source;
  const char* sink;
  double flow;
  double rating;
};

inline void add_lines(const std::vector<LineSpec>& specs, std::vector<Entity>& entities,
                      std::map<std::string, LineEnds>& lines) {
  for (const auto& s : specs) {
    entities.push_back({s.id, EntityKind::Line, 0.0, s.rating, s.flow});
    lines[s.id] = {s.source, s.sink};
  }
}

inline Entity generator(const char* id, double cap, double out) { return {id, EntityKind::Generator, 0.0, cap, out}; }
inline Entity load(const char* id, double demand) { return {id, EntityKind::Load, demand, demand, demand}; }
inline Entity neutral(const char* id) { return {id, EntityKind::Neutral, 0.0, 0.0, 0.0}; }

}  // namespace detail

/// Nine-bus illustration: three generators, four loads, two neutral buses and
/// nine lines. IDRs come from the flow directions.
inline PowerNetwork fig1() {
  using namespace detail;
  std::vector<Entity> entities = {
      generator("G1", 250, 85), generator("G2", 300, 80), generator("G3", 270, 55),
      load("L1", 50),           load("L2", 60),           load("L3", 40),
      load("L4", 70),           neutral("N1"),            neutral("N2"),
  };
  std::map<std::string, LineEnds> lines;
  add_lines({{"T1", "G1", "L1", 85, 150},
             {"T2", "L1", "L2", 20, 60},
             {"T3", "L1", "L3", 15, 60},
             {"T4", "N1", "L3", 25, 80},
             {"T5", "G3", "N1", 55, 120},
             {"T6", "N1", "L4", 30, 80},
             {"T7", "N2", "L2", 40, 100},
             {"T8", "N2", "L4", 40, 100},
             {"T9", "G2", "N2", 80, 150}},
            entities, lines);
  auto idrs = generate_idrs(lines);
  return PowerNetwork(std::move(entities), std::move(idrs), std::move(lines));
}

/// Southwest system of the September 2011 event. The IDR list is the
/// published dependency table taken as is, including CFE's {T13, MI} minterm.
/// Flows are chosen to balance every bus; T6 runs close to its 2200 MW limit.
inline PowerNetwork southwest() {
  using namespace detail;
  std::vector<Entity> entities = {
      generator("WECC", 10000, 2400), generator("PV", 4000, 3700),
      load("SDG&E", 5000),            load("IID", 900),
      load("CFE", 200),               neutral("SE"),
      neutral("DE"),                  neutral("SONGS"),
      neutral("MI"),                  neutral("IV"),
      neutral("NG"),                  neutral("HA"),
      neutral("WALC"),
  };
  std::map<std::string, LineEnds> lines;
  add_lines({{"T1", "WECC", "SE", 1800, 3000},
             {"T2", "WECC", "DE", 600, 4000},
             {"T3", "PV", "DE", 200, 3500},
             {"T4", "DE", "SE", 300, 3000},
             {"T5", "SE", "SONGS", 2100, 3000},
             {"T6", "SONGS", "SDG&E", 2100, 2200},
             {"T7", "MI", "SDG&E", 2900, 5000},
             {"T8", "DE", "IID", 500, 1800},
             {"T9", "IV", "IID", 200, 1000},
             {"T10", "PV", "HA", 3500, 4000},
             {"T11", "HA", "NG", 3500, 4000},
             {"T12", "IV", "MI", 2900, 5000},
             {"T13", "NG", "IV", 3300, 4000},
             {"T14", "IV", "CFE", 200, 500},
             {"T15", "WALC", "IID", 200, 1000},
             {"T16", "NG", "WALC", 200, 500}},
            entities, lines);
  std::vector<Idr> idrs = {
      {"SE", {{"T1", "WECC"}, {"T4", "DE"}}},
      {"DE", {{"T3", "PV"}, {"T2", "WECC"}}},
      {"SONGS", {{"T5", "SE"}}},
      {"SDG&E", {{"T6", "SONGS"}, {"T7", "MI"}}},
      {"IID", {{"T8", "DE"}, {"T15", "WALC"}, {"T9", "IV"}}},
      {"MI", {{"T12", "IV"}}},
      {"IV", {{"T13", "NG"}}},
      {"CFE", {{"T14", "IV"}, {"T13", "MI"}}},
      {"WALC", {{"T16", "NG"}}},
      {"NG", {{"T11", "HA"}}},
      {"HA", {{"T10", "PV"}}},
  };
  return PowerNetwork(std::move(entities), std::move(idrs), std::move(lines));
}

}  // namespace miir::fixtures
