#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "miir/error.hpp"
#include "miir/network.hpp"

namespace miir {

enum class BusType { PQ, PV, REF };

inline std::string_view to_string(BusType t) {
  switch (t) {
    case BusType::PQ: return "PQ";
    case BusType::PV: return "PV";
    case BusType::REF: return "REF";
  }
  return "?";
}

struct CaseBus {
  int id = 0;
  BusType type = BusType::PQ;
  double p_demand = 0.0;  // MW
  std::vector<double> extra;  // unconsumed columns, kept verbatim
};

struct CaseGenerator {
  int bus = 0;
  double p_gen = 0.0;  // MW
  double p_max = 0.0;  // MW
  std::vector<double> extra;
};

struct CaseBranch {
  int from = 0;
  int to = 0;
  double r = 0.0;  // p.u.
  double x = 0.0;  // p.u.
  double rate_a = 0.0;  // MW; 0 means unlimited in MATPOWER
  std::vector<double> extra;
};

struct RawCase {
  double base_mva = 100.0;
  std::vector<CaseBus> buses;
  std::vector<CaseGenerator> generators;
  std::vector<CaseBranch> branches;

  const CaseBus* find_bus(int id) const {
    for (const auto& b : buses)
      if (b.id == id) return &b;
    return nullptr;
  }
};

/// Solved operating point. Branch keys are 1-based row numbers of mpc.branch.
struct Snapshot {
  std::string time_label;
  std::optional<std::map<int, std::complex<double>>> voltages;  // p.u.
  std::optional<std::map<int, double>> line_flows;  // MW, positive = from -> to
  std::map<int, double> gen_outputs;  // MW
};

// ---------------------------------------------------------------------------
// MATPOWER case grammar subset

namespace detail {

class CaseScanner {
 public:
  explicit CaseScanner(std::string_view text) : text_(text) {}

  [[noreturn]] void fail(const std::string& msg) const { fail_at(line_, col_, msg); }
  [[noreturn]] static void fail_at(int line, int col, const std::string& msg) {
    throw Error(ErrorKind::Syntax,
                "line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + msg);
  }

  bool eof() const { return pos_ >= text_.size(); }
  char peek() const { return eof() ? '\0' : text_[pos_]; }
  int line() const { return line_; }
  int col() const { return col_; }

  void advance() {
    if (eof()) return;
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  // Skips blanks and comments; newlines are skipped only if `newlines`.
  void skip(bool newlines) {
    while (!eof()) {
      char c = peek();
      if (c == '%' || c == '#') {
        while (!eof() && peek() != '\n') advance();
      } else if (c == '.' && text_.substr(pos_, 3) == "...") {
        // MATLAB line continuation
        while (!eof() && peek() != '\n') advance();
        advance();
      } else if (c == ' ' || c == '\t' || c == '\r' || (newlines && c == '\n')) {
        advance();
      } else {
        break;
      }
    }
  }

  std::string identifier() {
    std::string out;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_')) {
      out.push_back(peek());
      advance();
    }
    return out;
  }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    advance();
  }

  void skip_to_line_end() {
    while (!eof() && peek() != '\n') advance();
  }

  double number() {
    std::size_t start = pos_;
    if (peek() == '+' || peek() == '-') advance();
    std::size_t body = pos_;
    while (!eof() && std::isalpha(static_cast<unsigned char>(peek()))) advance();
    std::string_view word = text_.substr(body, pos_ - body);
    if (!word.empty()) {
      bool neg = text_[start] == '-';
      if (word == "Inf" || word == "inf") return neg ? -std::numeric_limits<double>::infinity()
                                                     : std::numeric_limits<double>::infinity();
      if (word == "NaN" || word == "nan") return std::numeric_limits<double>::quiet_NaN();
      fail("invalid number '" + std::string(text_.substr(start, pos_ - start)) + "'");
    }
    while (!eof()) {
      char c = peek();
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        advance();
      } else if ((c == 'e' || c == 'E')) {
        advance();
        if (peek() == '+' || peek() == '-') advance();
      } else {
        break;
      }
    }
    std::string_view tok = text_.substr(start, pos_ - start);
    std::string_view parse = tok;
    if (!parse.empty() && parse.front() == '+') parse.remove_prefix(1);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(parse.data(), parse.data() + parse.size(), value);
    if (parse.empty() || ec != std::errc() || ptr != parse.data() + parse.size())
      fail("invalid number '" + std::string(tok) + "'");
    return value;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

struct MatrixRow {
  int line = 0;
  std::vector<double> values;
};

inline std::vector<MatrixRow> parse_matrix(CaseScanner& s) {
  s.expect('[');
  std::vector<MatrixRow> rows;
  MatrixRow current;
  auto flush = [&] {
    if (!current.values.empty()) rows.push_back(std::move(current));
    current = MatrixRow{};
  };
  while (true) {
    s.skip(false);
    if (s.eof()) s.fail("unterminated matrix");
    char c = s.peek();
    if (c == ']') {
      s.advance();
      flush();
      return rows;
    }
    if (c == ';' || c == '\n') {
      s.advance();
      flush();
      continue;
    }
    if (c == ',') {
      s.advance();
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.' ||
        std::isalpha(static_cast<unsigned char>(c))) {
      if (current.values.empty()) current.line = s.line();
      current.values.push_back(s.number());
      continue;
    }
    s.fail(std::string("unexpected character '") + c + "' in matrix");
  }
}

// Skips a string literal or a brace-delimited cell array.
inline void skip_opaque(CaseScanner& s) {
  if (s.peek() == '\'' || s.peek() == '"') {
    char q = s.peek();
    s.advance();
    while (!s.eof() && s.peek() != q && s.peek() != '\n') s.advance();
    s.expect(q);
    return;
  }
  s.expect('{');
  int depth = 1;
  while (depth > 0) {
    if (s.eof()) s.fail("unterminated cell array");
    char c = s.peek();
    if (c == '\'' || c == '"') {
      skip_opaque(s);
      continue;
    }
    if (c == '%') {
      s.skip(false);
      continue;
    }
    if (c == '{') ++depth;
    if (c == '}') --depth;
    s.advance();
  }
}

inline int integral_id(const MatrixRow& row, std::size_t col, const char* what) {
  double v = row.values[col];
  if (!std::isfinite(v) || v != std::floor(v) || std::abs(v) > 1e9)
    CaseScanner::fail_at(row.line, 1, std::string(what) + " must be an integer");
  return static_cast<int>(v);
}

inline std::vector<double> tail(const MatrixRow& row, std::size_t used) {
  return {row.values.begin() + static_cast<std::ptrdiff_t>(used), row.values.end()};
}

}  // namespace detail

/// Parses the `mpc.baseMVA`, `mpc.bus`, `mpc.gen` and `mpc.branch`
/// assignments of a MATPOWER case file. Other assignments are skipped.
inline RawCase parse_matpower_case(std::string_view text) {
  using detail::CaseScanner;
  CaseScanner s(text);
  RawCase out;
  bool have_base = false, have_bus = false;
  std::vector<detail::MatrixRow> bus_rows, gen_rows, branch_rows;

  while (true) {
    s.skip(true);
    if (s.eof()) break;
    if (s.peek() == ';') {
      s.advance();
      continue;
    }
    int stmt_line = s.line(), stmt_col = s.col();
    std::string head = s.identifier();
    if (head.empty()) s.fail(std::string("unexpected character '") + s.peek() + "'");
    if (head == "function" || head == "end") {
      s.skip_to_line_end();
      continue;
    }
    if (head != "mpc") CaseScanner::fail_at(stmt_line, stmt_col, "expected an 'mpc.' assignment, found '" + head + "'");
    s.expect('.');
    std::string field = s.identifier();
    if (field.empty()) s.fail("expected field name after 'mpc.'");
    s.skip(false);
    s.expect('=');
    s.skip(false);
    char c = s.peek();
    if (c == '[') {
      auto rows = detail::parse_matrix(s);
      if (field == "bus") {
        bus_rows = std::move(rows);
        have_bus = true;
      } else if (field == "gen") {
        gen_rows = std::move(rows);
      } else if (field == "branch") {
        branch_rows = std::move(rows);
      } else if (field == "baseMVA") {
        if (rows.size() != 1 || rows[0].values.size() != 1)
          CaseScanner::fail_at(stmt_line, stmt_col, "baseMVA must be a scalar");
        out.base_mva = rows[0].values[0];
        have_base = true;
      }
    } else if (c == '\'' || c == '"' || c == '{') {
      detail::skip_opaque(s);
    } else {
      double v = s.number();
      if (field == "baseMVA") {
        out.base_mva = v;
        have_base = true;
      } else if (field == "bus" || field == "gen" || field == "branch") {
        CaseScanner::fail_at(stmt_line, stmt_col, "mpc." + field + " must be a matrix");
      }
    }
    s.skip(false);
    if (s.peek() == ';') s.advance();
    s.skip(false);
    if (!s.eof() && s.peek() != '\n') s.fail("unexpected trailing text after assignment");
  }

  if (!have_base) throw Error(ErrorKind::Syntax, "missing mpc.baseMVA");
  if (!have_bus) throw Error(ErrorKind::Syntax, "missing mpc.bus");
  if (!(out.base_mva > 0.0) || !std::isfinite(out.base_mva))
    throw Error(ErrorKind::Invalid, "baseMVA must be positive");

  std::set<int> ids;
  for (const auto& row : bus_rows) {
    if (row.values.size() < 3)
      CaseScanner::fail_at(row.line, 1, "bus row needs at least 3 columns, found " +
                                            std::to_string(row.values.size()));
    CaseBus b;
    b.id = detail::integral_id(row, 0, "bus id");
    int type = detail::integral_id(row, 1, "bus type");
    switch (type) {
      case 1: b.type = BusType::PQ; break;
      case 2: b.type = BusType::PV; break;
      case 3: b.type = BusType::REF; break;
      default:
        CaseScanner::fail_at(row.line, 1, "unsupported bus type " + std::to_string(type));
    }
    b.p_demand = row.values[2];
    b.extra = detail::tail(row, 3);
    if (!ids.insert(b.id).second)
      throw Error(ErrorKind::Invalid, "duplicate bus id " + std::to_string(b.id) + " (line " +
                                          std::to_string(row.line) + ")");
    out.buses.push_back(std::move(b));
  }
  for (const auto& row : gen_rows) {
    if (row.values.size() < 9)
      CaseScanner::fail_at(row.line, 1, "gen row needs at least 9 columns, found " +
                                            std::to_string(row.values.size()));
    CaseGenerator g;
    g.bus = detail::integral_id(row, 0, "generator bus");
    g.p_gen = row.values[1];
    g.p_max = row.values[8];
    for (std::size_t i = 2; i < row.values.size(); ++i)
      if (i != 8) g.extra.push_back(row.values[i]);
    if (!ids.count(g.bus))
      throw Error(ErrorKind::Reference, "generator references unknown bus " + std::to_string(g.bus) +
                                            " (line " + std::to_string(row.line) + ")");
    out.generators.push_back(std::move(g));
  }
  for (const auto& row : branch_rows) {
    if (row.values.size() < 6)
      CaseScanner::fail_at(row.line, 1, "branch row needs at least 6 columns, found " +
                                            std::to_string(row.values.size()));
    CaseBranch br;
    br.from = detail::integral_id(row, 0, "branch from-bus");
    br.to = detail::integral_id(row, 1, "branch to-bus");
    br.r = row.values[2];
    br.x = row.values[3];
    br.rate_a = row.values[5];
    for (std::size_t i = 4; i < row.values.size(); ++i)
      if (i != 5) br.extra.push_back(row.values[i]);
    for (int end : {br.from, br.to})
      if (!ids.count(end))
        throw Error(ErrorKind::Reference, "branch references unknown bus " + std::to_string(end) +
                                              " (line " + std::to_string(row.line) + ")");
    if (br.x == 0.0)
      throw Error(ErrorKind::Invalid, "zero reactance on branch at line " + std::to_string(row.line));
    out.branches.push_back(std::move(br));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Snapshot files

namespace detail {

inline const nlohmann::json& member_array(const nlohmann::json& doc, const char* key) {
  const auto& v = doc.at(key);
  if (!v.is_array()) throw Error(ErrorKind::Syntax, std::string("'") + key + "' must be a list");
  return v;
}

inline double as_number(const nlohmann::json& v, const char* what) {
  if (!v.is_number()) throw Error(ErrorKind::Syntax, std::string(what) + " must be a number");
  return v.get<double>();
}

inline int as_int(const nlohmann::json& v, const char* what) {
  double d = as_number(v, what);
  if (d != std::floor(d) || std::abs(d) > 1e9)
    throw Error(ErrorKind::Syntax, std::string(what) + " must be an integer");
  return static_cast<int>(d);
}

inline nlohmann::json parse_json(std::string_view text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::Syntax, e.what());
  }
}

}  // namespace detail

inline Snapshot load_snapshot(std::string_view text, const RawCase& rc) {
  auto doc = detail::parse_json(text);
  if (!doc.is_object()) throw Error(ErrorKind::Syntax, "snapshot must be an object");
  Snapshot snap;
  if (doc.contains("time_label")) {
    if (!doc["time_label"].is_string()) throw Error(ErrorKind::Syntax, "time_label must be a string");
    snap.time_label = doc["time_label"].get<std::string>();
  }
  auto check_bus = [&](int id) {
    if (!rc.find_bus(id)) throw Error(ErrorKind::Reference, "unknown bus " + std::to_string(id));
  };
  if (doc.contains("voltages")) {
    std::map<int, std::complex<double>> v;
    for (const auto& row : detail::member_array(doc, "voltages")) {
      if (!row.is_array() || row.size() != 3)
        throw Error(ErrorKind::Syntax, "voltage entries are [bus_id, re, im]");
      int id = detail::as_int(row[0], "bus id");
      check_bus(id);
      v[id] = {detail::as_number(row[1], "voltage"), detail::as_number(row[2], "voltage")};
    }
    snap.voltages = std::move(v);
  }
  if (doc.contains("line_flows")) {
    std::map<int, double> f;
    for (const auto& row : detail::member_array(doc, "line_flows")) {
      if (!row.is_array() || row.size() != 2)
        throw Error(ErrorKind::Syntax, "line flow entries are [branch_index, mw]");
      int idx = detail::as_int(row[0], "branch index");
      if (idx < 1 || idx > static_cast<int>(rc.branches.size()))
        throw Error(ErrorKind::Reference, "unknown branch " + std::to_string(idx));
      f[idx] = detail::as_number(row[1], "line flow");
    }
    snap.line_flows = std::move(f);
  }
  if (!snap.voltages && !snap.line_flows)
    throw Error(ErrorKind::Invalid, "snapshot carries neither voltages nor line_flows");
  if (doc.contains("gen_outputs")) {
    for (const auto& row : detail::member_array(doc, "gen_outputs")) {
      if (!row.is_array() || row.size() != 2)
        throw Error(ErrorKind::Syntax, "gen output entries are [bus_id, mw]");
      int id = detail::as_int(row[0], "bus id");
      check_bus(id);
      bool has_gen = false;
      for (const auto& g : rc.generators) has_gen = has_gen || g.bus == id;
      if (!has_gen) throw Error(ErrorKind::Reference, "bus " + std::to_string(id) + " has no generator");
      snap.gen_outputs[id] = detail::as_number(row[1], "gen output");
    }
  }
  return snap;
}

inline std::string write_snapshot(const Snapshot& snap) {
  nlohmann::ordered_json doc;
  doc["time_label"] = snap.time_label;
  if (snap.voltages) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& [id, v] : *snap.voltages) arr.push_back({id, v.real(), v.imag()});
    doc["voltages"] = arr;
  }
  if (snap.line_flows) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& [idx, mw] : *snap.line_flows) arr.push_back({idx, mw});
    doc["line_flows"] = arr;
  }
  auto gens = nlohmann::ordered_json::array();
  for (const auto& [id, mw] : snap.gen_outputs) gens.push_back({id, mw});
  doc["gen_outputs"] = gens;
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Network files

inline double round_significant(double v, int digits = 12) {
  if (v == 0.0 || !std::isfinite(v)) return v;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return std::strtod(buf, nullptr);
}

inline std::string write_network(const PowerNetwork& net) {
  nlohmann::ordered_json doc;
  auto entities = nlohmann::ordered_json::array();
  for (const auto& e : net.entities()) {
    nlohmann::ordered_json j;
    j["id"] = e.id;
    j["kind"] = std::string(to_string(e.kind));
    j["lower_bound"] = round_significant(e.lower_bound);
    j["upper_bound"] = round_significant(e.upper_bound);
    j["value"] = round_significant(e.value);
    entities.push_back(std::move(j));
  }
  doc["entities"] = std::move(entities);
  auto lines = nlohmann::ordered_json::array();
  for (const auto& [id, ends] : net.lines())
    lines.push_back({{"id", id}, {"from_entity", ends.source}, {"to_entity", ends.sink}});
  doc["lines"] = std::move(lines);
  auto idrs = nlohmann::ordered_json::object();
  for (const auto& idr : net.idrs()) idrs[idr.target] = idr.minterms;
  doc["idrs"] = std::move(idrs);
  return doc.dump(2) + "\n";
}

inline PowerNetwork read_network(std::string_view text) {
  auto doc = detail::parse_json(text);
  if (!doc.is_object()) throw Error(ErrorKind::Syntax, "network file must be an object");
  try {
    std::vector<Entity> entities;
    for (const auto& j : detail::member_array(doc, "entities")) {
      Entity e;
      e.id = j.at("id").get<std::string>();
      auto kind = parse_entity_kind(j.at("kind").get<std::string>());
      if (!kind) throw Error(ErrorKind::Syntax, "unknown entity kind for " + e.id);
      e.kind = *kind;
      e.lower_bound = detail::as_number(j.at("lower_bound"), "lower_bound");
      e.upper_bound = detail::as_number(j.at("upper_bound"), "upper_bound");
      e.value = detail::as_number(j.at("value"), "value");
      entities.push_back(std::move(e));
    }
    std::map<std::string, LineEnds> lines;
    for (const auto& j : detail::member_array(doc, "lines")) {
      auto id = j.at("id").get<std::string>();
      LineEnds ends{j.at("from_entity").get<std::string>(), j.at("to_entity").get<std::string>()};
      if (!lines.emplace(id, ends).second) throw Error(ErrorKind::Invalid, "duplicate line " + id);
    }
    std::vector<Idr> idrs;
    const auto& jidrs = doc.at("idrs");
    if (!jidrs.is_object()) throw Error(ErrorKind::Syntax, "'idrs' must be an object");
    for (const auto& [target, minterms] : jidrs.items())
      idrs.push_back({target, minterms.get<std::vector<Minterm>>()});
    return PowerNetwork(std::move(entities), std::move(idrs), std::move(lines));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Syntax, std::string("malformed network file: ") + e.what());
  }
}

inline PowerNetwork roundtrip_network(const PowerNetwork& net) { return read_network(write_network(net)); }

}  // namespace miir
