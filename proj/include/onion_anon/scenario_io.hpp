#pragma once

// JSON scenario and observation files, and CSV output.
//
// Scenario:
//   {"b": 0.3,
//    "destinations": ["a", "b", "c"],
//    "users": [{"name": "alice", "dist": [0.5, 0.25, 0.25]},
//              {"name": "bob", "dist": "zipf:1.0"}]}
//
// Observation (users and destinations by name or index):
//   {"linked": [["alice", "a"]], "input_only": ["bob"],
//    "output_only": ["c", "c"], "hidden_count": 1}

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "onion_anon/distributions.hpp"
#include "onion_anon/error.hpp"
#include "onion_anon/model.hpp"

namespace onion_anon {

struct NamedScenario {
  Scenario scenario;
  std::vector<std::string> user_names;
  std::vector<std::string> dest_names;

  std::optional<UserId> find_user(const std::string& name) const {
    for (UserId u = 0; u < user_names.size(); ++u) {
      if (user_names[u] == name) return u;
    }
    return std::nullopt;
  }
  std::optional<DestId> find_dest(const std::string& name) const {
    for (DestId d = 0; d < dest_names.size(); ++d) {
      if (dest_names[d] == name) return d;
    }
    return std::nullopt;
  }
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error while reading '" + path + "'");
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << contents;
  out.flush();
  if (!out) throw IoError("error while writing '" + path + "'");
}

namespace detail {

using nlohmann::json;

inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(what + ": " + e.what());
  }
}

inline const json& field(const json& obj, const char* name, const std::string& what) {
  if (!obj.is_object() || !obj.contains(name)) {
    throw ParseError(what + ": missing field '" + name + "'");
  }
  return obj.at(name);
}

inline double as_number(const json& j, const std::string& what) {
  if (!j.is_number()) throw ParseError(what + ": expected a number");
  return j.get<double>();
}

}  // namespace detail

inline NamedScenario parse_scenario(const std::string& text) {
  using detail::json;
  const json doc = detail::parse_json(text, "scenario");
  const double b = detail::as_number(detail::field(doc, "b", "scenario"), "scenario field 'b'");
  const json& dests = detail::field(doc, "destinations", "scenario");
  const json& users = detail::field(doc, "users", "scenario");
  if (!dests.is_array()) throw ParseError("scenario: 'destinations' must be an array");
  if (!users.is_array()) throw ParseError("scenario: 'users' must be an array");

  std::vector<std::string> dest_names;
  std::vector<std::string> user_names;
  for (const auto& d : dests) {
    if (!d.is_string()) throw ParseError("scenario: destination names must be strings");
    dest_names.push_back(d.get<std::string>());
  }
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < users.size(); ++i) {
    const json& user = users[i];
    const std::string where = "scenario user " + std::to_string(i);
    const json& name = detail::field(user, "name", where);
    if (!name.is_string()) throw ParseError(where + ": 'name' must be a string");
    user_names.push_back(name.get<std::string>());
    const json& dist = detail::field(user, "dist", where);
    if (dist.is_string()) {
      try {
        rows.push_back(make_distribution(
            parse_distribution_spec(dist.get<std::string>(), dest_names.size())));
      } catch (const ModelError& e) {
        throw ModelError("user '" + user_names.back() + "' (row " + std::to_string(i) +
                         "): " + e.what());
      }
    } else if (dist.is_array()) {
      std::vector<double> row;
      for (const auto& x : dist) row.push_back(detail::as_number(x, where + " 'dist'"));
      rows.push_back(std::move(row));
    } else {
      throw ParseError(where + ": 'dist' must be an array or a distribution string");
    }
    if (rows.back().size() != dest_names.size()) {
      throw ModelError("user '" + user_names.back() + "' (row " + std::to_string(i) +
                       "): expected " + std::to_string(dest_names.size()) +
                       " probabilities, got " + std::to_string(rows.back().size()));
    }
  }
  Scenario scenario = validate_scenario(b, std::move(rows), user_names);
  return NamedScenario{std::move(scenario), std::move(user_names), std::move(dest_names)};
}

inline NamedScenario load_scenario(const std::string& path) {
  return parse_scenario(read_file(path));
}

inline std::string write_scenario(const NamedScenario& named) {
  using detail::json;
  json doc;
  doc["b"] = named.scenario.b();
  doc["destinations"] = named.dest_names;
  json users = json::array();
  for (UserId u = 0; u < named.scenario.users(); ++u) {
    users.push_back({{"name", named.user_names.at(u)}, {"dist", named.scenario.row(u)}});
  }
  doc["users"] = std::move(users);
  return doc.dump(2) + "\n";
}

// Names with generated labels u0.., d0.. for a bare scenario.
inline NamedScenario with_default_names(const Scenario& s) {
  NamedScenario named{s, {}, {}};
  for (std::size_t u = 0; u < s.users(); ++u) named.user_names.push_back("u" + std::to_string(u));
  for (std::size_t d = 0; d < s.dest_count(); ++d) {
    named.dest_names.push_back("d" + std::to_string(d));
  }
  return named;
}

// Resolves a user given by name, or by index when no user has that name.
inline UserId resolve_user(const NamedScenario& named, const std::string& token) {
  if (auto u = named.find_user(token)) return *u;
  try {
    std::size_t used = 0;
    const auto v = std::stoul(token, &used);
    if (used == token.size() && v < named.scenario.users()) return static_cast<UserId>(v);
  } catch (const std::exception&) {
  }
  throw ParseError("unknown user '" + token + "'");
}

inline DestId resolve_dest(const NamedScenario& named, const std::string& token) {
  if (auto d = named.find_dest(token)) return *d;
  try {
    std::size_t used = 0;
    const auto v = std::stoul(token, &used);
    if (used == token.size() && v < named.scenario.dest_count()) return static_cast<DestId>(v);
  } catch (const std::exception&) {
  }
  throw ParseError("unknown destination '" + token + "'");
}

inline Observation parse_observation(const std::string& text, const NamedScenario& named) {
  using detail::json;
  const json doc = detail::parse_json(text, "observation");
  auto token = [](const json& j, const char* what) -> std::string {
    if (j.is_string()) return j.get<std::string>();
    if (j.is_number_unsigned()) return std::to_string(j.get<std::uint64_t>());
    throw ParseError(std::string("observation: ") + what + " must be a name or an index");
  };
  Observation o;
  o.output_only = DestMultiset(named.scenario.dest_count());
  if (doc.contains("linked")) {
    for (const auto& pair : doc.at("linked")) {
      if (!pair.is_array() || pair.size() != 2) {
        throw ParseError("observation: each linked entry must be [user, destination]");
      }
      o.linked.emplace_back(resolve_user(named, token(pair[0], "linked user")),
                            resolve_dest(named, token(pair[1], "linked destination")));
    }
  }
  if (doc.contains("input_only")) {
    for (const auto& u : doc.at("input_only")) {
      o.input_only.push_back(resolve_user(named, token(u, "input_only entry")));
    }
  }
  if (doc.contains("output_only")) {
    for (const auto& d : doc.at("output_only")) {
      o.output_only.add(resolve_dest(named, token(d, "output_only entry")));
    }
  }
  const json& hidden = detail::field(doc, "hidden_count", "observation");
  if (!hidden.is_number_unsigned()) {
    throw ParseError("observation: 'hidden_count' must be a non-negative integer");
  }
  o.hidden_count = hidden.get<std::size_t>();
  std::sort(o.linked.begin(), o.linked.end());
  std::sort(o.input_only.begin(), o.input_only.end());
  check_observation(named.scenario, o);
  return o;
}

inline Observation load_observation(const std::string& path, const NamedScenario& named) {
  return parse_observation(read_file(path), named);
}

// 12 significant digits, '.' decimal separator regardless of locale.
inline std::string format_number(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  std::string s(buf);
  for (char& c : s) {
    if (c == ',') c = '.';
  }
  return s;
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::vector<std::string>& header) { row_strings(header); }

  void row(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_number(v));
    row_strings(cells);
  }

  void row_strings(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) text_ += ',';
      text_ += cells[i];
    }
    text_ += '\n';
  }

  const std::string& str() const { return text_; }

 private:
  std::string text_;
};

}  // namespace onion_anon
