#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "agentsafe/core.hpp"
#include "agentsafe/error.hpp"
#include "json.hpp"

namespace agentsafe {

/// Parse a dataset from its canonical JSON form:
///
///   {"schema": "RIOH"|"WCEI",
///    "levels": {"<category>": int, ...},
///    "agents": [{"name": str, "info": {"<category>": [str, ...]}}, ...],
///    "relations": [[str, str, "<category>"], ...]}
///
/// Categories must match the schema's enumeration exactly. The level map must
/// cover every category with distinct levels in [1, L].
inline Dataset parse_dataset(const std::string& json_text, SchemaKind schema) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    // nlohmann reports a byte offset; convert to a 1-based line number.
    int line = 1;
    for (std::size_t i = 0; i < e.byte && i < json_text.size(); ++i) {
      if (json_text[i] == '\n') ++line;
    }
    throw ParseError(std::string("dataset JSON: ") + e.what(), line);
  }

  if (!j.is_object()) throw SchemaError("dataset root must be an object");
  if (!j.contains("schema") || !j["schema"].is_string()) {
    throw SchemaError("missing string field \"schema\"");
  }
  SchemaKind declared = schema_from_name(j["schema"].get<std::string>());
  if (declared != schema) {
    throw SchemaError(std::string("dataset declares schema ") +
                      schema_name(declared) + " but " + schema_name(schema) +
                      " was requested");
  }

  Dataset d;
  d.schema = schema;

  const auto& kinds = schema_kinds(schema);
  if (!j.contains("levels") || !j["levels"].is_object()) {
    throw SchemaError("missing object field \"levels\"");
  }
  const int level_count = static_cast<int>(kinds.size());
  std::set<int> seen_levels;
  for (const auto& [cat, lv] : j["levels"].items()) {
    RelationshipKind k = kind_from_name(schema, cat);
    if (!lv.is_number_integer()) {
      throw SchemaError("level for \"" + cat + "\" must be an integer");
    }
    int v = lv.get<int>();
    if (v < 1 || v > level_count) {
      throw SchemaError("level for \"" + cat + "\" out of range [1, " +
                        std::to_string(level_count) + "]");
    }
    if (!seen_levels.insert(v).second) {
      throw SchemaError("duplicate level " + std::to_string(v) + " in level map");
    }
    d.level_map[k] = SecurityLevel{v};
  }
  for (RelationshipKind k : kinds) {
    if (d.level_map.find(k) == d.level_map.end()) {
      throw SchemaError(std::string("level map missing category ") + kind_name(k));
    }
  }

  if (!j.contains("agents") || !j["agents"].is_array()) {
    throw SchemaError("missing array field \"agents\"");
  }
  if (j["agents"].empty()) {
    throw SchemaError("dataset must declare at least one agent");
  }
  std::set<std::string> names;
  for (const auto& ja : j["agents"]) {
    if (!ja.is_object() || !ja.contains("name") || !ja["name"].is_string()) {
      throw SchemaError("each agent needs a string \"name\"");
    }
    DatasetAgent agent;
    agent.name = ja["name"].get<std::string>();
    if (!names.insert(agent.name).second) {
      throw SchemaError("duplicate agent name \"" + agent.name + "\"");
    }
    if (!ja.contains("info") || !ja["info"].is_object()) {
      throw SchemaError("agent \"" + agent.name + "\" needs an \"info\" object");
    }
    for (const auto& [cat, facts] : ja["info"].items()) {
      RelationshipKind k = kind_from_name(schema, cat);
      if (!facts.is_array()) {
        throw SchemaError("info." + cat + " of \"" + agent.name +
                          "\" must be an array");
      }
      for (const auto& f : facts) {
        if (!f.is_string()) {
          throw SchemaError("facts of \"" + agent.name + "\" must be strings");
        }
        agent.facts[k].push_back(f.get<std::string>());
      }
    }
    for (RelationshipKind k : kinds) {
      if (agent.facts_for(k).empty()) {
        throw SchemaError("agent \"" + agent.name + "\" has no " +
                          std::string(kind_name(k)) + " facts; every level needs one");
      }
    }
    d.agents.push_back(std::move(agent));
  }

  if (!j.contains("relations") || !j["relations"].is_array()) {
    throw SchemaError("missing array field \"relations\"");
  }
  std::map<std::pair<std::string, std::string>, RelationshipKind> declared_pairs;
  for (const auto& jr : j["relations"]) {
    if (!jr.is_array() || jr.size() != 3 || !jr[0].is_string() ||
        !jr[1].is_string() || !jr[2].is_string()) {
      throw SchemaError("each relation must be [nameA, nameB, category]");
    }
    DatasetRelation rel;
    rel.a = jr[0].get<std::string>();
    rel.b = jr[1].get<std::string>();
    rel.kind = kind_from_name(schema, jr[2].get<std::string>());
    if (rel.a == rel.b) {
      throw SchemaError("self-relation on \"" + rel.a + "\"");
    }
    for (const auto& name : {rel.a, rel.b}) {
      if (names.find(name) == names.end()) {
        throw SchemaError("relation endpoint \"" + name + "\" is not a declared agent");
      }
    }
    auto key = std::make_pair(rel.a, rel.b);
    if (declared_pairs.count(key)) {
      throw SchemaError("duplicate relation for (" + rel.a + ", " + rel.b + ")");
    }
    declared_pairs[key] = rel.kind;
    d.relations.push_back(std::move(rel));
  }
  // Both directions declared with different kinds: legal, but flagged.
  for (const auto& [pair, kind] : declared_pairs) {
    auto rev = declared_pairs.find({pair.second, pair.first});
    if (rev != declared_pairs.end() && rev->second != kind && pair.first < pair.second) {
      d.warnings.push_back("asymmetric relation between \"" + pair.first + "\" and \"" +
                           pair.second + "\": " + kind_name(kind) + " vs " +
                           kind_name(rev->second));
    }
  }
  return d;
}

inline Dataset load_dataset(const std::string& path, SchemaKind schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ParseError("cannot open dataset file: " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str(), schema);
}

/// Canonical serialization: sorted object keys, declaration order preserved
/// for agents / facts / relations, 2-space indentation, trailing newline.
/// load -> serialize -> load is a fixed point.
inline std::string to_canonical_json(const Dataset& d) {
  nlohmann::json j;
  j["schema"] = schema_name(d.schema);
  nlohmann::json levels = nlohmann::json::object();
  for (const auto& [k, lv] : d.level_map) {
    levels[kind_name(k)] = lv.value;
  }
  j["levels"] = levels;
  nlohmann::json agents = nlohmann::json::array();
  for (const auto& a : d.agents) {
    nlohmann::json info = nlohmann::json::object();
    for (const auto& [k, facts] : a.facts) {
      info[kind_name(k)] = facts;
    }
    agents.push_back({{"name", a.name}, {"info", info}});
  }
  j["agents"] = agents;
  nlohmann::json relations = nlohmann::json::array();
  for (const auto& r : d.relations) {
    relations.push_back({r.a, r.b, kind_name(r.kind)});
  }
  j["relations"] = relations;
  return j.dump(2) + "\n";
}

}  // namespace agentsafe
