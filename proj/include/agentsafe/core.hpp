#pragma once

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "agentsafe/error.hpp"
#include "agentsafe/rng.hpp"
#include "agentsafe/text.hpp"

namespace agentsafe {

/// A node in the agent graph. Index is unique within a scenario, name unique
/// within a dataset.
struct AgentId {
  int index = -1;
  std::string name;

  bool operator==(const AgentId& o) const { return index == o.index && name == o.name; }
};

/// Information sensitivity rank. Higher value = more sensitive; an agent with
/// clearance c may access levels <= c.
struct SecurityLevel {
  int value = 1;

  bool operator==(const SecurityLevel& o) const { return value == o.value; }
  bool operator!=(const SecurityLevel& o) const { return value != o.value; }
  bool operator<(const SecurityLevel& o) const { return value < o.value; }
  bool operator<=(const SecurityLevel& o) const { return value <= o.value; }
  bool operator>(const SecurityLevel& o) const { return value > o.value; }
  bool operator>=(const SecurityLevel& o) const { return value >= o.value; }
};

inline constexpr int kDefaultLevelCount = 4;

enum class SchemaKind { RIOH, WCEI };

/// Relationship categories across both bundled schemas. Colleague is shared.
enum class RelationshipKind {
  Family,
  Friend,
  Colleague,
  Stranger,
  Manager,
  CloseColleague,
  ExternalPartner,
};

inline const char* schema_name(SchemaKind s) {
  return s == SchemaKind::RIOH ? "RIOH" : "WCEI";
}

inline SchemaKind schema_from_name(const std::string& s) {
  if (s == "RIOH") return SchemaKind::RIOH;
  if (s == "WCEI") return SchemaKind::WCEI;
  throw SchemaError("unknown schema \"" + s + "\" (expected RIOH or WCEI)");
}

inline const char* kind_name(RelationshipKind k) {
  switch (k) {
    case RelationshipKind::Family: return "Family";
    case RelationshipKind::Friend: return "Friend";
    case RelationshipKind::Colleague: return "Colleague";
    case RelationshipKind::Stranger: return "Stranger";
    case RelationshipKind::Manager: return "Manager";
    case RelationshipKind::CloseColleague: return "CloseColleague";
    case RelationshipKind::ExternalPartner: return "ExternalPartner";
  }
  return "?";
}

/// The categories a schema admits, in descending default sensitivity.
inline const std::vector<RelationshipKind>& schema_kinds(SchemaKind s) {
  static const std::vector<RelationshipKind> rioh = {
      RelationshipKind::Family, RelationshipKind::Friend,
      RelationshipKind::Colleague, RelationshipKind::Stranger};
  static const std::vector<RelationshipKind> wcei = {
      RelationshipKind::Manager, RelationshipKind::CloseColleague,
      RelationshipKind::Colleague, RelationshipKind::ExternalPartner};
  return s == SchemaKind::RIOH ? rioh : wcei;
}

inline RelationshipKind kind_from_name(SchemaKind schema, const std::string& name) {
  for (RelationshipKind k : schema_kinds(schema)) {
    if (name == kind_name(k)) return k;
  }
  throw SchemaError("category \"" + name + "\" is not part of schema " +
                    schema_name(schema));
}

/// Category -> sensitivity level for one scenario.
using LevelMap = std::map<RelationshipKind, SecurityLevel>;

/// Default maps: four categories, level 4 = most sensitive.
inline LevelMap default_level_map(SchemaKind s) {
  LevelMap m;
  const auto& kinds = schema_kinds(s);
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    m[kinds[i]] = SecurityLevel{static_cast<int>(kinds.size() - i)};
  }
  return m;
}

/// Directed agent graph with a relationship kind on every edge pair.
/// Immutable once built; safe to share across concurrent runs.
class Topology {
public:
  using Edge = std::pair<int, int>;

  void add_node(AgentId id) {
    if (id.index != static_cast<int>(nodes_.size())) {
      throw InvalidScenario("node indices must be declared in order");
    }
    nodes_.push_back(std::move(id));
  }

  void add_edge(int from, int to, RelationshipKind kind) {
    if (from == to) {
      throw InvalidScenario("self-edge on node " + std::to_string(from));
    }
    if (!has_node(from) || !has_node(to)) {
      throw InvalidScenario("edge endpoint not declared: (" + std::to_string(from) +
                            ", " + std::to_string(to) + ")");
    }
    edges_.insert({from, to});
    relationships_[{from, to}] = kind;
  }

  /// Relationships may exist without a communication edge (two agents can
  /// know each other without a direct link).
  void declare_relationship(int from, int to, RelationshipKind kind) {
    if (from == to || !has_node(from) || !has_node(to)) {
      throw InvalidScenario("bad relationship pair (" + std::to_string(from) + ", " +
                            std::to_string(to) + ")");
    }
    relationships_[{from, to}] = kind;
  }

  bool has_node(int index) const {
    return index >= 0 && index < static_cast<int>(nodes_.size());
  }
  bool has_edge(int from, int to) const { return edges_.count({from, to}) > 0; }

  const std::vector<AgentId>& nodes() const { return nodes_; }
  const std::set<Edge>& edges() const { return edges_; }
  const std::map<Edge, RelationshipKind>& relationships() const {
    return relationships_;
  }
  std::size_t edge_count() const { return edges_.size(); }

  std::optional<RelationshipKind> relationship(int from, int to) const {
    auto it = relationships_.find({from, to});
    if (it == relationships_.end()) return std::nullopt;
    return it->second;
  }

  const AgentId* find_by_name(const std::string& name) const {
    for (const auto& n : nodes_) {
      if (n.name == name) return &n;
    }
    return nullptr;
  }

private:
  std::vector<AgentId> nodes_;
  std::set<Edge> edges_;
  std::map<Edge, RelationshipKind> relationships_;
};

enum class TopologyKind { Chain, Cycle, BinaryTree, Complete };

inline const char* topology_kind_name(TopologyKind k) {
  switch (k) {
    case TopologyKind::Chain: return "chain";
    case TopologyKind::Cycle: return "cycle";
    case TopologyKind::BinaryTree: return "binary_tree";
    case TopologyKind::Complete: return "complete";
  }
  return "?";
}

inline TopologyKind topology_kind_from_name(const std::string& s) {
  if (s == "chain") return TopologyKind::Chain;
  if (s == "cycle") return TopologyKind::Cycle;
  if (s == "binary_tree") return TopologyKind::BinaryTree;
  if (s == "complete") return TopologyKind::Complete;
  throw InvalidScenario("unknown topology kind \"" + s + "\"");
}

/// How to label generated edges with relationship kinds.
struct RelationshipPolicy {
  enum class Mode { Fixed, SeededRandom };

  Mode mode = Mode::Fixed;
  RelationshipKind fixed = RelationshipKind::Colleague;
  SchemaKind schema = SchemaKind::RIOH;
  std::uint64_t seed = 0;
  /// When true, each base edge also gets its reverse (conversations are
  /// two-way); the reverse pair carries the same kind.
  bool bidirectional = false;
};

/// Build one of the four generator topologies over n agents named
/// "agent_0".."agent_{n-1}". Base edge counts: chain n-1, cycle n,
/// binary tree n-1 (root 0, children 2k+1 / 2k+2), complete n(n-1).
inline Topology build_topology(TopologyKind kind, int n,
                               const RelationshipPolicy& policy = {}) {
  if (n < 2) {
    throw InvalidScenario("topology needs at least 2 agents, got " + std::to_string(n));
  }
  Topology t;
  for (int i = 0; i < n; ++i) {
    t.add_node(AgentId{i, "agent_" + std::to_string(i)});
  }

  Rng rng(policy.seed);
  const auto& kinds = schema_kinds(policy.schema);
  auto kind_for = [&](int a, int b) {
    if (policy.mode == RelationshipPolicy::Mode::Fixed) return policy.fixed;
    // Symmetric assignment: derive from the unordered pair.
    Rng pair_rng = rng.fork(static_cast<std::uint64_t>(std::min(a, b)) * 1000003ULL +
                            static_cast<std::uint64_t>(std::max(a, b)));
    return kinds[static_cast<std::size_t>(pair_rng.below(kinds.size()))];
  };
  // Every pair has a standing relationship even when the communication graph
  // is sparse; edges below only add the communication links.
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      if (a != b) t.declare_relationship(a, b, kind_for(a, b));
    }
  }
  auto link = [&](int a, int b) {
    RelationshipKind k = kind_for(a, b);
    t.add_edge(a, b, k);
    if (policy.bidirectional) t.add_edge(b, a, k);
  };

  switch (kind) {
    case TopologyKind::Chain:
      for (int i = 0; i + 1 < n; ++i) link(i, i + 1);
      break;
    case TopologyKind::Cycle:
      for (int i = 0; i < n; ++i) link(i, (i + 1) % n);
      break;
    case TopologyKind::BinaryTree:
      for (int i = 0; i < n; ++i) {
        if (2 * i + 1 < n) link(i, 2 * i + 1);
        if (2 * i + 2 < n) link(i, 2 * i + 2);
      }
      break;
    case TopologyKind::Complete:
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          if (i != j) t.add_edge(i, j, kind_for(i, j));
        }
      }
      break;
  }
  return t;
}

/// True iff every node is reachable from root along directed edges.
inline bool has_spanning_tree(const Topology& t, const AgentId& root) {
  if (!t.has_node(root.index)) {
    throw InvalidArgument("unknown root node " + std::to_string(root.index));
  }
  std::vector<char> seen(t.nodes().size(), 0);
  std::deque<int> frontier{root.index};
  seen[static_cast<std::size_t>(root.index)] = 1;
  std::size_t reached = 1;
  while (!frontier.empty()) {
    int cur = frontier.front();
    frontier.pop_front();
    for (const auto& [from, to] : t.edges()) {
      if (from == cur && !seen[static_cast<std::size_t>(to)]) {
        seen[static_cast<std::size_t>(to)] = 1;
        ++reached;
        frontier.push_back(to);
      }
    }
  }
  return reached == t.nodes().size();
}

/// Relational permission level: the level granted by the pair's relationship.
/// This is what both the sieve's authority check and the cache's validity
/// check consult.
inline SecurityLevel clearance(const Topology& t, const LevelMap& level_map,
                               const AgentId& sender, const AgentId& receiver) {
  auto rel = t.relationship(sender.index, receiver.index);
  if (!rel) {
    throw MissingRelationship("no relationship declared for (" + sender.name + ", " +
                              receiver.name + ")");
  }
  auto it = level_map.find(*rel);
  if (it == level_map.end()) {
    throw MissingRelationship(std::string("no level mapped for category ") +
                              kind_name(*rel));
  }
  return it->second;
}

/// One message in flight between two agents.
struct Message {
  int sender = -1;
  int receiver = -1;
  std::string content;
  std::vector<std::string> claimed_identities;
  SecurityLevel assigned_level{1};
  int round = 0;
  std::size_t token_len = 0;
};

inline Message make_message(int sender, int receiver, std::string content,
                            SecurityLevel level, int round,
                            std::vector<std::string> claimed = {}) {
  Message m;
  m.sender = sender;
  m.receiver = receiver;
  m.token_len = token_count(content);
  m.content = std::move(content);
  m.claimed_identities = std::move(claimed);
  m.assigned_level = level;
  m.round = round;
  return m;
}

/// One agent's entry in a dataset: a name plus facts per category.
struct DatasetAgent {
  std::string name;
  std::map<RelationshipKind, std::vector<std::string>> facts;

  const std::vector<std::string>& facts_for(RelationshipKind k) const {
    static const std::vector<std::string> none;
    auto it = facts.find(k);
    return it == facts.end() ? none : it->second;
  }
};

struct DatasetRelation {
  std::string a;
  std::string b;
  RelationshipKind kind;
};

/// A bundled miniature dataset: agents with leveled facts plus pairwise
/// relationships.
struct Dataset {
  SchemaKind schema = SchemaKind::RIOH;
  LevelMap level_map;
  std::vector<DatasetAgent> agents;
  std::vector<DatasetRelation> relations;
  /// Asymmetric relation pairs found at load time (kept, but flagged).
  std::vector<std::string> warnings;

  int level_count() const { return static_cast<int>(level_map.size()); }

  const DatasetAgent* find(const std::string& name) const {
    for (const auto& a : agents) {
      if (a.name == name) return &a;
    }
    return nullptr;
  }

  int index_of(const std::string& name) const {
    for (std::size_t i = 0; i < agents.size(); ++i) {
      if (agents[i].name == name) return static_cast<int>(i);
    }
    return -1;
  }

  SecurityLevel level_of(RelationshipKind k) const {
    auto it = level_map.find(k);
    if (it == level_map.end()) {
      throw SchemaError(std::string("category not in level map: ") + kind_name(k));
    }
    return it->second;
  }

  /// The category mapped to a given level (the map is bijective by schema).
  RelationshipKind kind_at(SecurityLevel level) const {
    for (const auto& [k, l] : level_map) {
      if (l == level) return k;
    }
    throw SchemaError("no category at level " + std::to_string(level.value));
  }

  const std::vector<std::string>& facts_at(const std::string& agent,
                                           SecurityLevel level) const {
    const DatasetAgent* a = find(agent);
    if (a == nullptr) {
      throw SchemaError("unknown agent \"" + agent + "\"");
    }
    return a->facts_for(kind_at(level));
  }
};

/// Social graph implied by the dataset: one node per agent (dataset order),
/// bidirectional edges for every declared relation.
inline Topology topology_from_dataset(const Dataset& d) {
  Topology t;
  for (std::size_t i = 0; i < d.agents.size(); ++i) {
    t.add_node(AgentId{static_cast<int>(i), d.agents[i].name});
  }
  for (const auto& rel : d.relations) {
    int ia = d.index_of(rel.a);
    int ib = d.index_of(rel.b);
    if (!t.has_edge(ia, ib)) t.add_edge(ia, ib, rel.kind);
    if (!t.has_edge(ib, ia)) t.add_edge(ib, ia, rel.kind);
  }
  return t;
}

}  // namespace agentsafe
