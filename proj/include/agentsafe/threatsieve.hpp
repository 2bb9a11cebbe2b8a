#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "agentsafe/backend.hpp"
#include "agentsafe/core.hpp"
#include "agentsafe/error.hpp"
#include "json.hpp"

namespace agentsafe {

/// Known agents by name. Lookups are case-insensitive; aliases (first names)
/// may point at the same agent.
class IdentityRegistry {
public:
  void add(const std::string& name, int agent_index) {
    std::string key = to_lower(name);
    auto it = entries_.find(key);
    if (it != entries_.end() && it->second.agent != agent_index) {
      throw InvalidScenario("registry name \"" + name + "\" already bound");
    }
    entries_[key] = {name, agent_index};
  }

  bool empty() const { return entries_.empty(); }

  std::optional<int> resolve(const std::string& name) const {
    auto it = entries_.find(to_lower(name));
    if (it == entries_.end()) return std::nullopt;
    return it->second.agent;
  }

  /// One registered name per line; the extraction context.
  std::string context() const {
    std::string out;
    for (const auto& [key, entry] : entries_) {
      out += entry.display;
      out += '\n';
    }
    return out;
  }

  /// Registry with every dataset agent under both full name and first name
  /// (first names only when unambiguous).
  static IdentityRegistry from_dataset(const Dataset& d) {
    IdentityRegistry r;
    std::map<std::string, int> first_names;  // lower first name -> count
    for (const auto& a : d.agents) {
      auto toks = tokenize(a.name);
      if (!toks.empty()) first_names[to_lower(toks[0])]++;
    }
    for (std::size_t i = 0; i < d.agents.size(); ++i) {
      const auto& name = d.agents[i].name;
      r.add(name, static_cast<int>(i));
      auto toks = tokenize(name);
      if (!toks.empty() && first_names[to_lower(toks[0])] == 1 &&
          toks[0] != name) {
        r.add(toks[0], static_cast<int>(i));
      }
    }
    return r;
  }

private:
  struct Entry {
    std::string display;
    int agent = -1;
  };
  std::map<std::string, Entry> entries_;  // keyed by lowercased name
};

enum class SieveReason { Pass, LevelExceedsClearance, IdentityMismatch, ExtractionFailed };

inline const char* sieve_reason_name(SieveReason r) {
  switch (r) {
    case SieveReason::Pass: return "Pass";
    case SieveReason::LevelExceedsClearance: return "LevelExceedsClearance";
    case SieveReason::IdentityMismatch: return "IdentityMismatch";
    case SieveReason::ExtractionFailed: return "ExtractionFailed";
  }
  return "?";
}

/// Routing decision for one message. route_level is present exactly when both
/// checks passed, and reason is Pass exactly then.
struct SieveOutcome {
  bool authorized = false;
  bool identity_ok = false;
  std::optional<SecurityLevel> route_level;
  SieveReason reason = SieveReason::LevelExceedsClearance;
};

/// Authority check: the message's level must not exceed the receiver's
/// clearance toward the sender. Total on valid inputs.
inline bool authorize(const Message& msg, SecurityLevel receiver_clearance) {
  return msg.assigned_level <= receiver_clearance;
}

/// Identity check: every name mentioned in the content must be registered,
/// and every self-identification the message claims must resolve to the
/// declared sender. Extraction failure counts as a failed check.
inline bool verify_identity(const Message& msg, const IdentityRegistry& registry,
                            Backend& backend) {
  if (registry.empty()) {
    throw InvalidArgument("verify_identity: empty registry");
  }
  std::vector<std::string> mentioned =
      backend.extract(msg.content, "List every person this message mentions.",
                      registry.context());
  for (const auto& name : mentioned) {
    if (!registry.resolve(name)) {
      return false;
    }
  }
  for (const auto& claimed : msg.claimed_identities) {
    auto who = registry.resolve(claimed);
    if (!who || *who != msg.sender) {
      return false;
    }
  }
  return true;
}

/// Full gatekeeper: permission check first (it is cheap), then identity.
/// Both predicates are evaluated for reporting even when the first fails.
inline SieveOutcome sieve(const Message& msg, const Topology& topology,
                          const LevelMap& level_map, const IdentityRegistry& registry,
                          Backend& backend) {
  if (!topology.has_node(msg.sender) || !topology.has_node(msg.receiver)) {
    throw InvalidArgument("sieve: sender or receiver not in topology");
  }
  const AgentId& sender = topology.nodes()[static_cast<std::size_t>(msg.sender)];
  const AgentId& receiver = topology.nodes()[static_cast<std::size_t>(msg.receiver)];
  SecurityLevel receiver_clearance = clearance(topology, level_map, sender, receiver);

  SieveOutcome out;
  out.authorized = authorize(msg, receiver_clearance);
  bool extraction_failed = false;
  try {
    out.identity_ok = verify_identity(msg, registry, backend);
  } catch (const BackendError&) {
    out.identity_ok = false;
    extraction_failed = true;
  }

  if (out.authorized && out.identity_ok) {
    out.route_level = msg.assigned_level;
    out.reason = SieveReason::Pass;
  } else if (!out.authorized) {
    out.reason = SieveReason::LevelExceedsClearance;
  } else {
    out.reason = extraction_failed ? SieveReason::ExtractionFailed
                                   : SieveReason::IdentityMismatch;
  }
  return out;
}

/// The level the sieve should treat free-form content as carrying: the
/// maximum level among dataset facts the content resembles, level 1 when it
/// resembles none. Content that equals a fact verbatim gets that fact's
/// category level directly.
inline SecurityLevel assign_level(const std::string& content, const Dataset& dataset,
                                  Backend& backend, double theta_level) {
  for (const auto& agent : dataset.agents) {
    for (const auto& [kind, facts] : agent.facts) {
      for (const auto& f : facts) {
        if (f == content) return dataset.level_of(kind);
      }
    }
  }
  EmbeddingVector c = backend.embed(content);
  int best = 1;
  for (const auto& agent : dataset.agents) {
    for (const auto& [kind, facts] : agent.facts) {
      int lvl = dataset.level_of(kind).value;
      if (lvl <= best) continue;
      for (const auto& f : facts) {
        if (cosine(c, backend.embed(f)) > theta_level) {
          best = lvl;
          break;
        }
      }
    }
  }
  return SecurityLevel{best};
}

/// One JSON-lines audit record per sieve call.
inline std::string audit_record_json(int round, const std::string& sender,
                                     const std::string& receiver,
                                     const SieveOutcome& outcome) {
  nlohmann::json j;
  j["round"] = round;
  j["sender"] = sender;
  j["receiver"] = receiver;
  j["authorized"] = outcome.authorized;
  j["identity_ok"] = outcome.identity_ok;
  j["reason"] = sieve_reason_name(outcome.reason);
  if (outcome.route_level) {
    j["route_level"] = outcome.route_level->value;
  } else {
    j["route_level"] = nullptr;
  }
  return j.dump();
}

}  // namespace agentsafe
