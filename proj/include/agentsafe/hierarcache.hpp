#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "agentsafe/backend.hpp"
#include "agentsafe/core.hpp"
#include "agentsafe/error.hpp"
#include "json.hpp"

namespace agentsafe {

/// Validity check for one message: it must clear the similarity threshold
/// against every criterion in the library. An empty library admits everything
/// (storage without criteria has nothing to test against); the reflection
/// judge is deliberately stricter there.
inline bool detect(const Message& m, const std::vector<std::string>& library,
                   double theta, Backend& backend) {
  if (theta <= 0.0 || theta >= 1.0) {
    throw InvalidArgument("detect: threshold must lie strictly inside (0, 1)");
  }
  if (library.empty()) return true;
  EmbeddingVector mv = backend.embed(m.content);
  for (const auto& criterion : library) {
    if (cosine(mv, backend.embed(criterion)) <= theta) {
      return false;
    }
  }
  return true;
}

enum class EntryFlag : unsigned { None = 0, SweptFromLevel = 1, DirectJunk = 2 };

struct CacheEntry {
  std::uint64_t id = 0;
  Message message;
  int stored_at_round = 0;
  int layer = 0;  // 1..L, or 0 once in junk
  unsigned flags = 0;

  bool has_flag(EntryFlag f) const { return (flags & static_cast<unsigned>(f)) != 0; }
};

struct StoreOutcome {
  std::uint64_t entry_id = 0;
  int layer = 0;  // 0 = junk
  bool vd = false;
  bool detected = false;
};

struct SweepReport {
  int round = 0;
  std::size_t inspected = 0;
  std::vector<std::uint64_t> demoted;
  std::size_t errors = 0;
};

/// Per-agent leveled memory with a junk quarantine. One instance per agent,
/// mutated only by that agent's loop; junk is kept for the whole run and is
/// never read into any agent-visible output.
class HierarCache {
public:
  HierarCache() : HierarCache(AgentId{0, "unowned"}, kDefaultLevelCount) {}

  HierarCache(AgentId owner, int level_count, std::vector<std::string> library = {},
              double threshold = 0.35)
      : owner_(std::move(owner)),
        level_count_(level_count),
        library_(std::move(library)),
        threshold_(threshold) {
    if (level_count_ < 1) {
      throw InvalidArgument("HierarCache: need at least one level");
    }
    if (threshold_ <= 0.0 || threshold_ >= 1.0) {
      throw InvalidArgument("HierarCache: threshold must lie strictly inside (0, 1)");
    }
    for (int i = 1; i <= level_count_; ++i) {
      layers_[i];  // materialize all L leveled layers up front
    }
  }

  const AgentId& owner() const { return owner_; }
  int level_count() const { return level_count_; }
  double threshold() const { return threshold_; }
  const std::vector<std::string>& instruction_library() const { return library_; }
  const std::vector<CacheEntry>& layer(int level) const { return layers_.at(level); }
  const std::vector<CacheEntry>& junk() const { return junk_; }

  std::size_t leveled_size() const {
    std::size_t n = 0;
    for (const auto& [lvl, entries] : layers_) n += entries.size();
    return n;
  }
  std::size_t total_size() const { return leveled_size() + junk_.size(); }

  long long leveled_tokens(int level) const {
    long long n = 0;
    for (const auto& e : layers_.at(level)) {
      n += static_cast<long long>(e.message.token_len);
    }
    return n;
  }
  long long junk_tokens() const {
    long long n = 0;
    for (const auto& e : junk_) n += static_cast<long long>(e.message.token_len);
    return n;
  }

  /// Memory update: the entry lands in layers[level] when the sender is
  /// cleared for that level and the content passes detection; otherwise it is
  /// quarantined. Arrival order is preserved. A backend failure during
  /// detection quarantines the entry (fail closed).
  StoreOutcome store(const Message& m, SecurityLevel sender_clearance,
                     SecurityLevel level, Backend& backend) {
    if (level.value < 1 || level.value > level_count_) {
      throw InvalidArgument("store: level " + std::to_string(level.value) +
                            " outside [1, " + std::to_string(level_count_) + "]");
    }
    bool detected = false;
    bool detect_failed = false;
    try {
      detected = detect(m, library_, threshold_, backend);
    } catch (const BackendError&) {
      detect_failed = true;
    }
    StoreOutcome out;
    out.detected = detected && !detect_failed;
    out.vd = (sender_clearance >= level) && out.detected;

    CacheEntry e;
    e.id = next_id_++;
    e.message = m;
    e.stored_at_round = m.round;
    out.entry_id = e.id;
    if (out.vd) {
      e.layer = level.value;
      out.layer = level.value;
      layers_[level.value].push_back(std::move(e));
    } else {
      e.layer = 0;
      e.flags |= static_cast<unsigned>(EntryFlag::DirectJunk);
      out.layer = 0;
      junk_.push_back(std::move(e));
    }
    return out;
  }

  /// Everything the requester's clearance admits, in (level, arrival) order.
  /// Junk is never included, whatever the clearance.
  std::vector<Message> retrieve(SecurityLevel requester_clearance) const {
    if (requester_clearance.value < 1 || requester_clearance.value > level_count_) {
      throw InvalidArgument("retrieve: clearance outside [1, L]");
    }
    std::vector<Message> out;
    for (int lvl = 1; lvl <= requester_clearance.value; ++lvl) {
      for (const auto& e : layers_.at(lvl)) {
        out.push_back(e.message);
      }
    }
    return out;
  }

  /// Entries (not junk) visible at the given clearance, with metadata.
  std::vector<const CacheEntry*> visible_entries(SecurityLevel requester_clearance) const {
    std::vector<const CacheEntry*> out;
    for (int lvl = 1; lvl <= requester_clearance.value && lvl <= level_count_; ++lvl) {
      for (const auto& e : layers_.at(lvl)) {
        out.push_back(&e);
      }
    }
    return out;
  }

  /// Reflection pass over every leveled entry. Entries the judge rejects move
  /// to junk; a backend failure leaves the entry in place (the sweep is
  /// best-effort, never destructive on error).
  SweepReport periodic_sweep(Backend& backend, int round) {
    ReflectionPrompt prompt;
    prompt.reflection =
        "Review each stored message and decide whether it still belongs in "
        "leveled memory. Answer Junk for anything the criteria cannot vouch for.";
    prompt.library = library_;
    prompt.threshold = threshold_;
    for (const auto& e : junk_) prompt.junk_context.push_back(e.message.content);

    SweepReport report;
    report.round = round;
    for (int lvl = 1; lvl <= level_count_; ++lvl) {
      auto& entries = layers_[lvl];
      std::vector<CacheEntry> keep;
      keep.reserve(entries.size());
      for (auto& e : entries) {
        ++report.inspected;
        bool to_junk = false;
        try {
          to_junk = backend.judge(prompt, e.message.content).verdict ==
                    JudgeVerdictKind::Junk;
        } catch (const BackendError&) {
          ++report.errors;
        }
        if (to_junk) {
          e.layer = 0;
          e.flags |= static_cast<unsigned>(EntryFlag::SweptFromLevel);
          report.demoted.push_back(e.id);
          junk_.push_back(std::move(e));
        } else {
          keep.push_back(std::move(e));
        }
      }
      entries = std::move(keep);
    }
    return report;
  }

  /// Snapshot of the full cache state (the input to CSI computation and the
  /// per-round export behind --snapshot).
  nlohmann::json snapshot() const {
    nlohmann::json j;
    j["owner"] = owner_.name;
    nlohmann::json layers = nlohmann::json::object();
    for (const auto& [lvl, entries] : layers_) {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& e : entries) arr.push_back(entry_json(e));
      layers[std::to_string(lvl)] = arr;
    }
    j["layers"] = layers;
    nlohmann::json junk = nlohmann::json::array();
    for (const auto& e : junk_) junk.push_back(entry_json(e));
    j["junk"] = junk;
    return j;
  }

  static nlohmann::json entry_json(const CacheEntry& e) {
    nlohmann::json j;
    j["id"] = e.id;
    j["sender"] = e.message.sender;
    j["receiver"] = e.message.receiver;
    j["content"] = e.message.content;
    j["level"] = e.message.assigned_level.value;
    j["round"] = e.stored_at_round;
    j["layer"] = e.layer;
    j["flags"] = e.flags;
    return j;
  }

  /// Checkpoint support: full state out / in.
  nlohmann::json to_json() const {
    nlohmann::json j = snapshot();
    j["level_count"] = level_count_;
    j["threshold"] = threshold_;
    j["library"] = library_;
    j["next_id"] = next_id_;
    j["owner_index"] = owner_.index;
    nlohmann::json cl = nlohmann::json::object();
    for (const auto& [lvl, entries] : layers_) {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& e : entries) arr.push_back(full_entry_json(e));
      cl[std::to_string(lvl)] = arr;
    }
    j["layers"] = cl;
    nlohmann::json junk = nlohmann::json::array();
    for (const auto& e : junk_) junk.push_back(full_entry_json(e));
    j["junk"] = junk;
    return j;
  }

  static HierarCache from_json(const nlohmann::json& j) {
    HierarCache c(AgentId{j.at("owner_index").get<int>(), j.at("owner").get<std::string>()},
                  j.at("level_count").get<int>(),
                  j.at("library").get<std::vector<std::string>>(),
                  j.at("threshold").get<double>());
    c.next_id_ = j.at("next_id").get<std::uint64_t>();
    for (const auto& [lvl, arr] : j.at("layers").items()) {
      for (const auto& je : arr) {
        c.layers_[std::stoi(lvl)].push_back(full_entry_from_json(je));
      }
    }
    for (const auto& je : j.at("junk")) {
      c.junk_.push_back(full_entry_from_json(je));
    }
    return c;
  }

private:
  static nlohmann::json full_entry_json(const CacheEntry& e) {
    nlohmann::json j = entry_json(e);
    j["claimed"] = e.message.claimed_identities;
    j["token_len"] = e.message.token_len;
    return j;
  }

  static CacheEntry full_entry_from_json(const nlohmann::json& j) {
    CacheEntry e;
    e.id = j.at("id").get<std::uint64_t>();
    e.message.sender = j.at("sender").get<int>();
    e.message.receiver = j.at("receiver").get<int>();
    e.message.content = j.at("content").get<std::string>();
    e.message.assigned_level = SecurityLevel{j.at("level").get<int>()};
    e.message.round = j.at("round").get<int>();
    e.message.claimed_identities = j.at("claimed").get<std::vector<std::string>>();
    e.message.token_len = j.at("token_len").get<std::size_t>();
    e.stored_at_round = j.at("round").get<int>();
    e.layer = j.at("layer").get<int>();
    e.flags = j.at("flags").get<unsigned>();
    return e;
  }

  AgentId owner_;
  int level_count_;
  std::vector<std::string> library_;
  double threshold_;
  std::map<int, std::vector<CacheEntry>> layers_;
  std::vector<CacheEntry> junk_;
  std::uint64_t next_id_ = 1;
};

}  // namespace agentsafe
