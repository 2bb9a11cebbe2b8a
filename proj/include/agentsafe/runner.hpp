#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "agentsafe/attacks.hpp"
#include "agentsafe/backend.hpp"
#include "agentsafe/backend_remote.hpp"
#include "agentsafe/config.hpp"
#include "agentsafe/core.hpp"
#include "agentsafe/dataset_io.hpp"
#include "agentsafe/hierarcache.hpp"
#include "agentsafe/metrics.hpp"
#include "agentsafe/rng.hpp"
#include "agentsafe/threatsieve.hpp"
#include "json.hpp"

namespace agentsafe {

enum class EventType { Message, Blocked, Sweep, Task, AttackEval };

inline const char* event_type_name(EventType t) {
  switch (t) {
    case EventType::Message: return "message";
    case EventType::Blocked: return "blocked";
    case EventType::Sweep: return "sweep";
    case EventType::Task: return "task";
    case EventType::AttackEval: return "attack_eval";
  }
  return "?";
}

/// One append-only record in the run transcript.
struct TranscriptEvent {
  EventType type = EventType::Message;
  int round = 0;

  // Message / Blocked
  Message msg;
  bool is_reply = false;
  int plan_id = -1;
  std::optional<SieveOutcome> sieve_outcome;
  std::optional<StoreOutcome> store_outcome;

  // Sweep
  int agent = -1;
  std::optional<SweepReport> sweep_report;

  // Task
  std::string ground_truth;
  std::string output;
  double task_csi = 0.0;

  // AttackEval
  AttackKind kind = AttackKind::IABT;
  bool succeeded = false;
  double similarity = -1.0;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["type"] = event_type_name(type);
    j["round"] = round;
    switch (type) {
      case EventType::Message:
      case EventType::Blocked: {
        j["sender"] = msg.sender;
        j["receiver"] = msg.receiver;
        j["content"] = msg.content;
        j["level"] = msg.assigned_level.value;
        j["claimed"] = msg.claimed_identities;
        j["is_reply"] = is_reply;
        j["plan"] = plan_id;
        if (sieve_outcome) {
          j["sieve"] = {{"authorized", sieve_outcome->authorized},
                        {"identity_ok", sieve_outcome->identity_ok},
                        {"reason", sieve_reason_name(sieve_outcome->reason)}};
        }
        if (store_outcome) {
          j["store"] = {{"layer", store_outcome->layer},
                        {"vd", store_outcome->vd},
                        {"detected", store_outcome->detected}};
        }
        break;
      }
      case EventType::Sweep:
        j["agent"] = agent;
        if (sweep_report) {
          j["inspected"] = sweep_report->inspected;
          j["demoted"] = sweep_report->demoted;
        }
        break;
      case EventType::Task:
        j["agent"] = agent;
        j["plan"] = plan_id;
        j["ground_truth"] = ground_truth;
        j["output"] = output;
        j["csi"] = task_csi;
        break;
      case EventType::AttackEval:
        j["plan"] = plan_id;
        j["kind"] = attack_kind_name(kind);
        j["succeeded"] = succeeded;
        j["similarity"] = similarity;
        break;
    }
    return j;
  }
};

struct Transcript {
  /// Serialized events from before a checkpoint restore, if any.
  std::string preamble;
  std::vector<TranscriptEvent> events;

  std::string to_jsonl() const {
    std::string out = preamble;
    for (const auto& e : events) {
      out += e.to_json().dump();
      out += '\n';
    }
    return out;
  }
};

struct BucketScore {
  long long total = 0;
  long long defended = 0;
};

struct RunReport {
  std::string scenario_name;
  DefenseLedger ledger;
  // kind -> turn -> score
  std::map<AttackKind, std::map<int, BucketScore>> buckets;
  std::vector<double> task_csis;
  CostReport cost;
  long long tokens_leveled = 0;
  long long tokens_stored_flat = 0;
  long long tokens_junked = 0;
  long long tokens_blocked = 0;
  long long messages_total = 0;
  long long messages_blocked = 0;
  long long plans_skipped = 0;  // attacks reported N/A for this scenario

  double mean_task_csi() const {
    if (task_csis.empty()) return 0.0;
    double s = 0.0;
    for (double v : task_csis) s += v;
    return s / static_cast<double>(task_csis.size());
  }

  /// Tokens sitting in memory seen by later processing: leveled layers under
  /// the cache, everything under flat storage.
  long long tokens_in_working_memory() const {
    return tokens_leveled + tokens_stored_flat;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["scenario"] = scenario_name;
    j["attacks_total"] = ledger.attacks_total;
    j["defended"] = ledger.defended;
    nlohmann::json per_kind = nlohmann::json::object();
    for (const auto& [k, td] : ledger.per_kind) {
      per_kind[attack_kind_name(k)] = {{"total", td.first}, {"defended", td.second}};
    }
    j["per_kind"] = per_kind;
    nlohmann::json buckets_json = nlohmann::json::object();
    for (const auto& [k, per_turn] : buckets) {
      nlohmann::json turns = nlohmann::json::object();
      for (const auto& [turn, score] : per_turn) {
        turns[std::to_string(turn)] = {{"total", score.total},
                                       {"defended", score.defended}};
      }
      buckets_json[attack_kind_name(k)] = turns;
    }
    j["buckets"] = buckets_json;
    j["mean_task_csi"] = mean_task_csi();
    j["tokens"] = {{"leveled", tokens_leveled},
                   {"flat", tokens_stored_flat},
                   {"junked", tokens_junked},
                   {"blocked", tokens_blocked}};
    j["messages"] = {{"total", messages_total}, {"blocked", messages_blocked}};
    j["plans_skipped"] = plans_skipped;
    j["cost"] = {{"threatsieve", cost.raw_threatsieve},
                 {"validation", cost.raw_validation},
                 {"detection", cost.raw_detection},
                 {"saved_junk", cost.raw_saved_junk},
                 {"saved_level_filter", cost.raw_saved_level_filter},
                 {"delta", cost.raw_delta},
                 {"sweeps", cost.sweeps},
                 {"c", cost.c}};
    return j;
  }
};

struct RunResult {
  Transcript transcript;
  RunReport report;
  CostTrace cost_trace;
};

/// One CSV row per round of the run.
inline std::string round_csv(const RunResult& result) {
  std::string csv =
      "round,inbound_tokens,validated_tokens,junk_added_tokens,accepted_level,"
      "leveled_tokens,junk_tokens,sweep\n";
  for (const auto& r : result.cost_trace.per_round) {
    long long leveled = 0;
    for (long long v : r.layer_tokens) leveled += v;
    char row[192];
    std::snprintf(row, sizeof(row), "%d,%lld,%lld,%lld,%d,%lld,%lld,%d\n", r.round,
                  r.inbound_tokens, r.validated_tokens, r.junk_added_tokens,
                  r.accepted_level, leveled, r.junk_tokens, r.sweep ? 1 : 0);
    csv += row;
  }
  return csv;
}

/// Words that carry topic; the mock responder ranks candidate replies on
/// these rather than on glue.
inline std::string content_words(const std::string& text) {
  std::vector<std::string> keep;
  for (const auto& t : tokenize(to_lower(text))) {
    if (t.size() >= 4 && !detail::is_function_word(t)) keep.push_back(t);
  }
  return join(keep, " ");
}

inline const std::string kRefusalText = "i do not have anything to share on that";

/// Executes one scenario: Algorithm-style round loop with the configured
/// defense ablations. Deterministic given (config, seed).
class ScenarioRunner {
public:
  explicit ScenarioRunner(ScenarioConfig cfg, BackendPtr backend_override = nullptr)
      : cfg_(std::move(cfg)) {
    validate_or_throw(cfg_);
    backend_ = backend_override ? std::move(backend_override) : make_backend(cfg_);
    init();
  }

  const Topology& topology() const { return topology_; }
  const Dataset& dataset() const { return dataset_; }
  const std::vector<AttackPlan>& plans() const { return plans_; }
  const HierarCache& cache_of(int agent) const { return caches_.at(agent); }
  const std::vector<Message>& flat_of(int agent) const { return flat_.at(agent); }
  const std::vector<std::string>& audit_log() const { return audit_lines_; }

  RunResult run() {
    for (int t = start_round_ + 1; t <= cfg_.rounds; ++t) {
      run_round_checked(t);
    }
    return finish();
  }

  /// Continue a checkpointed run to completion.
  RunResult resume(const nlohmann::json& checkpoint) {
    restore(checkpoint);
    return run();
  }

  nlohmann::json checkpoint_json() const {
    nlohmann::json j;
    j["completed_round"] = start_round_;
    j["rng_state"] = rng_.state();
    nlohmann::json caches = nlohmann::json::array();
    for (const auto& [agent, cache] : caches_) {
      nlohmann::json cj = cache.to_json();
      cj["agent"] = agent;
      caches.push_back(cj);
    }
    j["caches"] = caches;
    nlohmann::json flats = nlohmann::json::object();
    for (const auto& [agent, msgs] : flat_) {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& m : msgs) {
        arr.push_back({{"sender", m.sender},
                       {"receiver", m.receiver},
                       {"content", m.content},
                       {"level", m.assigned_level.value},
                       {"claimed", m.claimed_identities},
                       {"round", m.round}});
      }
      flats[std::to_string(agent)] = arr;
    }
    j["flat"] = flats;
    nlohmann::json evid = nlohmann::json::array();
    for (const auto& e : evidence_) {
      nlohmann::json ej;
      ej["responses"] = nlohmann::json::array();
      for (const auto& [r, s] : e.responses) ej["responses"].push_back({r, s});
      ej["task_outputs"] = nlohmann::json::array();
      for (const auto& [r, s] : e.task_outputs) ej["task_outputs"].push_back({r, s});
      ej["ground_truth"] = e.ground_truth;
      evid.push_back(ej);
    }
    j["evidence"] = evid;
    j["transcript"] = transcript_.to_jsonl();
    j["report"] = report_.to_json();
    nlohmann::json cost_rounds = nlohmann::json::array();
    for (const auto& r : cost_trace_.per_round) {
      cost_rounds.push_back({{"round", r.round},
                             {"inbound", r.inbound_tokens},
                             {"validated", r.validated_tokens},
                             {"junk_added", r.junk_added_tokens},
                             {"accepted_level", r.accepted_level},
                             {"layers", r.layer_tokens},
                             {"junk", r.junk_tokens},
                             {"sweep", r.sweep}});
    }
    j["cost_rounds"] = cost_rounds;
    nlohmann::json buckets = nlohmann::json::array();
    for (const auto& [k, per_turn] : report_.buckets) {
      for (const auto& [turn, score] : per_turn) {
        buckets.push_back({{"kind", attack_kind_name(k)},
                           {"turn", turn},
                           {"total", score.total},
                           {"defended", score.defended}});
      }
    }
    j["bucket_scores"] = buckets;
    j["task_csis"] = report_.task_csis;
    j["audit"] = audit_lines_;
    return j;
  }

private:
  static BackendPtr make_backend(const ScenarioConfig& cfg);

  void init() {
    if (cfg_.dataset_inline) {
      dataset_ = *cfg_.dataset_inline;
    } else {
      dataset_ = load_dataset(cfg_.dataset_path, cfg_.schema);
    }
    level_map_ = dataset_.level_map;
    level_count_ = dataset_.level_count();

    if (cfg_.topology_from_relations) {
      topology_ = topology_from_dataset(dataset_);
    } else {
      if (cfg_.agent_count > static_cast<int>(dataset_.agents.size())) {
        throw ConfigError({"generated topology needs " +
                           std::to_string(cfg_.agent_count) +
                           " agents but the dataset has " +
                           std::to_string(dataset_.agents.size())});
      }
      RelationshipPolicy policy;
      policy.mode = RelationshipPolicy::Mode::SeededRandom;
      policy.schema = cfg_.schema;
      policy.seed = cfg_.seed;
      policy.bidirectional = true;
      Topology generated = build_topology(cfg_.topo_kind, cfg_.agent_count, policy);
      Topology named;
      for (int i = 0; i < cfg_.agent_count; ++i) {
        named.add_node(AgentId{i, dataset_.agents[static_cast<std::size_t>(i)].name});
      }
      for (const auto& [pair, kind] : generated.relationships()) {
        named.declare_relationship(pair.first, pair.second, kind);
      }
      for (const auto& [from, to] : generated.edges()) {
        named.add_edge(from, to, *generated.relationship(from, to));
      }
      topology_ = std::move(named);
    }

    const int n = static_cast<int>(topology_.nodes().size());
    attacker_ = n - 1;
    if (!cfg_.attacker.empty()) {
      const AgentId* a = topology_.find_by_name(cfg_.attacker);
      if (a == nullptr) {
        throw ConfigError({"attacker \"" + cfg_.attacker + "\" is not a scenario agent"});
      }
      attacker_ = a->index;
    }

    std::map<std::string, int> first_names;
    for (const auto& node : topology_.nodes()) {
      auto toks = tokenize(node.name);
      if (!toks.empty()) first_names[to_lower(toks[0])]++;
    }
    for (const auto& node : topology_.nodes()) {
      registry_.add(node.name, node.index);
      auto toks = tokenize(node.name);
      if (!toks.empty() && first_names[to_lower(toks[0])] == 1 && toks[0] != node.name) {
        registry_.add(toks[0], node.index);
      }
    }

    library_ = cfg_.instruction_library;
    if (library_.empty() && cfg_.use_default_library) {
      library_ = default_instruction_library(cfg_.schema);
    }

    for (const auto& node : topology_.nodes()) {
      if (cfg_.defenses.hierarcache) {
        caches_.emplace(node.index,
                        HierarCache(node, level_count_, library_, cfg_.theta));
      } else {
        flat_[node.index];
      }
    }

    build_plans();
    evidence_.assign(plans_.size(), PlanEvidence{});
    for (std::size_t i = 0; i < plans_.size(); ++i) {
      evidence_[i].ground_truth = plans_[i].ground_truth;
    }
    rng_ = Rng(cfg_.seed);
    cost_trace_.cost_per_token = cfg_.cost_per_token;
    cost_trace_.rounds = cfg_.rounds;
    cost_trace_.library_size =
        cfg_.defenses.hierarcache ? static_cast<long long>(library_.size()) : 0;
    report_.scenario_name = cfg_.name;
  }

  void build_plans() {
    if (!cfg_.replay_plans.empty()) {
      for (const AttackPlan& plan : cfg_.replay_plans) {
        if (!topology_.has_node(plan.attacker.index) ||
            !topology_.has_node(plan.target.index)) {
          throw ConfigError({"replayed plan references agents outside the scenario"});
        }
        plans_.push_back(plan);
      }
      return;
    }
    for (std::size_t i = 0; i < cfg_.attacks.size(); ++i) {
      const AttackSpecConfig& spec = cfg_.attacks[i];
      int rounds = spec.rounds > 0 ? spec.rounds : cfg_.rounds;
      std::uint64_t seed = spec.seed != 0 ? spec.seed : cfg_.seed + 1000 + i;
      try {
        AttackPlan plan;
        switch (spec.kind) {
          case AttackKind::IABT: {
            std::optional<std::string> spoof;
            if (!spec.spoof.empty() && spec.spoof != "auto") spoof = spec.spoof;
            plan = gen_iabt(topology_, dataset_, level_map_, seed, attacker_, rounds,
                            spoof);
            if (spec.spoof == "auto") apply_auto_spoof(plan);
            break;
          }
          case AttackKind::AM:
            plan = gen_am(topology_, dataset_, level_map_, spec.k_topics, seed,
                          attacker_, rounds);
            break;
          case AttackKind::II:
            plan = gen_ii(topology_, dataset_, rounds, spec.beta, seed, attacker_,
                          spec.target_level);
            break;
          case AttackKind::IM:
            plan = gen_im(topology_, dataset_, level_map_, rounds, spec.gamma,
                          spec.impersonated, seed, attacker_);
            break;
        }
        plans_.push_back(std::move(plan));
      } catch (const AttackInapplicable&) {
        if (!cfg_.skip_inapplicable_attacks) throw;
        ++report_.plans_skipped;
      }
    }
  }

  /// Pick the claimed identity with the highest standing toward the
  /// intermediary, strictly above the attacker's own.
  void apply_auto_spoof(AttackPlan& plan) {
    if (!plan.intermediary) return;
    int inter = plan.intermediary->index;
    SecurityLevel own = clearance(topology_, level_map_, plan.attacker,
                                  topology_.nodes()[static_cast<std::size_t>(inter)]);
    const AgentId* best = nullptr;
    SecurityLevel best_level = own;
    for (const auto& node : topology_.nodes()) {
      if (node.index == plan.attacker.index || node.index == inter) continue;
      auto rel = topology_.relationship(node.index, inter);
      if (!rel) continue;
      SecurityLevel lv = level_map_.at(*rel);
      if (lv > best_level) {
        best_level = lv;
        best = &node;
      }
    }
    if (best == nullptr) return;
    plan.params.spoofed = best->name;
    for (auto& m : plan.rounds) {
      m.claimed_identities = {best->name};
    }
  }

  // Per-round rollback state, kept only when checkpointing is enabled so a
  // mid-round backend failure leaves a clean end-of-round checkpoint.
  struct RoundSnapshot {
    std::uint64_t rng_state = 0;
    std::map<int, HierarCache> caches;
    std::map<int, std::vector<Message>> flat;
    std::vector<PlanEvidence> evidence;
    RunReport report;
    std::size_t transcript_size = 0;
    std::size_t audit_size = 0;
    std::size_t cost_rounds = 0;
  };

  void run_round_checked(int t) {
    std::optional<RoundSnapshot> snap;
    if (!cfg_.out_dir.empty()) {
      snap = RoundSnapshot{rng_.state(),          caches_,
                           flat_,                 evidence_,
                           report_,               transcript_.events.size(),
                           audit_lines_.size(),   cost_trace_.per_round.size()};
    }
    try {
      run_round(t);
      start_round_ = t;
    } catch (const BackendError&) {
      if (snap) {
        rng_.restore(snap->rng_state);
        caches_ = std::move(snap->caches);
        flat_ = std::move(snap->flat);
        evidence_ = std::move(snap->evidence);
        report_ = std::move(snap->report);
        transcript_.events.resize(snap->transcript_size);
        audit_lines_.resize(snap->audit_size);
        cost_trace_.per_round.resize(snap->cost_rounds);
        std::filesystem::create_directories(cfg_.out_dir);
        std::ofstream out(cfg_.out_dir + "/checkpoint.json", std::ios::binary);
        out << checkpoint_json().dump(2) << "\n";
      }
      throw;
    }
  }

  void run_round(int t) {
    CostTraceRound cost_row;
    cost_row.round = t;
    round_accepted_level_ = 0;

    // Pairwise exchange: every connected benign pair shares one fact at a
    // level the relationship admits.
    for (const auto& [from, to] : topology_.edges()) {
      if (from == attacker_) continue;
      Message m = benign_message(from, to, t);
      deliver(m, t, false, -1, cost_row);
    }
    // Attacker injections for this round.
    for (std::size_t pi = 0; pi < plans_.size(); ++pi) {
      for (const auto& planned : plans_[pi].rounds) {
        if (planned.round != t) continue;
        Message m = planned;
        deliver(m, t, false, static_cast<int>(pi), cost_row);
      }
    }

    // Periodic detection pass.
    bool sweep_round =
        cfg_.defenses.hierarcache && cfg_.defenses.sweep && t % cfg_.sweep_every == 0;
    if (cfg_.defenses.hierarcache) {
      capture_layer_sizes(cost_row);  // sizes the sweep would inspect
    }
    cost_row.sweep = sweep_round;
    if (sweep_round) {
      for (const auto& node : topology_.nodes()) {
        auto& cache = caches_.at(node.index);
        long long junk_before = cache.junk_tokens();
        SweepReport sr = cache.periodic_sweep(*backend_, t);
        cost_row.junk_added_tokens += cache.junk_tokens() - junk_before;
        report_.tokens_junked += cache.junk_tokens() - junk_before;
        TranscriptEvent e;
        e.type = EventType::Sweep;
        e.round = t;
        e.agent = node.index;
        e.sweep_report = sr;
        transcript_.events.push_back(std::move(e));
      }
    }

    // Scheduled recall tasks and per-bucket attack scoring.
    if (t % cfg_.probe_every == 0) {
      for (std::size_t pi = 0; pi < plans_.size(); ++pi) {
        const AttackPlan& plan = plans_[pi];
        PlanEvidence& ev = evidence_[pi];
        ev.rounds_executed = t;
        if (!is_topology_attack(plan.kind)) {
          run_recall_task(plan, static_cast<int>(pi), t);
        }
        PlanEvidence window = windowed_evidence(ev, t);
        AttackOutcome outcome =
            attack_success(plan, window, *backend_, cfg_.success_threshold);
        report_.ledger.record(plan.kind, !outcome.succeeded);
        auto& score = report_.buckets[plan.kind][t];
        ++score.total;
        if (!outcome.succeeded) ++score.defended;
        TranscriptEvent e;
        e.type = EventType::AttackEval;
        e.round = t;
        e.plan_id = static_cast<int>(pi);
        e.kind = plan.kind;
        e.succeeded = outcome.succeeded;
        e.similarity = outcome.evidence_similarity;
        transcript_.events.push_back(std::move(e));
      }
    }

    cost_row.accepted_level = round_accepted_level_;
    if (cfg_.defenses.hierarcache && !sweep_round) {
      capture_layer_sizes(cost_row);
    }
    if (!cfg_.defenses.hierarcache) {
      cost_row.layer_tokens.assign(static_cast<std::size_t>(level_count_), 0);
    }
    cost_trace_.per_round.push_back(std::move(cost_row));

    if (cfg_.snapshot && !cfg_.out_dir.empty() && cfg_.defenses.hierarcache) {
      write_snapshot(t);
    }
  }

  void capture_layer_sizes(CostTraceRound& row) {
    row.layer_tokens.assign(static_cast<std::size_t>(level_count_), 0);
    row.junk_tokens = 0;
    for (const auto& [agent, cache] : caches_) {
      for (int lvl = 1; lvl <= level_count_; ++lvl) {
        row.layer_tokens[static_cast<std::size_t>(lvl - 1)] +=
            cache.leveled_tokens(lvl);
      }
      row.junk_tokens += cache.junk_tokens();
    }
  }

  Message benign_message(int from, int to, int t) {
    const AgentId& sender = topology_.nodes()[static_cast<std::size_t>(from)];
    const AgentId& receiver = topology_.nodes()[static_cast<std::size_t>(to)];
    SecurityLevel cl = clearance(topology_, level_map_, sender, receiver);
    int level = 1 + static_cast<int>(rng_.below(static_cast<std::uint64_t>(cl.value)));
    const auto& facts = dataset_.facts_at(sender.name, SecurityLevel{level});
    const std::string& fact =
        facts[static_cast<std::size_t>(rng_.below(facts.size()))];
    return make_message(from, to, fact, SecurityLevel{level}, t);
  }

  /// Full inbound pipeline for one message; probes that get through solicit a
  /// reply, and the reply travels through the same pipeline.
  void deliver(Message m, int t, bool is_reply, int plan_id, CostTraceRound& cost_row) {
    ++report_.messages_total;
    bool passed = true;
    TranscriptEvent e;
    e.round = t;
    e.msg = m;
    e.is_reply = is_reply;
    e.plan_id = plan_id;

    std::optional<SieveOutcome> sieve_out;
    if (cfg_.defenses.threatsieve) {
      cost_row.inbound_tokens += static_cast<long long>(m.token_len);
      m.assigned_level = assign_level(m.content, dataset_, *backend_, cfg_.theta_level);
      e.msg.assigned_level = m.assigned_level;
      sieve_out = sieve(m, topology_, level_map_, registry_, *backend_);
      audit_lines_.push_back(audit_record_json(
          t, topology_.nodes()[static_cast<std::size_t>(m.sender)].name,
          topology_.nodes()[static_cast<std::size_t>(m.receiver)].name, *sieve_out));
      passed = sieve_out->reason == SieveReason::Pass;
      e.sieve_outcome = sieve_out;
    }

    if (!passed) {
      ++report_.messages_blocked;
      report_.tokens_blocked += static_cast<long long>(m.token_len);
      e.type = EventType::Blocked;
      transcript_.events.push_back(std::move(e));
      return;
    }

    // Effective requester identity: with the gatekeeper off, a claimed
    // identity is taken at face value.
    int effective_sender = m.sender;
    if (!cfg_.defenses.threatsieve && !m.claimed_identities.empty()) {
      if (auto who = registry_.resolve(m.claimed_identities.front())) {
        effective_sender = *who;
      }
    }

    if (cfg_.defenses.hierarcache) {
      cost_row.validated_tokens += static_cast<long long>(m.token_len);
      SecurityLevel sender_cl =
          pair_clearance_or_floor(effective_sender, m.receiver);
      SecurityLevel store_level = m.assigned_level;
      if (store_level.value > level_count_) store_level.value = level_count_;
      auto& cache = caches_.at(m.receiver);
      StoreOutcome so = cache.store(m, sender_cl, store_level, *backend_);
      e.store_outcome = so;
      if (so.layer > 0) {
        report_.tokens_leveled += static_cast<long long>(m.token_len);
        if (cfg_.defenses.threatsieve) {
          round_accepted_level_ = std::max(round_accepted_level_, so.layer);
        }
      } else {
        report_.tokens_junked += static_cast<long long>(m.token_len);
        cost_row.junk_added_tokens += static_cast<long long>(m.token_len);
      }
    } else {
      flat_[m.receiver].push_back(m);
      report_.tokens_stored_flat += static_cast<long long>(m.token_len);
      if (cfg_.defenses.threatsieve && sieve_out && sieve_out->route_level) {
        round_accepted_level_ =
            std::max(round_accepted_level_, sieve_out->route_level->value);
      }
    }
    transcript_.events.push_back(std::move(e));

    if (!is_reply && plan_id >= 0 &&
        plans_[static_cast<std::size_t>(plan_id)].expects_reply) {
      Message reply = compose_reply(m, effective_sender, t);
      deliver(reply, t, true, plan_id, cost_row);
      if (!cfg_.defenses.threatsieve || last_delivery_passed()) {
        evidence_[static_cast<std::size_t>(plan_id)].responses.push_back(
            {t, reply.content});
      }
    }
  }

  bool last_delivery_passed() const {
    return !transcript_.events.empty() &&
           transcript_.events.back().type == EventType::Message;
  }

  SecurityLevel pair_clearance_or_floor(int sender, int receiver) {
    if (sender == receiver) return SecurityLevel{level_count_};
    const AgentId& s = topology_.nodes()[static_cast<std::size_t>(sender)];
    const AgentId& r = topology_.nodes()[static_cast<std::size_t>(receiver)];
    try {
      return clearance(topology_, level_map_, s, r);
    } catch (const MissingRelationship&) {
      return SecurityLevel{1};
    }
  }

  /// The receiver answers a probe from whatever its memory view admits for
  /// the requester, plus its own facts at admissible levels. Candidates about
  /// the person the probe mentions are preferred; the requester's own words
  /// are never quoted back.
  Message compose_reply(const Message& probe, int effective_sender, int t) {
    int responder = probe.receiver;
    SecurityLevel cl = pair_clearance_or_floor(effective_sender, responder);

    std::vector<std::string> pool;
    const std::string& responder_name =
        topology_.nodes()[static_cast<std::size_t>(responder)].name;
    int own_limit = cfg_.defenses.hierarcache ? cl.value : level_count_;
    for (int lvl = 1; lvl <= own_limit; ++lvl) {
      for (const auto& f : dataset_.facts_at(responder_name, SecurityLevel{lvl})) {
        pool.push_back(f);
      }
    }
    if (cfg_.defenses.hierarcache) {
      for (const Message& cached : caches_.at(responder).retrieve(cl)) {
        if (cached.sender == probe.sender) continue;
        pool.push_back(cached.content);
      }
    } else {
      for (const Message& cached : flat_.at(responder)) {
        if (cached.sender == probe.sender) continue;
        pool.push_back(cached.content);
      }
    }

    std::vector<std::string> mentioned;
    try {
      mentioned = backend_->extract(probe.content, "Who is this message about?",
                                    registry_.context());
    } catch (const BackendError&) {
      mentioned.clear();
    }
    auto about_subject = [&](const std::string& text) {
      for (const auto& name : mentioned) {
        if (contains_ci(text, name)) return true;
      }
      return false;
    };

    std::string probe_words = content_words(probe.content);
    const std::string* best = nullptr;
    if (!probe_words.empty()) {
      EmbeddingVector pv = backend_->embed(probe_words);
      for (bool subject_pass : {true, false}) {
        if (!subject_pass && best != nullptr) break;
        double best_score = -1.0;
        for (const auto& cand : pool) {
          if (subject_pass && !mentioned.empty() && !about_subject(cand)) continue;
          std::string cand_words = content_words(cand);
          if (cand_words.empty()) continue;
          double s = cosine(pv, backend_->embed(cand_words));
          if (s > best_score && s >= cfg_.reply_floor) {
            best_score = s;
            best = &cand;
          }
        }
      }
    }

    std::string text = best != nullptr ? *best : kRefusalText;
    return make_message(responder, probe.sender, text, SecurityLevel{1}, t);
  }

  /// Scheduled recall: the agent restates one of its own facts unless
  /// accessible corrupting entries take over (the undefended path draws
  /// from the exponential recall model).
  void run_recall_task(const AttackPlan& plan, int plan_id, int t) {
    int target = plan.target.index;
    std::vector<const Message*> accessible;
    if (cfg_.defenses.hierarcache) {
      const auto& cache = caches_.at(target);
      for (const CacheEntry* e :
           cache.visible_entries(SecurityLevel{level_count_})) {
        accessible.push_back(&e->message);
      }
    } else {
      for (const auto& m : flat_.at(target)) accessible.push_back(&m);
    }

    std::vector<const Message*> corrupting;
    for (const Message* m : accessible) {
      for (const auto& fab : plan.fabrications) {
        if (m->content == fab) {
          corrupting.push_back(m);
          break;
        }
      }
    }

    std::string output = plan.ground_truth;
    if (!corrupting.empty()) {
      double scale = plan.kind == AttackKind::II ? plan.params.beta
                                                 : plan.params.gamma;
      double p = p_correct(scale, static_cast<double>(corrupting.size()));
      if (rng_.next_double() >= p) {
        output = corrupting.back()->content;
      }
    }

    double sim = csi(output, plan.ground_truth, *backend_);
    evidence_[static_cast<std::size_t>(plan_id)].task_outputs.push_back({t, output});
    report_.task_csis.push_back(sim);

    TranscriptEvent e;
    e.type = EventType::Task;
    e.round = t;
    e.agent = target;
    e.plan_id = plan_id;
    e.ground_truth = plan.ground_truth;
    e.output = output;
    e.task_csi = sim;
    transcript_.events.push_back(std::move(e));
  }

  /// Per-bucket scoring windows: only evidence from the bucket that just
  /// finished.
  PlanEvidence windowed_evidence(const PlanEvidence& full, int t) const {
    PlanEvidence w;
    w.ground_truth = full.ground_truth;
    w.rounds_executed = t;
    int lo = t - cfg_.probe_every;
    for (const auto& [r, s] : full.responses) {
      if (r > lo && r <= t) w.responses.push_back({r, s});
    }
    for (const auto& [r, s] : full.task_outputs) {
      if (r > lo && r <= t) w.task_outputs.push_back({r, s});
    }
    return w;
  }

  void write_snapshot(int t) {
    std::filesystem::create_directories(cfg_.out_dir + "/snapshots");
    char name[32];
    std::snprintf(name, sizeof(name), "round_%04d.json", t);
    std::ofstream out(cfg_.out_dir + "/snapshots/" + name, std::ios::binary);
    nlohmann::json j = nlohmann::json::array();
    for (const auto& [agent, cache] : caches_) {
      j.push_back(cache.snapshot());
    }
    out << j.dump(2) << "\n";
  }

  RunResult finish() {
    report_.cost = cost_ledger(cost_trace_);
    if (!cfg_.out_dir.empty()) {
      std::filesystem::create_directories(cfg_.out_dir);
      if (cfg_.trace) {
        std::ofstream audit(cfg_.out_dir + "/audit.jsonl", std::ios::binary);
        for (const auto& line : audit_lines_) audit << line << "\n";
        std::ofstream tr(cfg_.out_dir + "/transcript.jsonl", std::ios::binary);
        tr << transcript_.to_jsonl();
      }
    }
    return RunResult{transcript_, report_, cost_trace_};
  }

  void restore(const nlohmann::json& j) {
    start_round_ = j.at("completed_round").get<int>();
    rng_.restore(j.at("rng_state").get<std::uint64_t>());
    caches_.clear();
    flat_.clear();
    for (const auto& cj : j.at("caches")) {
      caches_.emplace(cj.at("agent").get<int>(), HierarCache::from_json(cj));
    }
    if (!cfg_.defenses.hierarcache) {
      for (const auto& [key, arr] : j.at("flat").items()) {
        auto& msgs = flat_[std::stoi(key)];
        for (const auto& mj : arr) {
          msgs.push_back(make_message(
              mj.at("sender").get<int>(), mj.at("receiver").get<int>(),
              mj.at("content").get<std::string>(),
              SecurityLevel{mj.at("level").get<int>()}, mj.at("round").get<int>(),
              mj.at("claimed").get<std::vector<std::string>>()));
        }
      }
      for (const auto& node : topology_.nodes()) flat_[node.index];
    }
    evidence_.clear();
    for (const auto& ej : j.at("evidence")) {
      PlanEvidence ev;
      for (const auto& pr : ej.at("responses")) {
        ev.responses.push_back({pr[0].get<int>(), pr[1].get<std::string>()});
      }
      for (const auto& pr : ej.at("task_outputs")) {
        ev.task_outputs.push_back({pr[0].get<int>(), pr[1].get<std::string>()});
      }
      ev.ground_truth = ej.at("ground_truth").get<std::string>();
      evidence_.push_back(std::move(ev));
    }
    restore_transcript(j.at("transcript").get<std::string>());
    restore_report(j.at("report"), j.at("bucket_scores"), j.at("task_csis"));
    cost_trace_.per_round.clear();
    for (const auto& rj : j.at("cost_rounds")) {
      CostTraceRound r;
      r.round = rj.at("round").get<int>();
      r.inbound_tokens = rj.at("inbound").get<long long>();
      r.validated_tokens = rj.at("validated").get<long long>();
      r.junk_added_tokens = rj.at("junk_added").get<long long>();
      r.accepted_level = rj.at("accepted_level").get<int>();
      r.layer_tokens = rj.at("layers").get<std::vector<long long>>();
      r.junk_tokens = rj.at("junk").get<long long>();
      r.sweep = rj.at("sweep").get<bool>();
      cost_trace_.per_round.push_back(std::move(r));
    }
    audit_lines_ = j.at("audit").get<std::vector<std::string>>();
  }

  void restore_transcript(const std::string& jsonl) {
    transcript_.preamble = jsonl;
    transcript_.events.clear();
  }

  void restore_report(const nlohmann::json& rj, const nlohmann::json& buckets,
                      const nlohmann::json& task_csis) {
    report_ = RunReport{};
    report_.scenario_name = rj.at("scenario").get<std::string>();
    report_.ledger.attacks_total = rj.at("attacks_total").get<long long>();
    report_.ledger.defended = rj.at("defended").get<long long>();
    for (const auto& [name, td] : rj.at("per_kind").items()) {
      report_.ledger.per_kind[attack_kind_from_name(name)] = {
          td.at("total").get<long long>(), td.at("defended").get<long long>()};
    }
    for (const auto& b : buckets) {
      auto& score = report_.buckets[attack_kind_from_name(
          b.at("kind").get<std::string>())][b.at("turn").get<int>()];
      score.total = b.at("total").get<long long>();
      score.defended = b.at("defended").get<long long>();
    }
    report_.task_csis = task_csis.get<std::vector<double>>();
    report_.tokens_leveled = rj.at("tokens").at("leveled").get<long long>();
    report_.tokens_stored_flat = rj.at("tokens").at("flat").get<long long>();
    report_.tokens_junked = rj.at("tokens").at("junked").get<long long>();
    report_.tokens_blocked = rj.at("tokens").at("blocked").get<long long>();
    report_.messages_total = rj.at("messages").at("total").get<long long>();
    report_.messages_blocked = rj.at("messages").at("blocked").get<long long>();
    report_.plans_skipped = rj.at("plans_skipped").get<long long>();
  }

  ScenarioConfig cfg_;
  BackendPtr backend_;
  Dataset dataset_;
  Topology topology_;
  LevelMap level_map_;
  int level_count_ = kDefaultLevelCount;
  int attacker_ = 0;
  IdentityRegistry registry_;
  std::vector<std::string> library_;
  std::map<int, HierarCache> caches_;
  std::map<int, std::vector<Message>> flat_;
  std::vector<AttackPlan> plans_;
  std::vector<PlanEvidence> evidence_;
  Rng rng_;
  Transcript transcript_;
  RunReport report_;
  CostTrace cost_trace_;
  std::vector<std::string> audit_lines_;
  int start_round_ = 0;
  int round_accepted_level_ = 0;
};

inline BackendPtr ScenarioRunner::make_backend(const ScenarioConfig& cfg) {
  if (cfg.backend == BackendKind::RemoteChat) {
    RemoteConfig remote = remote_config_from_env();
    remote.trace = cfg.trace;
    return make_remote_backend(std::move(remote));
  }
  return make_mock_backend(cfg.embed_dim, cfg.seed);
}

inline RunResult run_scenario(const ScenarioConfig& cfg,
                              BackendPtr backend_override = nullptr) {
  ScenarioRunner runner(cfg, std::move(backend_override));
  return runner.run();
}

inline RunResult resume_scenario(const ScenarioConfig& cfg,
                                 const nlohmann::json& checkpoint,
                                 BackendPtr backend_override = nullptr) {
  ScenarioRunner runner(cfg, std::move(backend_override));
  return runner.resume(checkpoint);
}

}  // namespace agentsafe
