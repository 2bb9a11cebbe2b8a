#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "agentsafe/suites.hpp"

namespace agentsafe {
namespace {

std::string data_dir() { return AGENTSAFE_DATA_DIR; }

ScenarioConfig small_scenario(const std::string& condition, int rounds = 15) {
  ScenarioConfig cfg = suites::base_scenario(data_dir(), SchemaKind::RIOH, 7, rounds);
  cfg.name = "test/" + condition;
  cfg.defenses = suites::defenses_named(condition);
  cfg.attacks = suites::specs_for_kind(AttackKind::IABT, SchemaKind::RIOH, 7);
  {
    AttackSpecConfig ii;
    ii.kind = AttackKind::II;
    ii.seed = 900;
    ii.beta = 0.5;
    cfg.attacks.push_back(ii);
  }
  return cfg;
}

/// Delegates to the mock until a set number of embeddings, then stays down.
class FailingBackend : public Backend {
public:
  explicit FailingBackend(int fail_at) : fail_at_(fail_at) {}
  BackendKind kind() const override { return BackendKind::DeterministicMock; }
  EmbeddingVector embed(const std::string& text) override {
    if (++calls_ >= fail_at_) {
      throw BackendError("injected outage", true);
    }
    return inner_.embed(text);
  }
  std::vector<std::string> extract(const std::string& c, const std::string& p,
                                   const std::string& r) override {
    return inner_.extract(c, p, r);
  }
  JudgeVerdict judge(const ReflectionPrompt& p, const std::string& payload) override {
    return inner_.judge(p, payload);
  }

private:
  MockBackend inner_;
  int fail_at_;
  int calls_ = 0;
};

TEST(Runner, SameSeedSameBytes) {
  ScenarioConfig cfg = small_scenario("agentsafe");
  RunResult a = run_scenario(cfg);
  RunResult b = run_scenario(cfg);
  EXPECT_EQ(a.transcript.to_jsonl(), b.transcript.to_jsonl());
  EXPECT_EQ(a.report.to_json().dump(), b.report.to_json().dump());
}

TEST(Runner, DifferentSeedsDiverge) {
  ScenarioConfig cfg = small_scenario("agentsafe");
  RunResult a = run_scenario(cfg);
  cfg.seed = 8;
  RunResult b = run_scenario(cfg);
  EXPECT_NE(a.transcript.to_jsonl(), b.transcript.to_jsonl());
}

TEST(Runner, PassThroughWithoutDefensesOrAttacks) {
  ScenarioConfig cfg = suites::base_scenario(data_dir(), SchemaKind::RIOH, 3, 6);
  cfg.name = "passthrough";
  cfg.defenses = {false, true, false};  // claimed-level storage, no gatekeeper
  RunResult run = run_scenario(cfg);

  EXPECT_EQ(run.report.ledger.attacks_total, 0);
  EXPECT_EQ(run.report.messages_blocked, 0);
  // Every benign message sits in the layer it claimed.
  ScenarioRunner probe(cfg);
  RunResult again = probe.run();
  for (const auto& node : probe.topology().nodes()) {
    const HierarCache& cache = probe.cache_of(node.index);
    for (int lvl = 1; lvl <= 4; ++lvl) {
      for (const auto& entry : cache.layer(lvl)) {
        EXPECT_EQ(entry.message.assigned_level.value, lvl);
      }
    }
  }
  (void)again;
}

TEST(Runner, BaselineKeepsNoAuditLog) {
  ScenarioConfig cfg = small_scenario("baseline", 10);
  ScenarioRunner runner(cfg);
  RunResult run = runner.run();
  EXPECT_TRUE(runner.audit_log().empty());
  EXPECT_GT(run.report.tokens_stored_flat, 0);
  EXPECT_EQ(run.report.tokens_leveled, 0);
}

TEST(Runner, AgentSafeAuditsEveryDeliveredMessage) {
  ScenarioConfig cfg = small_scenario("agentsafe", 10);
  ScenarioRunner runner(cfg);
  RunResult run = runner.run();
  EXPECT_EQ(static_cast<long long>(runner.audit_log().size()),
            run.report.messages_total);
}

TEST(Runner, LoopPhasesAreOrderedWithinRounds) {
  ScenarioConfig cfg = small_scenario("agentsafe", 15);
  RunResult run = run_scenario(cfg);
  std::map<int, int> phase;  // round -> highest phase seen so far
  auto phase_of = [](const TranscriptEvent& e) {
    switch (e.type) {
      case EventType::Message:
      case EventType::Blocked: return 1;
      case EventType::Sweep: return 2;
      case EventType::Task:
      case EventType::AttackEval: return 3;
    }
    return 0;
  };
  std::set<int> sweep_rounds;
  for (const auto& e : run.transcript.events) {
    int p = phase_of(e);
    EXPECT_GE(p, phase[e.round]) << "round " << e.round;
    phase[e.round] = std::max(phase[e.round], p);
    if (e.type == EventType::Sweep) sweep_rounds.insert(e.round);
  }
  for (int t = 1; t <= cfg.rounds; ++t) {
    EXPECT_EQ(sweep_rounds.count(t) > 0, t % cfg.sweep_every == 0) << t;
  }
}

TEST(Runner, FlowConstraintHoldsUnderFullDefenses) {
  ScenarioConfig cfg = small_scenario("agentsafe", 12);
  ScenarioRunner runner(cfg);
  runner.run();
  const Topology& topo = runner.topology();
  const Dataset& ds = runner.dataset();
  for (const auto& node : topo.nodes()) {
    const HierarCache& cache = runner.cache_of(node.index);
    for (int lvl = 1; lvl <= 4; ++lvl) {
      for (const auto& entry : cache.layer(lvl)) {
        SecurityLevel cl = clearance(
            topo, ds.level_map,
            topo.nodes()[static_cast<std::size_t>(entry.message.sender)], node);
        EXPECT_LE(lvl, cl.value)
            << node.name << " holds a level-" << lvl << " entry from "
            << topo.nodes()[static_cast<std::size_t>(entry.message.sender)].name;
      }
    }
  }
}

TEST(Runner, LedgerMatchesRecountFromTranscript) {
  ScenarioConfig cfg = small_scenario("agentsafe", 15);
  RunResult run = run_scenario(cfg);
  long long total = 0, defended = 0;
  for (const auto& e : run.transcript.events) {
    if (e.type != EventType::AttackEval) continue;
    ++total;
    if (!e.succeeded) ++defended;
  }
  EXPECT_EQ(run.report.ledger.attacks_total, total);
  EXPECT_EQ(run.report.ledger.defended, defended);
  EXPECT_GT(total, 0);
}

TEST(Runner, RepliesRespectTheRequesterClearance) {
  // With the cache on, replies to a stranger only ever carry level-1 content.
  ScenarioConfig cfg = small_scenario("agentsafe", 10);
  ScenarioRunner runner(cfg);
  RunResult run = runner.run();
  const Dataset& ds = runner.dataset();
  for (const auto& e : run.transcript.events) {
    if (e.type != EventType::Message || !e.is_reply) continue;
    if (e.msg.content == kRefusalText) continue;
    // Replies that quote a dataset fact must come from level 1 for Alice.
    for (const auto& agent : ds.agents) {
      for (const auto& [kind, facts] : agent.facts) {
        for (const auto& f : facts) {
          if (f == e.msg.content) {
            EXPECT_EQ(ds.level_of(kind).value, 1) << f;
          }
        }
      }
    }
  }
}

TEST(Runner, CheckpointResumeReproducesTheRun) {
  namespace fs = std::filesystem;
  std::string tmp = (fs::temp_directory_path() / "agentsafe_ckpt_test").string();
  fs::remove_all(tmp);

  ScenarioConfig cfg = small_scenario("agentsafe", 12);
  RunResult uninterrupted = run_scenario(cfg);

  ScenarioConfig failing_cfg = cfg;
  failing_cfg.out_dir = tmp;
  auto failing = std::make_shared<FailingBackend>(4000);
  EXPECT_THROW(run_scenario(failing_cfg, failing), BackendError);
  ASSERT_TRUE(fs::exists(tmp + "/checkpoint.json"));

  std::ifstream in(tmp + "/checkpoint.json", std::ios::binary);
  nlohmann::json checkpoint = nlohmann::json::parse(in);
  int completed = checkpoint.at("completed_round").get<int>();
  EXPECT_GT(completed, 0);
  EXPECT_LT(completed, cfg.rounds);

  ScenarioConfig resume_cfg = cfg;  // out_dir empty: plain continuation
  RunResult resumed = resume_scenario(resume_cfg, checkpoint);
  EXPECT_EQ(resumed.transcript.to_jsonl(), uninterrupted.transcript.to_jsonl());
  EXPECT_EQ(resumed.report.to_json().dump(), uninterrupted.report.to_json().dump());
  fs::remove_all(tmp);
}

TEST(Runner, SnapshotFilesWrittenPerRound) {
  namespace fs = std::filesystem;
  std::string tmp = (fs::temp_directory_path() / "agentsafe_snap_test").string();
  fs::remove_all(tmp);
  ScenarioConfig cfg = small_scenario("agentsafe", 6);
  cfg.snapshot = true;
  cfg.trace = true;
  cfg.out_dir = tmp;
  run_scenario(cfg);
  for (int t = 1; t <= 6; ++t) {
    char name[64];
    std::snprintf(name, sizeof(name), "%s/snapshots/round_%04d.json", tmp.c_str(), t);
    EXPECT_TRUE(fs::exists(name)) << name;
  }
  EXPECT_TRUE(fs::exists(tmp + "/audit.jsonl"));
  EXPECT_TRUE(fs::exists(tmp + "/transcript.jsonl"));
  fs::remove_all(tmp);
}

TEST(Runner, ReplayedPlanDrivesTheRun) {
  ScenarioConfig cfg = suites::base_scenario(data_dir(), SchemaKind::RIOH, 7, 10);
  cfg.defenses = suites::defenses_named("baseline");
  {
    AttackSpecConfig a;
    a.kind = AttackKind::AM;
    a.seed = 321;
    cfg.attacks.push_back(a);
  }
  ScenarioRunner first(cfg);
  nlohmann::json plan_json = plan_to_json(first.plans()[0]);
  RunResult direct = first.run();

  ScenarioConfig replay_cfg = cfg;
  replay_cfg.attacks.clear();
  replay_cfg.replay_plans.push_back(plan_from_json(plan_json));
  RunResult replayed = run_scenario(replay_cfg);
  EXPECT_EQ(replayed.transcript.to_jsonl(), direct.transcript.to_jsonl());
}

TEST(Runner, ConfigProblemsSurfaceThroughTheRunner) {
  ScenarioConfig cfg;  // no dataset at all
  cfg.rounds = 0;
  EXPECT_THROW(run_scenario(cfg), ConfigError);
}

TEST(Runner, IntegrityRatioFavorsTheDefendedCondition) {
  // CSR on the corruption suite: recall similarity relative to the original
  // message (the fact itself, reference similarity 1).
  auto run_condition = [&](const std::string& cond) {
    ScenarioConfig cfg = suites::base_scenario(data_dir(), SchemaKind::RIOH, 7, 20);
    cfg.name = "csr/" + cond;
    cfg.defenses = suites::defenses_named(cond);
    cfg.attacks = suites::specs_for_kind(AttackKind::II, SchemaKind::RIOH, 7);
    RunResult run = run_scenario(cfg);
    auto backend = make_mock_backend();
    double sum = 0.0;
    long long count = 0;
    for (const auto& e : run.transcript.events) {
      if (e.type != EventType::Task) continue;
      double reference = csi(e.ground_truth, e.ground_truth, *backend);
      sum += csr(e.task_csi, reference);
      ++count;
    }
    return sum / static_cast<double>(count);
  };
  EXPECT_GT(run_condition("agentsafe"), run_condition("baseline"));
}

TEST(Suites, Rq1RerunsAreByteIdentical) {
  Rq1Result a = run_rq1_suite(data_dir(), 7, 15);
  Rq1Result b = run_rq1_suite(data_dir(), 7, 15);
  EXPECT_EQ(a.csv, b.csv);
  EXPECT_FALSE(a.csv.empty());
}

TEST(Suites, Rq4GridHasFullShape) {
  GridResult grid = run_rq4_suite(data_dir(), 7, 8);
  int rows = 0;
  for (char c : grid.csv) {
    if (c == '\n') ++rows;
  }
  EXPECT_EQ(rows, 1 + 4 * 7 * 2);  // header + topologies x counts x conditions
}

TEST(Suites, UnknownSuiteListsValidNames) {
  try {
    run_suite("rq9", data_dir(), "/tmp/agentsafe_suite_none", 7);
    FAIL() << "expected InvalidArgument";
  } catch (const InvalidArgument& e) {
    std::string what = e.what();
    EXPECT_NE(what.find("rq1"), std::string::npos);
    EXPECT_NE(what.find("sweep_ablation"), std::string::npos);
  }
}

TEST(Suites, SyntheticRosterKeepsCalibration) {
  Dataset base = load_dataset(data_dir() + "/rioh_mini.json", SchemaKind::RIOH);
  Dataset synth = synthetic_dataset(base, 10, 3);
  EXPECT_EQ(synth.agents.size(), 10u);
  auto backend = make_mock_backend();
  auto lib = default_instruction_library(SchemaKind::RIOH);
  for (const auto& agent : synth.agents) {
    for (int lvl = 1; lvl <= 4; ++lvl) {
      const auto& facts = synth.facts_at(agent.name, SecurityLevel{lvl});
      EXPECT_EQ(facts.size(), 3u) << agent.name;
      for (const auto& f : facts) {
        EXPECT_TRUE(detect(make_message(0, 1, f, SecurityLevel{1}, 1), lib, 0.35,
                           *backend))
            << f;
      }
    }
  }
}

}  // namespace
}  // namespace agentsafe
