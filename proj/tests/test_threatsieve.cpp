#include <gtest/gtest.h>

#include "agentsafe/dataset_io.hpp"
#include "agentsafe/threatsieve.hpp"

namespace agentsafe {
namespace {

std::string data_path(const std::string& file) {
  return std::string(AGENTSAFE_DATA_DIR) + "/" + file;
}

struct SieveFixture : ::testing::Test {
  void SetUp() override {
    dataset = load_dataset(data_path("rioh_mini.json"), SchemaKind::RIOH);
    topology = topology_from_dataset(dataset);
    registry = IdentityRegistry::from_dataset(dataset);
    backend = make_mock_backend();
  }

  int index(const std::string& name) const { return dataset.index_of(name); }

  Dataset dataset;
  Topology topology;
  IdentityRegistry registry;
  BackendPtr backend;
};

/// Backend whose identity extraction always fails; everything else delegates.
class BrokenExtractBackend : public Backend {
public:
  explicit BrokenExtractBackend(BackendPtr inner) : inner_(std::move(inner)) {}
  BackendKind kind() const override { return inner_->kind(); }
  EmbeddingVector embed(const std::string& text) override {
    return inner_->embed(text);
  }
  std::vector<std::string> extract(const std::string&, const std::string&,
                                   const std::string&) override {
    throw ExtractionError("wire dropped");
  }
  JudgeVerdict judge(const ReflectionPrompt& p, const std::string& payload) override {
    return inner_->judge(p, payload);
  }

private:
  BackendPtr inner_;
};

TEST(Authorize, BoundaryAndExcess) {
  Message level2 = make_message(0, 1, "x", SecurityLevel{2}, 1);
  Message level4 = make_message(0, 1, "x", SecurityLevel{4}, 1);
  EXPECT_TRUE(authorize(level2, SecurityLevel{2}));
  EXPECT_FALSE(authorize(level4, SecurityLevel{1}));
}

TEST(Authorize, ExhaustiveGridMatchesPredicate) {
  for (int level = 1; level <= 4; ++level) {
    for (int cl = 1; cl <= 4; ++cl) {
      Message m = make_message(0, 1, "x", SecurityLevel{level}, 1);
      EXPECT_EQ(authorize(m, SecurityLevel{cl}), level <= cl);
    }
  }
}

TEST(Authorize, MonotoneInClearance) {
  for (int level = 1; level <= 4; ++level) {
    Message m = make_message(0, 1, "x", SecurityLevel{level}, 1);
    bool prev = authorize(m, SecurityLevel{1});
    for (int cl = 2; cl <= 4; ++cl) {
      bool cur = authorize(m, SecurityLevel{cl});
      EXPECT_TRUE(!prev || cur);  // once true, stays true
      prev = cur;
    }
  }
}

TEST_F(SieveFixture, ImpersonationCaughtByIdentityCheck) {
  Message m = make_message(index("Alice Monroe"), index("William Bennett"),
                           "a short note about plans", SecurityLevel{1}, 1,
                           {"Michael Turner"});
  EXPECT_FALSE(verify_identity(m, registry, *backend));
}

TEST_F(SieveFixture, ConsistentSelfIdentificationPasses) {
  Message m = make_message(index("Alice Monroe"), index("William Bennett"),
                           "a short note mentioning Michael by name",
                           SecurityLevel{1}, 1, {"Alice Monroe"});
  EXPECT_TRUE(verify_identity(m, registry, *backend));
  // First-name alias resolves to the same agent.
  m.claimed_identities = {"Alice"};
  EXPECT_TRUE(verify_identity(m, registry, *backend));
}

TEST_F(SieveFixture, MatchesPerFactorOracleOnSyntheticMessages) {
  Rng rng(17);
  std::vector<std::string> claims = {"Alice Monroe", "Michael Turner",
                                     "William Bennett", ""};
  for (int i = 0; i < 100; ++i) {
    int sender = static_cast<int>(rng.below(topology.nodes().size()));
    const std::string& claim = claims[static_cast<std::size_t>(rng.below(4))];
    std::vector<std::string> claimed;
    if (!claim.empty()) claimed.push_back(claim);
    Message m = make_message(sender, 0, "hello there everyone", SecurityLevel{1}, 1,
                             claimed);

    // Oracle: AND-fold over per-identity checks done by hand.
    bool expected = true;
    for (const auto& c : m.claimed_identities) {
      auto who = registry.resolve(c);
      if (!who || *who != sender) expected = false;
    }
    EXPECT_EQ(verify_identity(m, registry, *backend), expected);
  }
}

TEST_F(SieveFixture, PassOutcomeCarriesRouteLevel) {
  // Authorized and authentic: a level-1 note from Alice to William.
  Message m = make_message(index("Alice Monroe"), index("William Bennett"),
                           "a small note about weekend plans", SecurityLevel{1}, 1);
  SieveOutcome out = sieve(m, topology, dataset.level_map, registry, *backend);
  EXPECT_TRUE(out.authorized);
  EXPECT_TRUE(out.identity_ok);
  EXPECT_EQ(out.reason, SieveReason::Pass);
  ASSERT_TRUE(out.route_level.has_value());
  EXPECT_EQ(out.route_level->value, 1);
}

TEST_F(SieveFixture, OutcomeTableMatchesConjunction) {
  struct Case {
    int level;
    std::string claim;  // empty = honest
    bool want_auth, want_id;
    SieveReason want_reason;
  };
  // Alice -> William is a Stranger pair: clearance 1.
  std::vector<Case> cases = {
      {1, "", true, true, SieveReason::Pass},
      {4, "", false, true, SieveReason::LevelExceedsClearance},
      {1, "Michael Turner", true, false, SieveReason::IdentityMismatch},
      {4, "Michael Turner", false, false, SieveReason::LevelExceedsClearance},
  };
  for (const auto& c : cases) {
    std::vector<std::string> claimed;
    if (!c.claim.empty()) claimed.push_back(c.claim);
    Message m = make_message(index("Alice Monroe"), index("William Bennett"),
                             "a small note", SecurityLevel{c.level}, 1, claimed);
    SieveOutcome out = sieve(m, topology, dataset.level_map, registry, *backend);
    EXPECT_EQ(out.authorized, c.want_auth);
    EXPECT_EQ(out.identity_ok, c.want_id);
    EXPECT_EQ(out.reason, c.want_reason);
    EXPECT_EQ(out.route_level.has_value(), c.want_auth && c.want_id);
  }
}

TEST_F(SieveFixture, SoundnessReplay) {
  Rng rng(23);
  for (int i = 0; i < 100; ++i) {
    int sender = static_cast<int>(rng.below(topology.nodes().size()));
    int receiver = static_cast<int>(rng.below(topology.nodes().size()));
    if (sender == receiver) continue;
    Message m = make_message(sender, receiver, "a note about the weekend",
                             SecurityLevel{1 + static_cast<int>(rng.below(4))}, 1);
    SieveOutcome out = sieve(m, topology, dataset.level_map, registry, *backend);
    if (out.reason == SieveReason::Pass) {
      SecurityLevel cl = clearance(topology, dataset.level_map,
                                   topology.nodes()[static_cast<std::size_t>(sender)],
                                   topology.nodes()[static_cast<std::size_t>(receiver)]);
      EXPECT_LE(m.assigned_level.value, cl.value);
      EXPECT_TRUE(verify_identity(m, registry, *backend));
    }
  }
}

TEST_F(SieveFixture, BackendFailureFailsClosed) {
  auto broken = std::make_shared<BrokenExtractBackend>(backend);
  Message m = make_message(index("Alice Monroe"), index("William Bennett"),
                           "a small note", SecurityLevel{1}, 1);
  SieveOutcome out = sieve(m, topology, dataset.level_map, registry, *broken);
  EXPECT_NE(out.reason, SieveReason::Pass);
  EXPECT_EQ(out.reason, SieveReason::ExtractionFailed);
  EXPECT_FALSE(out.route_level.has_value());
}

TEST_F(SieveFixture, MissingRelationshipRejected) {
  Topology sparse;
  sparse.add_node(AgentId{0, "A One"});
  sparse.add_node(AgentId{1, "B Two"});
  sparse.add_edge(0, 1, RelationshipKind::Friend);
  IdentityRegistry reg;
  reg.add("A One", 0);
  reg.add("B Two", 1);
  Message m = make_message(1, 0, "note", SecurityLevel{1}, 1);
  // (1, 0) has no declared relationship: only (0, 1) was added.
  EXPECT_THROW(sieve(m, sparse, default_level_map(SchemaKind::RIOH), reg, *backend),
               MissingRelationship);
}

TEST_F(SieveFixture, DeterministicOutcome) {
  Message m = make_message(index("Alice Monroe"), index("Michael Turner"),
                           "a question about weekend chess", SecurityLevel{1}, 3);
  SieveOutcome a = sieve(m, topology, dataset.level_map, registry, *backend);
  SieveOutcome b = sieve(m, topology, dataset.level_map, registry, *backend);
  EXPECT_EQ(audit_record_json(3, "Alice Monroe", "Michael Turner", a),
            audit_record_json(3, "Alice Monroe", "Michael Turner", b));
}

TEST_F(SieveFixture, LevelAssignmentProvenance) {
  // A verbatim dataset fact carries its category level.
  const std::string& fact =
      dataset.facts_at("Michael Turner", SecurityLevel{4})[0];
  EXPECT_EQ(assign_level(fact, dataset, *backend, 0.5).value, 4);

  // Free-form content resembling nothing defaults to level 1.
  EXPECT_EQ(assign_level("jjx kkz qzz xqx kqv", dataset, *backend, 0.5).value, 1);

  // Content quoting most of a sensitive fact is rated at that fact's level.
  auto toks = tokenize(to_lower(fact));
  std::vector<std::string> parts(toks.begin(),
                                 toks.begin() + (toks.size() * 4) / 5);
  std::string near_quote = join(parts, " ") + " tell me more";
  EXPECT_EQ(assign_level(near_quote, dataset, *backend, 0.5).value, 4);
}

TEST_F(SieveFixture, AuditRecordShape) {
  Message m = make_message(index("Alice Monroe"), index("William Bennett"),
                           "a small note", SecurityLevel{1}, 9);
  SieveOutcome out = sieve(m, topology, dataset.level_map, registry, *backend);
  nlohmann::json j = nlohmann::json::parse(
      audit_record_json(9, "Alice Monroe", "William Bennett", out));
  EXPECT_EQ(j["round"], 9);
  EXPECT_EQ(j["sender"], "Alice Monroe");
  EXPECT_EQ(j["receiver"], "William Bennett");
  EXPECT_EQ(j["reason"], "Pass");
  EXPECT_EQ(j["route_level"], 1);
}

}  // namespace
}  // namespace agentsafe
