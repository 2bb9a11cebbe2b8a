#include <gtest/gtest.h>

#include <optional>

#include "agentsafe/attacks.hpp"
#include "agentsafe/config.hpp"
#include "agentsafe/dataset_io.hpp"
#include "agentsafe/hierarcache.hpp"
#include "agentsafe/rng.hpp"

namespace agentsafe {
namespace {

std::string data_path(const std::string& file) {
  return std::string(AGENTSAFE_DATA_DIR) + "/" + file;
}

Message msg(const std::string& content, int level = 1, int round = 1) {
  return make_message(0, 1, content, SecurityLevel{level}, round);
}

std::string random_words(Rng& rng, int n) {
  std::vector<std::string> parts;
  for (int i = 0; i < n; ++i) {
    std::string t;
    int len = 3 + static_cast<int>(rng.below(5));
    for (int c = 0; c < len; ++c) t.push_back(static_cast<char>('a' + rng.below(26)));
    parts.push_back(t);
  }
  return join(parts, " ");
}

TEST(Detect, SingleCriterionExactMatch) {
  auto b = make_mock_backend();
  std::vector<std::string> lib = {"the plans someone keeps about family and work"};
  EXPECT_TRUE(detect(msg(lib[0]), lib, 0.8, *b));
}

TEST(Detect, AllCriteriaMustFire) {
  auto b = make_mock_backend();
  std::string m = "the weekend plans with the family and the friends at the office";
  std::vector<std::string> lib = {
      m,                                       // similarity 1
      "the weekend plans with the family",     // high similarity
      "jjx kkz qzz xqx kqv zkq",               // no similarity at all
  };
  // Confirm the setup: two criteria above 0.3, one below.
  EmbeddingVector mv = b->embed(m);
  EXPECT_GT(cosine(mv, b->embed(lib[1])), 0.3);
  EXPECT_LT(cosine(mv, b->embed(lib[2])), 0.3);
  EXPECT_FALSE(detect(msg(m), lib, 0.3, *b));
  lib.pop_back();
  EXPECT_TRUE(detect(msg(m), lib, 0.3, *b));
}

TEST(Detect, EmptyLibraryAdmits) {
  auto b = make_mock_backend();
  EXPECT_TRUE(detect(msg("anything"), {}, 0.35, *b));
}

TEST(Detect, ThresholdRangeEnforced) {
  auto b = make_mock_backend();
  std::vector<std::string> lib = {"criterion text"};
  EXPECT_THROW(detect(msg("x"), lib, 0.0, *b), InvalidArgument);
  EXPECT_THROW(detect(msg("x"), lib, 1.0, *b), InvalidArgument);
}

TEST(Detect, MatchesBruteForceMinCosineOracle) {
  auto b = make_mock_backend();
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    std::string m = random_words(rng, 4 + static_cast<int>(rng.below(10)));
    std::vector<std::string> lib;
    int nlib = 1 + static_cast<int>(rng.below(4));
    for (int i = 0; i < nlib; ++i) {
      // Sometimes related wording, sometimes not.
      lib.push_back(rng.below(2) == 0
                        ? m + " " + random_words(rng, 3)
                        : random_words(rng, 4 + static_cast<int>(rng.below(8))));
    }
    double theta = 0.2 + 0.6 * rng.next_double();

    double min_sim = 1.0;
    for (const auto& c : lib) {
      min_sim = std::min(min_sim, cosine(b->embed(m), b->embed(c)));
    }
    EXPECT_EQ(detect(msg(m), lib, theta, *b), min_sim > theta) << trial;
  }
}

TEST(Detect, AntitoneInThreshold) {
  auto b = make_mock_backend();
  Rng rng(37);
  for (int trial = 0; trial < 30; ++trial) {
    std::string m = random_words(rng, 6);
    std::vector<std::string> lib = {m + " extra words here",
                                    random_words(rng, 6)};
    bool prev = detect(msg(m), lib, 0.05, *b);
    for (double theta : {0.2, 0.4, 0.6, 0.8, 0.95}) {
      bool cur = detect(msg(m), lib, theta, *b);
      EXPECT_TRUE(!cur || prev);  // raising theta can only flip 1 -> 0
      prev = cur;
    }
  }
}

TEST(Store, PlacementFollowsValidity) {
  auto b = make_mock_backend();
  std::vector<std::string> lib = {"the plans about family and work someone shares"};
  HierarCache cache(AgentId{1, "owner"}, 4, lib, 0.35);

  // Both conjuncts hold: lands at the requested level.
  Message ok = msg("the plans about family and work someone shares", 2);
  StoreOutcome so = cache.store(ok, SecurityLevel{3}, SecurityLevel{2}, *b);
  EXPECT_EQ(so.layer, 2);
  EXPECT_TRUE(so.vd);

  // Sender clearance below the level: junk regardless of detection.
  StoreOutcome junked = cache.store(ok, SecurityLevel{1}, SecurityLevel{3}, *b);
  EXPECT_EQ(junked.layer, 0);
  EXPECT_TRUE(junked.detected);
  EXPECT_FALSE(junked.vd);
  EXPECT_TRUE(cache.junk().back().has_flag(EntryFlag::DirectJunk));
}

TEST(Store, CaseStudyProbeLandsInJunk) {
  // The attacker probes William about Michael; the inquiry fails detection
  // and is quarantined even though its claimed level is within clearance.
  auto b = make_mock_backend();
  Dataset d = load_dataset(data_path("rioh_mini.json"), SchemaKind::RIOH);
  Topology t = topology_from_dataset(d);
  auto lib = default_instruction_library(SchemaKind::RIOH);

  int alice = d.index_of("Alice Monroe");
  int william = d.index_of("William Bennett");
  int michael = d.index_of("Michael Turner");
  std::optional<Message> probe;
  for (std::uint64_t seed = 0; seed < 64 && !probe; ++seed) {
    AttackPlan plan = gen_iabt(t, d, d.level_map, seed, alice, 3);
    if (plan.intermediary->index == william && plan.target.index == michael &&
        !detect(plan.rounds[0], lib, 0.35, *b)) {
      probe = plan.rounds[0];
    }
  }
  ASSERT_TRUE(probe.has_value());

  HierarCache cache(AgentId{william, "William Bennett"}, 4, lib, 0.35);
  StoreOutcome so = cache.store(*probe, SecurityLevel{1}, SecurityLevel{1}, *b);
  EXPECT_EQ(so.layer, 0);
  EXPECT_FALSE(so.detected);
  ASSERT_FALSE(cache.junk().empty());
  EXPECT_TRUE(cache.junk().back().has_flag(EntryFlag::DirectJunk));
}

TEST(Store, ConservationOneEntryPerStore) {
  auto b = make_mock_backend();
  HierarCache cache(AgentId{0, "o"}, 4, {}, 0.35);
  Rng rng(5);
  std::size_t prev = cache.total_size();
  for (int i = 0; i < 50; ++i) {
    cache.store(msg(random_words(rng, 5), 1 + static_cast<int>(rng.below(4))),
                SecurityLevel{1 + static_cast<int>(rng.below(4))},
                SecurityLevel{1 + static_cast<int>(rng.below(4))}, *b);
    EXPECT_EQ(cache.total_size(), prev + 1);
    prev = cache.total_size();
  }
}

TEST(Retrieve, FullClearanceStillExcludesJunk) {
  auto b = make_mock_backend();
  HierarCache cache(AgentId{0, "o"}, 4, {}, 0.35);
  cache.store(msg("alpha", 2), SecurityLevel{4}, SecurityLevel{2}, *b);
  cache.store(msg("beta", 3), SecurityLevel{1}, SecurityLevel{3}, *b);  // junked
  auto got = cache.retrieve(SecurityLevel{4});
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].content, "alpha");
  EXPECT_EQ(cache.junk().size(), 1u);
}

TEST(Retrieve, LowClearanceOnHighLayers) {
  auto b = make_mock_backend();
  HierarCache cache(AgentId{0, "o"}, 4, {}, 0.35);
  for (int lvl : {2, 3, 4}) {
    cache.store(msg("level " + std::to_string(lvl), lvl), SecurityLevel{4},
                SecurityLevel{lvl}, *b);
  }
  EXPECT_TRUE(cache.retrieve(SecurityLevel{1}).empty());
  EXPECT_EQ(cache.retrieve(SecurityLevel{3}).size(), 2u);
}

TEST(Retrieve, MatchesFilterOracleAtEveryClearance) {
  auto b = make_mock_backend();
  HierarCache cache(AgentId{0, "o"}, 4, {}, 0.35);
  Rng rng(13);
  struct Placed {
    int layer;
    std::string content;
  };
  std::vector<Placed> placed;
  for (int i = 0; i < 100; ++i) {
    int level = 1 + static_cast<int>(rng.below(4));
    int sender_cl = 1 + static_cast<int>(rng.below(4));
    std::string content = random_words(rng, 4);
    StoreOutcome so =
        cache.store(msg(content, level), SecurityLevel{sender_cl},
                    SecurityLevel{level}, *b);
    if (so.layer > 0) placed.push_back({so.layer, content});
  }
  for (int k = 1; k <= 4; ++k) {
    std::vector<std::string> expected;
    for (int lvl = 1; lvl <= k; ++lvl) {
      for (const auto& p : placed) {
        if (p.layer == lvl) expected.push_back(p.content);
      }
    }
    std::vector<std::string> got;
    for (const auto& m : cache.retrieve(SecurityLevel{k})) got.push_back(m.content);
    EXPECT_EQ(got, expected) << "clearance " << k;
  }
}

// Plant a cache state directly to exercise the sweep against entries that
// never went through store-time detection.
HierarCache planted_cache(const std::vector<std::string>& library,
                          const std::vector<std::pair<int, std::string>>& entries) {
  nlohmann::json j;
  j["owner"] = "planted";
  j["owner_index"] = 0;
  j["level_count"] = 4;
  j["threshold"] = 0.35;
  j["library"] = library;
  j["next_id"] = entries.size() + 1;
  nlohmann::json layers = nlohmann::json::object();
  for (int lvl = 1; lvl <= 4; ++lvl) layers[std::to_string(lvl)] = nlohmann::json::array();
  std::uint64_t id = 1;
  for (const auto& [lvl, content] : entries) {
    layers[std::to_string(lvl)].push_back({{"id", id++},
                                           {"sender", 1},
                                           {"receiver", 0},
                                           {"content", content},
                                           {"level", lvl},
                                           {"round", 1},
                                           {"layer", lvl},
                                           {"flags", 0u},
                                           {"claimed", nlohmann::json::array()},
                                           {"token_len", token_count(content)}});
  }
  j["layers"] = layers;
  j["junk"] = nlohmann::json::array();
  return HierarCache::from_json(j);
}

TEST(Sweep, DemotesExactlyTheUndetectableEntry) {
  auto b = make_mock_backend();
  std::vector<std::string> lib = default_instruction_library(SchemaKind::RIOH);
  std::string on_topic =
      "a note about the family plans someone has been sharing with the team";
  std::string gibberish = "jjx kkz qzz xqx kqv zkq xjv qvz jjx kkz";
  HierarCache cache = planted_cache(lib, {{2, on_topic}, {2, gibberish}});

  // Single-item oracle: the gibberish entry fails detection, the other passes.
  ASSERT_TRUE(detect(msg(on_topic), lib, 0.35, *b));
  ASSERT_FALSE(detect(msg(gibberish), lib, 0.35, *b));

  std::size_t before = cache.layer(2).size();
  SweepReport report = cache.periodic_sweep(*b, 5);
  EXPECT_EQ(report.demoted.size(), 1u);
  EXPECT_EQ(cache.layer(2).size(), before - 1);
  EXPECT_EQ(cache.junk().size(), 1u);
  EXPECT_EQ(cache.junk()[0].message.content, gibberish);
  EXPECT_TRUE(cache.junk()[0].has_flag(EntryFlag::SweptFromLevel));
}

TEST(Sweep, NothingFlaggedWhenAllEntriesDetect) {
  auto b = make_mock_backend();
  std::vector<std::string> lib = default_instruction_library(SchemaKind::RIOH);
  Dataset d = load_dataset(data_path("rioh_mini.json"), SchemaKind::RIOH);
  std::vector<std::pair<int, std::string>> entries;
  for (int lvl = 1; lvl <= 4; ++lvl) {
    entries.push_back({lvl, d.facts_at("Olivia Mitchell", SecurityLevel{lvl})[0]});
  }
  HierarCache cache = planted_cache(lib, entries);
  SweepReport report = cache.periodic_sweep(*b, 5);
  EXPECT_TRUE(report.demoted.empty());
  EXPECT_EQ(report.inspected, 4u);
}

TEST(Sweep, IdempotentWithoutInterleavedStores) {
  auto b = make_mock_backend();
  std::vector<std::string> lib = default_instruction_library(SchemaKind::RIOH);
  HierarCache cache = planted_cache(
      lib, {{1, "jjx kkz qzz xqx"},
            {2, "a note about the family plans someone has been sharing with the team"},
            {3, "qvz xjv zkq kqv xqx qzz"}});
  std::size_t total = cache.total_size();
  SweepReport first = cache.periodic_sweep(*b, 5);
  EXPECT_EQ(first.demoted.size(), 2u);
  SweepReport second = cache.periodic_sweep(*b, 10);
  EXPECT_TRUE(second.demoted.empty());
  EXPECT_EQ(cache.total_size(), total);  // conservation
}

TEST(Sweep, BestEffortOnBackendFailure) {
  class FlakyJudge : public Backend {
  public:
    BackendKind kind() const override { return BackendKind::DeterministicMock; }
    EmbeddingVector embed(const std::string& text) override {
      return inner_.embed(text);
    }
    std::vector<std::string> extract(const std::string& c, const std::string& p,
                                     const std::string& r) override {
      return inner_.extract(c, p, r);
    }
    JudgeVerdict judge(const ReflectionPrompt&, const std::string&) override {
      throw BackendError("judge offline", true);
    }

  private:
    MockBackend inner_;
  };

  FlakyJudge flaky;
  HierarCache cache = planted_cache(default_instruction_library(SchemaKind::RIOH),
                                    {{1, "jjx kkz qzz"}});
  SweepReport report = cache.periodic_sweep(flaky, 5);
  EXPECT_TRUE(report.demoted.empty());
  EXPECT_EQ(report.errors, 1u);
  EXPECT_EQ(cache.layer(1).size(), 1u);  // left in place, never destroyed
}

TEST(Cache, InvariantChecksAtConstruction) {
  EXPECT_THROW(HierarCache(AgentId{0, "o"}, 0), InvalidArgument);
  EXPECT_THROW(HierarCache(AgentId{0, "o"}, 4, {}, 0.0), InvalidArgument);
  EXPECT_THROW(HierarCache(AgentId{0, "o"}, 4, {}, 1.0), InvalidArgument);
}

TEST(Cache, SnapshotHasLayersAndJunk) {
  auto b = make_mock_backend();
  HierarCache cache(AgentId{3, "owner name"}, 4, {}, 0.35);
  cache.store(msg("alpha beta", 2), SecurityLevel{4}, SecurityLevel{2}, *b);
  nlohmann::json snap = cache.snapshot();
  EXPECT_EQ(snap["owner"], "owner name");
  EXPECT_EQ(snap["layers"]["2"].size(), 1u);
  EXPECT_TRUE(snap["junk"].empty());
}

TEST(Cache, CheckpointRoundTripPreservesState) {
  auto b = make_mock_backend();
  HierarCache cache(AgentId{1, "o"}, 4, default_instruction_library(SchemaKind::RIOH),
                    0.35);
  Rng rng(77);
  for (int i = 0; i < 25; ++i) {
    cache.store(msg(random_words(rng, 5), 1 + static_cast<int>(rng.below(4))),
                SecurityLevel{1 + static_cast<int>(rng.below(4))},
                SecurityLevel{1 + static_cast<int>(rng.below(4))}, *b);
  }
  HierarCache restored = HierarCache::from_json(cache.to_json());
  EXPECT_EQ(restored.to_json(), cache.to_json());
}

}  // namespace
}  // namespace agentsafe
