#include <gtest/gtest.h>

#include "agentsafe/metrics.hpp"
#include "agentsafe/rng.hpp"

namespace agentsafe {
namespace {

TEST(DefenseRate, Ratios) {
  DefenseLedger ledger;
  for (int i = 0; i < 10; ++i) ledger.record(AttackKind::II, i < 8);
  EXPECT_DOUBLE_EQ(defense_rate(ledger), 0.8);

  DefenseLedger none;
  for (int i = 0; i < 5; ++i) none.record(AttackKind::AM, false);
  EXPECT_DOUBLE_EQ(defense_rate(none), 0.0);
}

TEST(DefenseRate, UndefinedOnZeroAttacks) {
  DefenseLedger empty;
  EXPECT_THROW(defense_rate(empty), UndefinedMetric);
}

TEST(DefenseRate, MonotoneInDefendedCount) {
  double prev = -1.0;
  for (long long defended = 0; defended <= 20; ++defended) {
    double r = defense_rate(20, defended);
    EXPECT_GE(r, 0.0);
    EXPECT_LE(r, 1.0);
    EXPECT_GT(r, prev);
    prev = r;
  }
}

TEST(Csi, IdenticalTextsScoreOne) {
  auto b = make_mock_backend();
  EXPECT_DOUBLE_EQ(csi("the same words", "the same words", *b), 1.0);
}

TEST(Csi, DisjointVocabulariesScoreZero) {
  auto b = make_mock_backend();
  // Two single-token texts whose hash buckets differ (verified first).
  EmbeddingVector x = b->embed("jjx");
  EmbeddingVector y = b->embed("kkz");
  ASSERT_DOUBLE_EQ(cosine(x, y), 0.0);
  EXPECT_DOUBLE_EQ(csi("jjx", "kkz", *b), 0.0);
}

TEST(Csi, EmptyTextRejected) {
  auto b = make_mock_backend();
  EXPECT_THROW(csi("", "x", *b), InvalidArgument);
  EXPECT_THROW(csi("x", "  ", *b), InvalidArgument);
}

TEST(Csr, RatioAndGuards) {
  EXPECT_DOUBLE_EQ(csr(0.7, 0.7), 1.0);
  EXPECT_DOUBLE_EQ(csr(0.4, 0.8), 0.5);
  EXPECT_THROW(csr(0.4, 0.0), UndefinedMetric);
}

CostTrace synthetic_trace(Rng& rng, int rounds, long long library_size,
                          int sweep_every) {
  CostTrace trace;
  trace.cost_per_token = 1.0;
  trace.rounds = rounds;
  trace.library_size = library_size;
  for (int t = 1; t <= rounds; ++t) {
    CostTraceRound r;
    r.round = t;
    r.inbound_tokens = static_cast<long long>(rng.below(300));
    r.validated_tokens = static_cast<long long>(rng.below(r.inbound_tokens + 1));
    r.junk_added_tokens = static_cast<long long>(rng.below(60));
    r.accepted_level = static_cast<int>(rng.below(5));  // 0 = none accepted
    for (int lvl = 0; lvl < 4; ++lvl) {
      r.layer_tokens.push_back(static_cast<long long>(rng.below(500)));
    }
    r.junk_tokens = static_cast<long long>(rng.below(400));
    r.sweep = sweep_every > 0 && t % sweep_every == 0;
    trace.per_round.push_back(std::move(r));
  }
  return trace;
}

// Independent re-implementation of the overhead ledger, term by term, with a
// different accumulation structure from the production code.
struct LedgerOracle {
  long long threatsieve = 0, validation = 0, detection = 0;
  long long saved_junk = 0, saved_level = 0, delta = 0;
};

LedgerOracle oracle_ledger(const CostTrace& trace) {
  LedgerOracle o;
  const int T = trace.rounds;
  for (const auto& r : trace.per_round) o.threatsieve += r.inbound_tokens;
  for (const auto& r : trace.per_round) {
    o.validation += r.validated_tokens * trace.library_size;
  }
  for (const auto& r : trace.per_round) {
    if (!r.sweep) continue;
    for (std::size_t i = 0; i < r.layer_tokens.size(); ++i) {
      o.detection += r.layer_tokens[i] * (1 + r.junk_tokens);
    }
  }
  for (const auto& r : trace.per_round) {
    o.saved_junk += static_cast<long long>(T - r.round) * r.junk_added_tokens;
  }
  for (const auto& r : trace.per_round) {
    if (r.accepted_level <= 0) continue;
    for (int lvl = r.accepted_level + 1;
         lvl <= static_cast<int>(r.layer_tokens.size()); ++lvl) {
      o.saved_level += r.layer_tokens[static_cast<std::size_t>(lvl - 1)];
    }
  }
  o.delta = o.threatsieve + o.validation + o.detection - o.saved_junk - o.saved_level;
  return o;
}

TEST(CostLedger, EmptyRunIsAllZero) {
  CostTrace trace;
  trace.rounds = 0;
  CostReport report = cost_ledger(trace);
  EXPECT_EQ(report.raw_threatsieve, 0);
  EXPECT_EQ(report.raw_validation, 0);
  EXPECT_EQ(report.raw_detection, 0);
  EXPECT_EQ(report.raw_saved_junk, 0);
  EXPECT_EQ(report.raw_saved_level_filter, 0);
  EXPECT_EQ(report.raw_delta, 0);
  EXPECT_EQ(report.sweeps, 0);
}

TEST(CostLedger, SingleMessageDirectProducts) {
  CostTrace trace;
  trace.rounds = 1;
  trace.library_size = 3;
  CostTraceRound r;
  r.round = 1;
  r.inbound_tokens = 10;
  r.validated_tokens = 10;
  r.layer_tokens = {10, 0, 0, 0};
  trace.per_round.push_back(r);
  CostReport report = cost_ledger(trace);
  EXPECT_EQ(report.raw_threatsieve, 10);
  EXPECT_EQ(report.raw_validation, 30);
  EXPECT_EQ(report.raw_detection, 0);
}

TEST(CostLedger, MatchesIndependentImplementation) {
  Rng rng(59);
  for (int trial = 0; trial < 50; ++trial) {
    int rounds = 5 + static_cast<int>(rng.below(26));
    CostTrace trace = synthetic_trace(rng, rounds, 1 + rng.below(4),
                                      1 + static_cast<int>(rng.below(7)));
    CostReport got = cost_ledger(trace);
    LedgerOracle want = oracle_ledger(trace);
    EXPECT_EQ(got.raw_threatsieve, want.threatsieve) << trial;
    EXPECT_EQ(got.raw_validation, want.validation) << trial;
    EXPECT_EQ(got.raw_detection, want.detection) << trial;
    EXPECT_EQ(got.raw_saved_junk, want.saved_junk) << trial;
    EXPECT_EQ(got.raw_saved_level_filter, want.saved_level) << trial;
    EXPECT_EQ(got.raw_delta, want.delta) << trial;
  }
}

TEST(CostLedger, SynthesizedTwentyRoundTrace) {
  Rng rng(4242);
  CostTrace trace = synthetic_trace(rng, 20, 2, 5);
  CostReport got = cost_ledger(trace);
  LedgerOracle want = oracle_ledger(trace);
  EXPECT_EQ(got.raw_delta, want.delta);
  EXPECT_EQ(got.sweeps, 4);
  EXPECT_EQ(got.sweep_layer_sizes.size(), 4u);
}

TEST(CostLedger, AdditiveOnNonSweepFields) {
  Rng rng(61);
  CostTrace a = synthetic_trace(rng, 12, 2, 4);
  CostTrace b = synthetic_trace(rng, 9, 2, 4);
  CostTrace joined;
  joined.cost_per_token = 1.0;
  joined.library_size = 2;
  joined.rounds = a.rounds + b.rounds;
  int t = 0;
  for (const auto& r : a.per_round) {
    joined.per_round.push_back(r);
    joined.per_round.back().round = ++t;
  }
  for (const auto& r : b.per_round) {
    joined.per_round.push_back(r);
    joined.per_round.back().round = ++t;
  }
  CostReport ra = cost_ledger(a);
  CostReport rb = cost_ledger(b);
  CostReport rj = cost_ledger(joined);
  EXPECT_EQ(rj.raw_threatsieve, ra.raw_threatsieve + rb.raw_threatsieve);
  EXPECT_EQ(rj.raw_validation, ra.raw_validation + rb.raw_validation);
}

TEST(CostLedger, GroupingFormsAgree) {
  Rng rng(67);
  for (int trial = 0; trial < 20; ++trial) {
    CostTrace trace = synthetic_trace(rng, 10 + static_cast<int>(rng.below(20)),
                                      1 + rng.below(5), 5);
    EXPECT_EQ(pre_storage_total_grouped(trace), pre_storage_total_distributed(trace));
    CostReport report = cost_ledger(trace);
    EXPECT_EQ(report.raw_threatsieve + report.raw_validation,
              pre_storage_total_grouped(trace));
  }
}

TEST(CostLedger, IncompleteTraceNamesTheRound) {
  Rng rng(71);
  CostTrace trace = synthetic_trace(rng, 10, 2, 5);
  trace.per_round.erase(trace.per_round.begin() + 4);
  try {
    cost_ledger(trace);
    FAIL() << "expected IncompleteTrace";
  } catch (const IncompleteTrace& e) {
    EXPECT_NE(std::string(e.what()).find("round"), std::string::npos);
  }
}

TEST(CostLedger, ScalesByCostPerToken) {
  Rng rng(73);
  CostTrace trace = synthetic_trace(rng, 8, 2, 4);
  trace.cost_per_token = 0.25;
  CostReport report = cost_ledger(trace);
  EXPECT_DOUBLE_EQ(report.delta(), 0.25 * static_cast<double>(report.raw_delta));
  EXPECT_DOUBLE_EQ(report.cost_threatsieve(),
                   0.25 * static_cast<double>(report.raw_threatsieve));
}

}  // namespace
}  // namespace agentsafe
