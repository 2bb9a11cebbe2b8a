#pragma once

#include <map>
#include <string>
#include <vector>

#include "agentsafe/attacks.hpp"
#include "agentsafe/backend.hpp"
#include "agentsafe/error.hpp"

namespace agentsafe {

/// Attack attempts and how many the system turned away.
struct DefenseLedger {
  long long attacks_total = 0;
  long long defended = 0;
  std::map<AttackKind, std::pair<long long, long long>> per_kind;  // total, defended

  void record(AttackKind kind, bool was_defended) {
    ++attacks_total;
    auto& [total, def] = per_kind[kind];
    ++total;
    if (was_defended) {
      ++defended;
      ++def;
    }
  }

  DefenseLedger& operator+=(const DefenseLedger& o) {
    attacks_total += o.attacks_total;
    defended += o.defended;
    for (const auto& [k, td] : o.per_kind) {
      auto& mine = per_kind[k];
      mine.first += td.first;
      mine.second += td.second;
    }
    return *this;
  }
};

inline double defense_rate(const DefenseLedger& ledger) {
  if (ledger.attacks_total < 1) {
    throw UndefinedMetric("defense rate undefined with zero attacks");
  }
  return static_cast<double>(ledger.defended) /
         static_cast<double>(ledger.attacks_total);
}

inline double defense_rate(long long total, long long defended) {
  if (total < 1) {
    throw UndefinedMetric("defense rate undefined with zero attacks");
  }
  return static_cast<double>(defended) / static_cast<double>(total);
}

/// Similarity of an output to its ground truth.
inline double csi(const std::string& output, const std::string& ground_truth,
                  Backend& backend) {
  if (token_count(output) == 0 || token_count(ground_truth) == 0) {
    throw InvalidArgument("csi: both texts must be non-empty");
  }
  return cosine(backend.embed(output), backend.embed(ground_truth));
}

/// Ratio of a condition's similarity to a reference similarity.
inline double csr(double sim_condition, double reference) {
  if (reference == 0.0) {
    throw UndefinedMetric("csr: zero reference similarity");
  }
  return sim_condition / reference;
}

/// Per-round token counts a run traces for the overhead ledger. Layer sizes
/// are captured at sweep time on sweep rounds, end of round otherwise; all
/// sizes are whitespace-token counts (see docs/metrics.md).
struct CostTraceRound {
  int round = 0;
  long long inbound_tokens = 0;    // everything presented to the gatekeeper
  long long validated_tokens = 0;  // everything that reached validity checking
  long long junk_added_tokens = 0; // quarantined this round
  int accepted_level = 0;          // highest routed level this round, 0 if none
  std::vector<long long> layer_tokens;  // index 0 -> level 1
  long long junk_tokens = 0;
  bool sweep = false;
};

struct CostTrace {
  double cost_per_token = 1.0;
  int rounds = 0;
  long long library_size = 0;
  std::vector<CostTraceRound> per_round;
};

/// The overhead ledger. Raw fields are exact token counts; reported values
/// scale them by the per-token cost.
struct CostReport {
  double c = 1.0;
  int rounds = 0;        // T
  int sweeps = 0;        // T'
  long long raw_threatsieve = 0;
  long long raw_validation = 0;
  long long raw_detection = 0;
  long long raw_saved_junk = 0;
  long long raw_saved_level_filter = 0;
  long long raw_delta = 0;
  std::vector<std::vector<long long>> sweep_layer_sizes;  // per sweep: layers + junk

  double cost_threatsieve() const { return c * static_cast<double>(raw_threatsieve); }
  double cost_validation() const { return c * static_cast<double>(raw_validation); }
  double cost_detection() const { return c * static_cast<double>(raw_detection); }
  double saved_junk() const { return c * static_cast<double>(raw_saved_junk); }
  double saved_level_filter() const {
    return c * static_cast<double>(raw_saved_level_filter);
  }
  double delta() const { return c * static_cast<double>(raw_delta); }
};

/// Token-cost accounting over a run trace:
///   gatekeeping        sum of inbound sizes
///   validation         sum of validated sizes, each against the whole library
///   detection          per sweep, each layer against (1 + junk size)
///   saved by junking   quarantined tokens never reprocessed for the rest of
///                      the run
///   saved by leveling  layers above the round's accepted level never read
///   delta              gatekeeping + validation + detection - both savings
inline CostReport cost_ledger(const CostTrace& trace) {
  CostReport report;
  report.c = trace.cost_per_token;
  report.rounds = trace.rounds;

  if (static_cast<int>(trace.per_round.size()) != trace.rounds) {
    throw IncompleteTrace("trace covers " + std::to_string(trace.per_round.size()) +
                          " rounds, run had " + std::to_string(trace.rounds));
  }
  for (int i = 0; i < trace.rounds; ++i) {
    const CostTraceRound& r = trace.per_round[static_cast<std::size_t>(i)];
    if (r.round != i + 1) {
      throw IncompleteTrace("trace missing round " + std::to_string(i + 1));
    }

    report.raw_threatsieve += r.inbound_tokens;
    report.raw_validation += r.validated_tokens * trace.library_size;

    if (r.sweep) {
      ++report.sweeps;
      long long sweep_cost = 0;
      std::vector<long long> sizes;
      for (long long layer : r.layer_tokens) {
        sweep_cost += layer * (1 + r.junk_tokens);
        sizes.push_back(layer);
      }
      sizes.push_back(r.junk_tokens);
      report.raw_detection += sweep_cost;
      report.sweep_layer_sizes.push_back(std::move(sizes));
    }

    report.raw_saved_junk +=
        static_cast<long long>(trace.rounds - r.round) * r.junk_added_tokens;

    if (r.accepted_level > 0) {
      for (std::size_t lvl = static_cast<std::size_t>(r.accepted_level);
           lvl < r.layer_tokens.size(); ++lvl) {
        report.raw_saved_level_filter += r.layer_tokens[lvl];
      }
    }
  }

  report.raw_delta = report.raw_threatsieve + report.raw_validation +
                     report.raw_detection - report.raw_saved_junk -
                     report.raw_saved_level_filter;
  return report;
}

/// Pre-storage total, factored two ways; they must agree (used as a
/// cross-check in tests).
inline long long pre_storage_total_grouped(const CostTrace& trace) {
  long long total = 0;
  for (const auto& r : trace.per_round) {
    total += r.inbound_tokens + r.validated_tokens * trace.library_size;
  }
  return total;
}

inline long long pre_storage_total_distributed(const CostTrace& trace) {
  long long inbound = 0, validated = 0;
  for (const auto& r : trace.per_round) {
    inbound += r.inbound_tokens;
    validated += r.validated_tokens;
  }
  return inbound + validated * trace.library_size;
}

}  // namespace agentsafe
