#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "agentsafe/error.hpp"
#include "agentsafe/text.hpp"

namespace agentsafe {

/// Fixed-dimension embedding; unit length for everything the mock produces.
struct EmbeddingVector {
  std::vector<double> components;

  std::size_t dim() const { return components.size(); }
};

/// cos(a, b), clamped to [-1, 1] against rounding. Zero vectors have no
/// direction and are rejected.
inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) {
    throw InvalidArgument("cosine: dimension mismatch (" + std::to_string(a.dim()) +
                          " vs " + std::to_string(b.dim()) + ")");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    dot += a.components[i] * b.components[i];
    na += a.components[i] * a.components[i];
    nb += b.components[i] * b.components[i];
  }
  if (na == 0.0 || nb == 0.0) {
    throw InvalidArgument("cosine: undefined for zero vector");
  }
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

enum class JudgeVerdictKind { Authentic, Inauthentic, Junk, Valid };

struct JudgeVerdict {
  JudgeVerdictKind verdict = JudgeVerdictKind::Junk;
  std::string rationale;
};

inline const char* verdict_name(JudgeVerdictKind v) {
  switch (v) {
    case JudgeVerdictKind::Authentic: return "Authentic";
    case JudgeVerdictKind::Inauthentic: return "Inauthentic";
    case JudgeVerdictKind::Junk: return "Junk";
    case JudgeVerdictKind::Valid: return "Valid";
  }
  return "?";
}

/// What the reflection pass hands the model: a template, the criterion
/// library, and the current junk contents for context.
struct ReflectionPrompt {
  std::string reflection;
  std::vector<std::string> library;
  std::vector<std::string> junk_context;
  double threshold = 0.35;

  std::string render() const {
    std::string out = reflection;
    out += "\nCriteria:\n";
    for (const auto& c : library) out += "- " + c + "\n";
    if (!junk_context.empty()) {
      out += "Known junk:\n";
      for (const auto& jm : junk_context) out += "- " + jm + "\n";
    }
    return out;
  }
};

enum class BackendKind { DeterministicMock, RemoteChat };

/// Abstraction over the language model and embedding machinery. The mock is
/// a pure function of its inputs; remote clients may fail, and every caller
/// treats failure as hostile input (fail closed).
class Backend {
public:
  virtual ~Backend() = default;

  virtual BackendKind kind() const = 0;

  /// Embed non-empty text into the run's fixed dimension.
  virtual EmbeddingVector embed(const std::string& text) = 0;

  /// Extract identity strings mentioned in content. `registry_context` is the
  /// set of known names, one per line.
  virtual std::vector<std::string> extract(const std::string& content,
                                           const std::string& prompt,
                                           const std::string& registry_context) = 0;

  /// Reflection verdict for one payload.
  virtual JudgeVerdict judge(const ReflectionPrompt& prompt,
                             const std::string& payload) = 0;
};

using BackendPtr = std::shared_ptr<Backend>;

/// Deterministic stand-in for the model. Embedding feature-hashes lowercased
/// tokens into a fixed number of buckets and L2-normalizes, so texts sharing
/// vocabulary land close together; extraction is registry-substring matching;
/// judgement thresholds max similarity against the criterion library.
class MockBackend : public Backend {
public:
  explicit MockBackend(std::size_t dim = 64, std::uint64_t seed = 0)
      : dim_(dim), seed_(seed) {
    if (dim_ == 0) throw InvalidArgument("embedding dimension must be positive");
  }

  BackendKind kind() const override { return BackendKind::DeterministicMock; }
  std::uint64_t seed() const { return seed_; }

  EmbeddingVector embed(const std::string& text) override {
    if (token_count(text) == 0) {
      throw InvalidArgument("embed: empty text");
    }
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = memo_.find(text);
      if (it != memo_.end()) return it->second;
    }
    std::vector<double> buckets(dim_, 0.0);
    for (const auto& tok : tokenize(to_lower(text))) {
      buckets[fnv1a64(tok) % dim_] += 1.0;
    }
    double norm = 0.0;
    for (double v : buckets) norm += v * v;
    norm = std::sqrt(norm);
    for (double& v : buckets) v /= norm;
    EmbeddingVector out{std::move(buckets)};
    std::lock_guard<std::mutex> lock(mu_);
    memo_.emplace(text, out);
    return out;
  }

  std::vector<std::string> extract(const std::string& content,
                                   const std::string& /*prompt*/,
                                   const std::string& registry_context) override {
    if (content.empty()) {
      throw InvalidArgument("extract: empty content");
    }
    std::vector<std::string> found;
    std::size_t start = 0;
    while (start <= registry_context.size()) {
      std::size_t end = registry_context.find('\n', start);
      if (end == std::string::npos) end = registry_context.size();
      std::string name = registry_context.substr(start, end - start);
      while (!name.empty() && std::isspace(static_cast<unsigned char>(name.back()))) {
        name.pop_back();
      }
      if (!name.empty() && contains_ci(content, name)) {
        found.push_back(name);
      }
      if (end == registry_context.size()) break;
      start = end + 1;
    }
    std::sort(found.begin(), found.end());
    found.erase(std::unique(found.begin(), found.end()), found.end());
    return found;
  }

  JudgeVerdict judge(const ReflectionPrompt& prompt,
                     const std::string& payload) override {
    if (prompt.library.empty()) {
      return {JudgeVerdictKind::Junk, "no criteria to vouch for the payload"};
    }
    EmbeddingVector p = embed(payload);
    double best = -1.0;
    for (const auto& criterion : prompt.library) {
      best = std::max(best, cosine(p, embed(criterion)));
    }
    if (best <= prompt.threshold) {
      return {JudgeVerdictKind::Junk, "max similarity " + std::to_string(best) +
                                          " below threshold"};
    }
    return {JudgeVerdictKind::Valid, "matched a criterion at " + std::to_string(best)};
  }

private:
  std::size_t dim_;
  std::uint64_t seed_;
  std::mutex mu_;
  std::map<std::string, EmbeddingVector> memo_;
};

inline BackendPtr make_mock_backend(std::size_t dim = 64, std::uint64_t seed = 0) {
  return std::make_shared<MockBackend>(dim, seed);
}

}  // namespace agentsafe
