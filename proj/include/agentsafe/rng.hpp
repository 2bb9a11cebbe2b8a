#pragma once

#include <cstdint>
#include <vector>

#include "agentsafe/error.hpp"

namespace agentsafe {

/// Deterministic PRNG (splitmix64). The standard <random> distributions are
/// implementation-defined, so everything seeded goes through this class to
/// keep transcripts byte-identical across toolchains.
class Rng {
public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) {
      throw InvalidArgument("Rng::below: n must be positive");
    }
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  /// Uniform double in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  template <typename T>
  const T& pick(const std::vector<T>& items) {
    if (items.empty()) {
      throw InvalidArgument("Rng::pick: empty set");
    }
    return items[static_cast<std::size_t>(below(items.size()))];
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[static_cast<std::size_t>(below(i))]);
    }
  }

  /// Derive an independent stream, e.g. one per agent or per plan.
  Rng fork(std::uint64_t stream) const {
    Rng child(state_ ^ (0xA0761D6478BD642FULL * (stream + 1)));
    child.next_u64();
    return child;
  }

  std::uint64_t state() const { return state_; }
  void restore(std::uint64_t state) { state_ = state; }

private:
  std::uint64_t state_;
};

}  // namespace agentsafe
