#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace bier {

/// Seeded random source with a platform-independent draw sequence.
///
/// Raw bits come from std::mt19937_64, whose output sequence is fixed by the
/// C++ standard. The distributions are implemented here rather than taken from
/// <random>, whose distribution algorithms are implementation-defined:
///   - uniform():  top 53 bits scaled to [0, 1)
///   - normal():   Box-Muller on two uniform() draws, no cached second value
///   - index(n):   rejection sampling on 64-bit words, unbiased
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  // Uniform integer in [0, n). n must be positive.
  std::uint64_t index(std::uint64_t n);

  // Full engine state as text, suitable for checkpointing.
  std::string state() const;
  void restore(const std::string& state);

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace bier
