#pragma once

#include <cstdint>

namespace addlogit {

// Counter-based generator: the n-th draw of a stream is a pure function of
// (key, n), so a replication's draws never depend on which thread ran it or
// in what order.  The mixing function is the SplitMix64 finalizer.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key, std::uint64_t counter = 0) : key_(key), counter_(counter) {}

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Derives an independent stream key for (seed, stream) pairs, e.g.
  // (experiment seed, replication index).
  static constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t stream) {
    return mix(mix(seed + 0x9E3779B97F4A7C15ULL) ^ (stream * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL));
  }

  std::uint64_t next_u64() { return mix(key_ + 0x9E3779B97F4A7C15ULL * ++counter_); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, bound) by rejection.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % bound;
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace addlogit
