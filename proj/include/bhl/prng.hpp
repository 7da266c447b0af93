#pragma once

#include <cstdint>

namespace bhl {

// Counter-based pseudo-random streams (splitmix64 finalizer). Every draw is a
// pure function of (key, counter), so values are stable across platforms and
// independent of evaluation order. Streams for sites are keyed by the master
// seed and the site coordinates; streams for walks by the master seed and the
// walk index.

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

inline std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
  return mix64(h ^ (v + kGolden + (h << 6) + (h >> 2)));
}

// Stateless stream: draw i is mix64(key + (i+1)*golden).
struct CounterStream {
  std::uint64_t key = 0;
  std::uint64_t counter = 0;

  CounterStream() = default;
  explicit CounterStream(std::uint64_t k) : key(k) {}

  std::uint64_t next_u64() {
    ++counter;
    return mix64(key + counter * kGolden);
  }

  // Uniform in [0,1) with 53 random mantissa bits.
  double next_uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }
};

inline std::uint64_t zigzag64(std::int64_t v) {
  return (static_cast<std::uint64_t>(v) << 1) ^ static_cast<std::uint64_t>(v >> 63);
}

}  // namespace bhl
