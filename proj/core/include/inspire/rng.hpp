#pragma once

#include <cstdint>

namespace inspire {

// Counter-based deterministic random streams. Streams are keyed by
// (seed, level, iteration, batch, ...) so that results do not depend on
// thread scheduling: every consumer derives its own stream key and draws
// an indexed sequence.

inline uint64_t mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline uint64_t combine_key(uint64_t a, uint64_t b) {
  return mix64(a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2)));
}

template <typename... Rest>
uint64_t stream_key(uint64_t seed, Rest... rest) {
  uint64_t k = mix64(seed);
  ((k = combine_key(k, static_cast<uint64_t>(rest))), ...);
  return k;
}

class RandomStream {
 public:
  explicit RandomStream(uint64_t key) : state_(mix64(key)) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix64(state_);
  }

  // Uniform in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [lo, hi).
  double next_double(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  // Uniform integer in [0, n).
  uint64_t next_below(uint64_t n) { return next_u64() % n; }

 private:
  uint64_t state_;
};

}  // namespace inspire
