#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace polyseg::rng {

// SplitMix64: tiny, seedable, serializable (one u64 of state). All
// randomness in the project flows through this engine so that runs are
// reproducible from a single seed.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed = 0) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Bernoulli draw; p <= 0 never fires, p >= 1 always fires.
  bool bernoulli(double p) { return next_double() < p; }

  // standard normal via the Marsaglia polar method (second value discarded
  // so the engine state stays a single u64)
  double normal() {
    for (;;) {
      double u = 2.0 * next_double() - 1.0;
      double v = 2.0 * next_double() - 1.0;
      double s = u * u + v * v;
      if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
    }
  }

  uint64_t state() const { return state_; }
  void set_state(uint64_t s) { state_ = s; }

 private:
  uint64_t state_;
};

inline uint64_t mix(uint64_t a, uint64_t b) {
  SplitMix64 r(a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2)));
  return r.next_u64();
}

// FNV-1a
inline uint64_t hash_str(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// Per-(sample, epoch) stream derivation. Workers that process samples in
// parallel derive the same streams as a serial run.
inline uint64_t derive_seed(uint64_t global_seed, std::string_view sample_id, uint64_t epoch) {
  return mix(mix(global_seed, hash_str(sample_id)), 0x5851f42d4c957f2dull + epoch);
}

}  // namespace polyseg::rng
