// Deterministic random streams: xoshiro256++ state-seeded through splitmix64.
// All draws go through 52/53-bit mantissa construction, so sequences are
// bit-identical across platforms and compilers.  stream(base, i) derives
// statistically independent per-sample generators from one base seed.
#pragma once

#include <cmath>
#include <cstdint>

#include "asap/types.hpp"

namespace asap {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    // splitmix64 expansion of the seed into the xoshiro state.
    std::uint64_t x = seed;
    for (auto& word : s_) {
      x += 0x9E3779B97F4A7C15ULL;
      word = mix(x);
    }
  }

  /// Seed of the index-th derived stream of `base`.
  static std::uint64_t stream_seed(std::uint64_t base, std::uint64_t index) {
    return mix(base + 0x9E3779B97F4A7C15ULL * (index + 1));
  }

  static Rng stream(std::uint64_t base, std::uint64_t index) {
    return Rng(stream_seed(base, index));
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform on the open interval (0,1); never returns an endpoint.
  double uniform01() {
    return (static_cast<double>(next_u64() >> 12) + 0.5) * 0x1.0p-52;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard exponential via inversion.
  double exponential() { return -std::log(uniform01()); }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
};

/// Uniform sample from the interior of the probability simplex
/// (normalized exponential spacings).
inline Vector sample_simplex_interior(Rng& rng, int n) {
  detail::require(n > 0, "simplex sample: size must be positive");
  Vector w(n);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    w[i] = rng.exponential();
    sum += w[i];
  }
  return w / sum;
}

}  // namespace asap
