#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string_view>

namespace awm {

// 64-bit FNV-1a. Used for vocabulary/content hashing and seed derivation.
inline constexpr uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ull;
inline constexpr uint64_t kFnvPrime = 0x100000001b3ull;

inline uint64_t fnv1a64(const void* data, size_t len, uint64_t h = kFnvOffsetBasis) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

inline uint64_t fnv1a64(std::string_view s, uint64_t h = kFnvOffsetBasis) {
  return fnv1a64(s.data(), s.size(), h);
}

// Exact match for string literals; without it they would decay into the
// (data, len) overload with the hash seed consumed as the length.
inline uint64_t fnv1a64(const char* s, uint64_t h = kFnvOffsetBasis) {
  return fnv1a64(std::string_view(s), h);
}

// splitmix64 step: advances state and returns the next output.
inline uint64_t splitmix64_next(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Combines a root seed with a textual label into an independent stream seed.
// One global seed fans out to labeled sub-streams ("lm-train", "gen:3", ...)
// so pipeline stages can be re-run in isolation with unchanged results.
inline uint64_t derive_seed(uint64_t root, std::string_view label) {
  uint64_t s = root ^ fnv1a64(label);
  return splitmix64_next(s);
}

// xoshiro256** seeded through splitmix64. Platform-independent: identical
// seeds produce identical draws on any conforming implementation.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& w : state_) w = splitmix64_next(sm);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform index in [0, n). n must be > 0.
  size_t uniform_index(size_t n) {
    return static_cast<size_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  /// Standard normal via Box-Muller (pairs cached).
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    // Avoid log(0).
    while (u1 <= 0.0) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  /// Derives an independent child generator; does not disturb this stream.
  Rng fork(std::string_view label) const {
    uint64_t s = state_[0] ^ fnv1a64(label);
    return Rng(splitmix64_next(s));
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::array<uint64_t, 4> state_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace awm
