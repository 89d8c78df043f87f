#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>

namespace dacapo {

// splitmix64.  Small, fast, and good enough for synthetic data generation.
// Every stochastic component derives its own stream from the single run seed
// via derive_stream(), so adding a consumer never perturbs the draws made by
// existing ones.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n).
  uint64_t next_below(uint64_t n) { return next_u64() % n; }

  // Box-Muller, one branch of the pair.  Hand-rolled rather than
  // std::normal_distribution so that draws are identical across libstdc++
  // versions.
  double next_gauss() {
    double u1 = next_unit();
    double u2 = next_unit();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

 private:
  uint64_t state_;
};

inline uint64_t mix_u64(uint64_t a, uint64_t b) {
  uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Named substream of the run seed (stream id is a short ASCII tag).
inline Rng derive_stream(uint64_t seed, const char* tag) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const char* p = tag; *p; ++p) h = (h ^ static_cast<uint8_t>(*p)) * 0x100000001b3ULL;
  return Rng(mix_u64(seed, h));
}

inline uint64_t time_key(double t) {
  uint64_t bits;
  static_assert(sizeof(bits) == sizeof(t));
  std::memcpy(&bits, &t, sizeof(bits));
  return bits;
}

}  // namespace dacapo
