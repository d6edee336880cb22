#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace dsim {

inline uint64_t splitmix64(uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// xoshiro256** seeded via splitmix64. All randomness in the simulator flows
// through this generator so that a (config, seed) pair replays bit-for-bit
// on any platform; std::random distributions are avoided for the same reason.
class Rng {
 public:
  Rng() : Rng(0) {}

  explicit Rng(uint64_t seed) : seed0_(seed) {
    uint64_t x = seed;
    for (auto& w : s_) w = splitmix64(x);
  }

  uint64_t next() {
    const uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // [0, 1)
  double uniform01() { return (next() >> 11) * 0x1.0p-53; }

  uint64_t below(uint64_t n) { return n ? next() % n : 0; }

  // Box-Muller; one variate per call, the spare is cached.
  double gaussian(double sigma) {
    if (sigma <= 0.0) return 0.0;
    if (has_spare_) {
      has_spare_ = false;
      return spare_ * sigma;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 <= 1e-300) u1 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a) * sigma;
  }

  // Derive an independent stream from the *original* seed, so the order in
  // which modules draw numbers does not perturb each other's sequences.
  Rng stream(std::string_view label) const {
    uint64_t x = seed0_ ^ fnv1a64(label);
    return Rng(splitmix64(x));
  }

  Rng stream(uint64_t index) const {
    uint64_t x = seed0_ ^ (0x9e3779b97f4a7c15ULL + index * 0xbf58476d1ce4e5b9ULL);
    return Rng(splitmix64(x));
  }

  uint64_t seed() const { return seed0_; }

 private:
  static uint64_t rotl(uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

  uint64_t s_[4];
  uint64_t seed0_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace dsim
