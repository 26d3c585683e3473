#ifndef SKYPARK_RNG_HPP
#define SKYPARK_RNG_HPP

#include <cmath>
#include <cstdint>
#include <string_view>

namespace skypark {

// All randomness in the library flows through this header so that runs are
// reproducible bit-for-bit: distributions are implemented explicitly instead
// of relying on std::<distribution> internals, and independent seed streams
// are derived by mixing rather than by offsetting.

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives an independent child seed from a base seed and up to three indices.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
  std::uint64_t s = base;
  splitmix64(s);
  s ^= 0xa0761d6478bd642fULL + a;
  splitmix64(s);
  s ^= 0xe7037ed1a0b428dbULL + b;
  splitmix64(s);
  s ^= 0x8ebc6af09c88c6e3ULL + c;
  return splitmix64(s);
}

/// FNV-1a over a label, for naming seed streams ("predictor", "ground_truth", ...).
inline std::uint64_t seed_tag(std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char ch : label) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Deterministic generator (xoshiro-free, single splitmix64 stream) with the
/// handful of draws the simulator needs.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n), n >= 1. Rejection sampling, no modulo bias.
  std::uint64_t uniform_int(std::uint64_t n) {
    const std::uint64_t bound = n * ((~std::uint64_t{0}) / n);
    std::uint64_t x = next_u64();
    while (x >= bound) x = next_u64();
    return x % n;
  }

  /// Standard normal via Box-Muller; consumes exactly two draws per call.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

 private:
  std::uint64_t state_;
};

}  // namespace skypark

#endif  // SKYPARK_RNG_HPP
