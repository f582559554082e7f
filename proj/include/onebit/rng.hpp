// Seeded, splittable random source for reproducible Monte Carlo runs.
//
// Every trial owns one Rng derived from a stable hash of (base_seed, cell,
// trial); rerunning a sweep with the same base seed reproduces every draw
// bit for bit, and adding grid points never shifts existing trials' data.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace onebit {

// splitmix64 finalizer; full-period bijective mixer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Order-sensitive hash chain used to derive per-trial seeds.
constexpr std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t v) noexcept {
  return mix64(seed ^ (mix64(v) + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2)));
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b,
                                 std::uint64_t c) noexcept {
  return hash_combine(hash_combine(hash_combine(mix64(base), a), b), c);
}

// Deterministic generator: mt19937_64 stream with explicit Gaussian and
// Bernoulli draws (Box-Muller, no cached spare), so sequences do not depend
// on any standard-library distribution implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(mix64(seed)) {}

  std::uint64_t seed() const noexcept { return seed_; }

  // Child generator with an independent stream; does not disturb this one.
  Rng split(std::uint64_t stream) const { return Rng(hash_combine(seed_, stream)); }

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * kInv53; }

  // Standard normal via Box-Muller; u1 shifted into (0, 1] so the log is finite.
  double gaussian() {
    const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * kInv53;
    const double u2 = static_cast<double>(engine_() >> 11) * kInv53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  static constexpr double kInv53 = 1.0 / 9007199254740992.0;  // 2^-53
  static constexpr double kPi = 3.14159265358979323846;

  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace onebit
