#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>

namespace blinkkit::rnd {

// Distribution helpers with fully specified algorithms: the standard library's
// distributions are implementation-defined, so seeded outputs would differ
// across toolchains.

using Engine = std::mt19937_64;

/// Uniform integer in [0, n), n > 0, by rejection.
inline std::uint64_t index(Engine& rng, std::uint64_t n) {
  const std::uint64_t limit = Engine::max() - (Engine::max() % n + 1) % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x > limit);
  return x % n;
}

/// Uniform integer in [lo, hi].
inline std::int64_t integer(Engine& rng, std::int64_t lo, std::int64_t hi) {
  return lo + static_cast<std::int64_t>(index(rng, static_cast<std::uint64_t>(hi - lo) + 1));
}

/// Uniform double in [0, 1).
inline double unit(Engine& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Engine& rng, double lo, double hi) { return lo + (hi - lo) * unit(rng); }

/// Standard normal via Box-Muller (one value per call).
inline double normal(Engine& rng) {
  double u1 = unit(rng);
  while (u1 <= 0.0) u1 = unit(rng);
  const double u2 = unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Two independent standard normals (Marsaglia polar method).
inline std::pair<double, double> normal_pair(Engine& rng) {
  double x, y, r2;
  do {
    x = 2.0 * unit(rng) - 1.0;
    y = 2.0 * unit(rng) - 1.0;
    r2 = x * x + y * y;
  } while (r2 >= 1.0 || r2 == 0.0);
  const double f = std::sqrt(-2.0 * std::log(r2) / r2);
  return {x * f, y * f};
}

/// Derives an independent stream seed from a base seed and a salt.
inline std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace blinkkit::rnd
