#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "zoprox/error.hpp"

namespace zoprox {

// Seeded generator whose output is identical on every conforming platform.
//
// Uniform bits come from std::mt19937_64, whose sequence is fixed by the
// standard. std::normal_distribution is implementation-defined, so normal
// variates use the basic Box-Muller transform instead:
//
//   u1 = 1 - (bits >> 11) * 2^-53       in (0, 1]
//   u2 =     (bits >> 11) * 2^-53       in [0, 1)
//   z0 = sqrt(-2 ln u1) cos(2 pi u2),  z1 = sqrt(-2 ln u1) sin(2 pi u2)
//
// z0 is returned first and z1 is cached for the following call.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  Vector normal_vector(std::size_t n) {
    Vector v(n);
    for (auto& x : v) x = normal();
    return v;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Derives an independent stream seed (splitmix64 finalizer).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace zoprox
