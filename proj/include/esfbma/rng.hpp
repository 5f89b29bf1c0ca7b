#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace esfbma {

// SplitMix64 (Steele, Lea & Flood 2014): a 64-bit counter-based generator.
// The state is a plain counter advanced by a fixed odd increment and each
// output is a bijective mix of the counter, so independent substreams can be
// derived by hashing (seed, salt) pairs. All chain and permutation draws in
// this project go through this generator; given a seed the draw sequence is
// bit-reproducible across platforms.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Deterministic substream derivation, used for per-permutation and
  // per-chain seeds.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t salt) {
    return mix(seed ^ mix(salt + 0xd1b54a32d192ed03ull));
  }

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform on [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, bound), unbiased via rejection. bound must be > 0.
  std::uint64_t next_below(std::uint64_t bound) {
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() -
        std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x = next();
    while (x >= limit) x = next();
    return x % bound;
  }

  // Standard normal via Box-Muller; the second deviate of each pair is cached.
  double next_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = next_double();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Gamma(shape, 1) via Marsaglia-Tsang squeeze; shape < 1 handled by boosting.
  double next_gamma(double shape) {
    if (shape < 1.0) {
      double u = next_double();
      if (u <= 0.0) u = 0x1.0p-53;
      return next_gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      const double x = next_normal();
      const double v0 = 1.0 + c * x;
      if (v0 <= 0.0) continue;
      const double v = v0 * v0 * v0;
      const double u = next_double();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
        return d * v;
    }
  }

  // Student-t with dof degrees of freedom.
  double next_student_t(double dof) {
    const double z = next_normal();
    const double chi2 = 2.0 * next_gamma(0.5 * dof);
    return z / std::sqrt(chi2 / dof);
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace esfbma
