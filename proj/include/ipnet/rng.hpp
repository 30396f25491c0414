#pragma once

// Deterministic random number generation.
//
// Every random quantity in the project is drawn from a named, portable
// generator so that runs are reproducible bit-for-bit from their seeds,
// independent of platform endianness and thread scheduling:
//
//   * SplitMix64 (Steele/Lea/Vigna) seeds states and derives substreams.
//   * xoshiro256++ 1.0 (Blackman/Vigna) is the working generator.
//   * Gaussian variates come from the Box-Muller transform.
//
// Parallel work never shares a generator: unit of work i (a dataset sample,
// a Monte Carlo trial, a layer initialization) uses its own generator seeded
// with stream_seed(master, i), so results do not depend on scheduling order.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>

namespace ipnet {

/// SplitMix64. Passes through all 2^64 states; used for seeding and for
/// deriving independent substream seeds.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

/// Seed for substream `index` of a master seed: two SplitMix64 scrambles of
/// (master, index). Distinct (master, index) pairs map to well-separated
/// xoshiro seed states.
inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) {
  SplitMix64 mix(master);
  std::uint64_t a = mix.next();
  SplitMix64 mix2(a ^ (index * 0xD2B74407B1CE6E93ULL + 0x9E3779B97F4A7C15ULL));
  return mix2.next();
}

/// xoshiro256++ 1.0, state seeded by four SplitMix64 outputs.
class Xoshiro256pp {
 public:
  explicit Xoshiro256pp(std::uint64_t seed) {
    SplitMix64 mix(seed);
    for (auto& w : s_) w = mix.next();
  }

  std::uint64_t next() {
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

  /// Uniform double in [0, 1), 53 significant bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// One Box-Muller pair of independent standard normals.
  void gaussian_pair(double& z0, double& z1) {
    // 1 - u in (0, 1] keeps the log argument away from zero.
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    z0 = r * std::cos(t);
    z1 = r * std::sin(t);
  }

  /// Standard normal N(0, 1). Draws a Box-Muller pair and caches the spare.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double z0, z1;
    gaussian_pair(z0, z1);
    spare_ = z1;
    have_spare_ = true;
    return z0;
  }

  /// Circularly-symmetric complex Gaussian CN(0, 1): variance 1/2 per part.
  /// Consumes exactly one Box-Muller pair; independent of gaussian()'s cache.
  std::complex<double> cgaussian() {
    double z0, z1;
    gaussian_pair(z0, z1);
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    return {z0 * inv_sqrt2, z1 * inv_sqrt2};
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace ipnet
