#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace plspoly {

// Seeded random source whose every draw is fully pinned down by the C++
// standard: mt19937_64 for bits, explicit ldexp/Box-Muller on top. The
// distribution adapters in <random> are implementation-defined, which would
// break "same seed, bit-identical problem" across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Uniform on [0, 1), 53 random bits.
  double uniform01() { return std::ldexp(static_cast<double>(gen_() >> 11), -53); }

  // Standard normal via Box-Muller (cosine branch only, so draws stay
  // aligned two-to-one with the underlying stream).
  double gaussian() {
    const double u1 = 1.0 - uniform01();  // (0, 1]
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Uniform on (-1, 1).
  double uniform_symmetric() { return 2.0 * uniform01() - 1.0; }

  // +1 or -1 with equal probability.
  double rademacher() { return (gen_() & 1u) ? 1.0 : -1.0; }

  // Uniform integer in [0, n); n >= 1.
  std::uint64_t below(std::uint64_t n) { return gen_() % n; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace plspoly
