#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>

#include "ayrl/errors.hpp"

namespace ayrl {

/// Seeded random stream with pinned uniform/normal transforms so that a
/// (seed, call sequence) pair always reproduces the same draws. The standard
/// distribution adaptors keep hidden state and vary between library
/// implementations, which breaks checkpoint round-trips.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_uint64() { return gen_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_uint64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform on {0, 1, ..., n-1} by masked rejection.
  int uniform_int(int n) {
    if (n <= 0) throw UsageError("uniform_int: n must be positive");
    std::uint64_t mask = 1;
    while (mask < static_cast<std::uint64_t>(n)) mask <<= 1;
    --mask;
    for (;;) {
      std::uint64_t v = next_uint64() & mask;
      if (v < static_cast<std::uint64_t>(n)) return static_cast<int>(v);
    }
  }

  /// Box-Muller without the cached second variate, so the stream position
  /// is a pure function of the number of calls.
  double normal(double mean, double stddev) {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double radius = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * radius * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Derives an independent child stream; advances this stream by one draw.
  Rng fork() { return Rng(next_uint64() ^ 0x9E3779B97F4A7C15ull); }

  void save(std::ostream& out) const { out << gen_; }
  void load(std::istream& in) { in >> gen_; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace ayrl
