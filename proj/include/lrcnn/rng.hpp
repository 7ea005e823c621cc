#pragma once

#include <cstdint>
#include <random>

namespace lrcnn {

/// Seeded generator with a fully pinned output sequence: std::mt19937_64 (its
/// output is fixed by the standard) plus hand-written uniform, integer and
/// Box-Muller normal transforms, since the std distributions differ between
/// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer on [0, n); n must be > 0.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

  /// Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal();

  bool bernoulli(double p) { return uniform() < p; }

  /// Independent child seed for stream `index` (splitmix64 of master ^ index).
  static std::uint64_t derive(std::uint64_t master, std::uint64_t index);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace lrcnn
