#pragma once

#include <cstdint>
#include <random>

#include "pirnn/vec3.hpp"

namespace pirnn {

/// Seeded generator with platform-independent distributions.
///
/// Bits come from std::mt19937_64; the distribution transforms are written
/// out here rather than taken from <random>.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Independent stream for item `index` of a job seeded with `master`.
  static Rng stream(std::uint64_t master, std::uint64_t index);

  std::uint64_t bits() { return engine_(); }
  double uniform();  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();   // standard normal, Box-Muller
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }
  Vec3 unit_vector();

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace pirnn
