#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace capbench {

// Deterministic random helper. std::mt19937_64's output sequence is pinned by
// the standard, and the bounded draws below avoid std::uniform_*_distribution
// (whose mapping is implementation-defined), so streams are identical across
// platforms for a given seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Inclusive bounds; modulo mapping (bias is irrelevant at fixture scale).
  int uniform_int(int lo, int hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
  }

  double uniform_real(double lo, double hi) {
    const double unit = std::ldexp(static_cast<double>(next_u64() >> 11), -53);
    return lo + unit * (hi - lo);
  }

  bool chance(double p) { return uniform_real(0.0, 1.0) < p; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace capbench
