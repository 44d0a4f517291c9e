#pragma once

#include <cstdint>
#include <random>

namespace tlgp {

/// Seedable generator with fixed, documented draw algorithms so that sampled
/// datasets reproduce for a given seed: mt19937_64 underneath (bit-portable
/// per the C++ standard), uniforms from the top 53 bits, normals via
/// Box-Muller (pair-cached), Poisson via Knuth's product method.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform double in [0, 1).
  double uniform();

  /// Uniform integer in [0, n).
  std::uint64_t uniform_below(std::uint64_t n);

  /// Standard normal.
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Poisson draw; intended for small means (group sizes).
  int poisson(double lambda);

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Deterministic sub-seed derivation (splitmix64 over base ^ stream tag), so
/// independent sampling stages can use independent generators.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace tlgp
