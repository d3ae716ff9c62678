#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace cpdoc {

/// Deterministic random source. All distributions are hand-rolled on top of
/// mt19937_64 because the std::*_distribution adapters are implementation
/// defined, and run reproducibility (byte-identical CSVs per config+seed)
/// depends on every draw being pinned down.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform in [0, 1).
  double uniform() {
    // 53 high bits -> double mantissa.
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be > 0.
  int uniform_int(int n) { return static_cast<int>(uniform() * n) % n; }

  /// Standard normal via Box-Muller (spare discarded to keep the stream
  /// position independent of call history).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Derive an independent stream for a named sub-component. SplitMix64 over
  /// (seed, stream-id) so sibling streams never correlate.
  static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace cpdoc
