#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace contradice {

/// SplitMix64 finalizer, used to derive independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for stream `index` split from `master`.
inline std::uint64_t split_seed(std::uint64_t master, std::uint64_t index) {
  return mix_seed(mix_seed(master) ^ mix_seed(index + 0x632be59bd9b4e019ULL));
}

/// mt19937_64 with portable uniform and categorical draws. The standard
/// distributions are implementation-defined, which would break byte-identical
/// datasets across toolchains.
class SplitRng {
 public:
  explicit SplitRng(std::uint64_t seed) : engine_(mix_seed(seed)) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Index drawn from an unnormalized non-negative weight row.
  template <typename Row>
  int categorical(const Row& weights) {
    const double total = weights.sum();
    const double u = uniform() * total;
    double acc = 0.0;
    const int n = static_cast<int>(weights.size());
    int last_positive = 0;
    for (int i = 0; i < n; ++i) {
      if (weights(i) <= 0.0) continue;
      acc += weights(i);
      last_positive = i;
      if (u < acc) return i;
    }
    return last_positive;
  }

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace contradice
