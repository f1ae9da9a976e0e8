#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace csrnet {

// Deterministic RNG wrapper. All draws go through fixed conversions rather
// than std distributions, so streams are bit-identical across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t next_u64() { return eng_(); }

  std::size_t below(std::size_t n) {
    return static_cast<std::size_t>(eng_() % n);
  }

  // Fisher-Yates.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace csrnet
