#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace agla {

// Portable seeded generator: xoshiro256** with its 256-bit state filled from
// splitmix64(seed). All derived draws (uniform reals, bounded integers,
// shuffles) are implemented here rather than through <random> distributions,
// whose output is implementation-defined. Identical seeds therefore yield
// identical streams on every platform.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n), unbiased (rejection sampling). n must be > 0.
  std::size_t below(std::size_t n);

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  /// k distinct indices from [0, n), in draw order.
  std::vector<std::size_t> choose(std::size_t n, std::size_t k);

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace agla
