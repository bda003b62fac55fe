#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace pushrel {

// Seeded generator with hand-rolled distributions so that streams depend only
// on the seed, not on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  int pick(int n) { return static_cast<int>(gen_() % static_cast<std::uint64_t>(n)); }

  bool chance(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = gen_() % i;
      std::swap(v[i - 1], v[j]);
    }
  }

  // Derives an independent stream; used to give each scene/trajectory its own seed.
  std::uint64_t fork() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

}  // namespace pushrel
