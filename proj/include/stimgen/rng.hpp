#pragma once

#include <cstdint>
#include <random>

#include "stimgen/tensor.hpp"

namespace stimgen {

// Deterministic random source. Normal variates come from Box-Muller over the
// raw mt19937_64 stream, so sequences are bit-identical across standard
// library implementations. Every stochastic component in the library draws
// through this class; none touch std::normal_distribution.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // uniform in [0, 1)
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal();

  // unbiased uniform index in [0, n)
  std::size_t index(std::size_t n);

  Tensor normal_tensor(const Shape& s, double mean = 0.0, double stddev = 1.0);

  // Fisher-Yates, driven by index() so the permutation is platform-stable.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace stimgen
