#include "stimgen/rng.hpp"

#include <cmath>
#include <numbers>

namespace stimgen {

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  // u1 in (0,1] keeps the log finite
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double angle = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(angle);
  have_spare_ = true;
  return r * std::cos(angle);
}

std::size_t Rng::index(std::size_t n) {
  if (n <= 1) return 0;
  // rejection sampling over the top multiple of n avoids modulo bias
  std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return static_cast<std::size_t>(x % n);
}

Tensor Rng::normal_tensor(const Shape& s, double mean, double stddev) {
  Tensor t = Tensor::zeros(s);
  for (double& v : t.data) v = mean + stddev * normal();
  return t;
}

}  // namespace stimgen
