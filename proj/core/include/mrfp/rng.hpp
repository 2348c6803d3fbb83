#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mrfp {

// splitmix64 finalizer; decorrelates nearby seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed of the child stream for (master, iteration, purpose tag). Every random
// draw in the library comes from a stream derived this way, so any run can be
// replayed bit-identically from its recorded seeds alone.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t iteration,
                                 std::uint64_t tag) {
  return mix_seed(mix_seed(mix_seed(master) ^ iteration) ^ tag);
}

// Deterministic random source: mt19937_64 plus an explicit Box-Muller
// transform, so the gaussian sequence does not depend on the standard
// library's (implementation-defined) std::normal_distribution.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // uniform in [0, 1), 53-bit resolution
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1], keeps the log finite
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

  bool bernoulli(double p) { return uniform() < p; }

  // uniform integer in [lo, hi], both inclusive
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(gen_() % span);
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mrfp
