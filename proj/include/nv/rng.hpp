#pragma once

#include <cmath>
#include <cstdint>

namespace nv {

/// splitmix64 mixing step; used for seeding and stream derivation.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// xoshiro256** — portable, fast, bit-reproducible across platforms.
class Xoshiro256ss {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256ss(std::uint64_t seed) {
    for (auto& word : state_) word = splitmix64(seed);
  }

  /// Independent stream derived from (seed, stream index); parallel
  /// consumers seeded this way match serial execution draw-for-draw.
  static Xoshiro256ss substream(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t s = seed;
    const std::uint64_t mixed = splitmix64(s) ^ (0x9e3779b97f4a7c15ULL * (index + 1));
    std::uint64_t s2 = mixed;
    splitmix64(s2);
    return Xoshiro256ss(s2);
  }

  std::uint64_t operator()() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  static constexpr std::uint64_t min() { return 0; }
  static constexpr std::uint64_t max() { return ~0ULL; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t state_[4];
};

namespace detail {

inline long long poisson_inversion(Xoshiro256ss& rng, double mean) {
  const double limit = std::exp(-mean);
  double prod = rng.uniform();
  long long k = 0;
  while (prod > limit) {
    prod *= rng.uniform();
    ++k;
  }
  return k;
}

// Transformed rejection with squeeze (Hormann's PTRS), valid for mean >= 10.
inline long long poisson_ptrs(Xoshiro256ss& rng, double mean) {
  const double slam = std::sqrt(mean);
  const double loglam = std::log(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double v_r = 0.9277 - 3.6224 / (b - 2.0);

  for (;;) {
    const double u = rng.uniform() - 0.5;
    const double v = rng.uniform();
    const double us = 0.5 - std::fabs(u);
    const auto k = static_cast<long long>(std::floor((2.0 * a / us + b) * u + mean + 0.43));
    if (us >= 0.07 && v <= v_r) return k;
    if (k < 0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
        static_cast<double>(k) * loglam - mean - std::lgamma(static_cast<double>(k) + 1.0))
      return k;
  }
}

}  // namespace detail

/// Deterministic Poisson sampling: inversion below mean 10, PTRS above.
inline long long sample_poisson(Xoshiro256ss& rng, double mean) {
  if (mean <= 0) return 0;
  return mean < 10.0 ? detail::poisson_inversion(rng, mean) : detail::poisson_ptrs(rng, mean);
}

}  // namespace nv
