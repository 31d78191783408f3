#ifndef FAIRSAMPLE_RANDOM_HPP
#define FAIRSAMPLE_RANDOM_HPP

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace fairsample {

/// Engine used everywhere. Distributions below are written out by hand so a
/// fixed seed yields the same stream on every standard library.
using Rng = std::mt19937_64;

/// splitmix64 finalizer; derives independent task seeds from a base seed.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t task) noexcept {
  return mix_seed(base ^ mix_seed(task));
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                    std::uint64_t b) noexcept {
  return derive_seed(derive_seed(base, a), b);
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_real(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

/// Uniform integer in [0, n), n > 0 (Lemire's multiply-shift with rejection).
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  std::uint64_t x = rng();
  __uint128_t m = static_cast<__uint128_t>(x) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      x = rng();
      m = static_cast<__uint128_t>(x) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

template <typename T>
void shuffle(std::span<T> values, Rng& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_index(rng, i));
    std::swap(values[i - 1], values[j]);
  }
}

}  // namespace fairsample

#endif  // FAIRSAMPLE_RANDOM_HPP
