#ifndef FAIRSAMPLE_SPIN_CONFIG_HPP
#define FAIRSAMPLE_SPIN_CONFIG_HPP

#include <bit>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fairsample/error.hpp"
#include "fairsample/random.hpp"

namespace fairsample {

/// Assignment of N <= 64 Ising spins packed into one machine word.
///
/// Bit i set means spin i is -1 (s_i = 1 - 2 b_i). Read as a Boolean
/// assignment, bit i is the value of variable x_i, so s = +1 <=> x = 0.
/// The same word doubles as the computational-basis index of a statevector.
class SpinConfig {
 public:
  static constexpr std::size_t kMaxSites = 64;

  SpinConfig() = default;

  explicit SpinConfig(std::size_t n_sites, std::uint64_t bits = 0)
      : n_(n_sites), bits_(bits & mask_for(n_sites)) {
    if (n_sites > kMaxSites) {
      throw CapacityError("SpinConfig supports at most 64 sites, got " +
                          std::to_string(n_sites));
    }
  }

  /// From explicit +/-1 values.
  static SpinConfig from_spins(std::span<const int> spins) {
    SpinConfig c(spins.size());
    for (std::size_t i = 0; i < spins.size(); ++i) {
      if (spins[i] == -1) {
        c.bits_ |= std::uint64_t{1} << i;
      } else if (spins[i] != 1) {
        throw ContractError("spin values must be +1 or -1");
      }
    }
    return c;
  }

  /// From a bitstring whose i-th character is bit i ('0' or '1').
  static SpinConfig from_bitstring(std::string_view text) {
    SpinConfig c(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
      if (text[i] == '1') {
        c.bits_ |= std::uint64_t{1} << i;
      } else if (text[i] != '0') {
        throw FormatError("bitstring may contain only '0' and '1': " + std::string(text));
      }
    }
    return c;
  }

  static SpinConfig random(std::size_t n_sites, Rng& rng) {
    return SpinConfig(n_sites, rng());
  }

  std::size_t size() const noexcept { return n_; }
  std::uint64_t bits() const noexcept { return bits_; }

  bool bit(std::size_t i) const noexcept { return (bits_ >> i) & 1U; }
  int spin(std::size_t i) const noexcept { return bit(i) ? -1 : 1; }

  void flip(std::size_t i) {
    check_index(i);
    bits_ ^= std::uint64_t{1} << i;
  }

  SpinConfig flipped(std::size_t i) const {
    SpinConfig c = *this;
    c.flip(i);
    return c;
  }

  /// Global spin inversion.
  SpinConfig inverted() const noexcept { return SpinConfig(n_, ~bits_); }

  std::vector<int> spins() const {
    std::vector<int> out(n_);
    for (std::size_t i = 0; i < n_; ++i) out[i] = spin(i);
    return out;
  }

  std::string bitstring() const {
    std::string s(n_, '0');
    for (std::size_t i = 0; i < n_; ++i) {
      if (bit(i)) s[i] = '1';
    }
    return s;
  }

  std::size_t hamming_distance(const SpinConfig& other) const noexcept {
    return static_cast<std::size_t>(std::popcount(bits_ ^ other.bits_));
  }

  friend bool operator==(const SpinConfig&, const SpinConfig&) = default;
  friend auto operator<=>(const SpinConfig& a, const SpinConfig& b) {
    if (auto c = a.n_ <=> b.n_; c != 0) return c;
    return a.bits_ <=> b.bits_;
  }

  static constexpr std::uint64_t mask_for(std::size_t n) noexcept {
    return n >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n) - 1;
  }

 private:
  void check_index(std::size_t i) const {
    if (i >= n_) {
      throw IndexError("site " + std::to_string(i) + " out of range for " +
                       std::to_string(n_) + " sites");
    }
  }

  std::size_t n_ = 0;
  std::uint64_t bits_ = 0;
};

struct SpinConfigHash {
  std::size_t operator()(const SpinConfig& c) const noexcept {
    return std::hash<std::uint64_t>{}(c.bits() ^ (std::uint64_t{c.size()} << 58));
  }
};

}  // namespace fairsample

#endif  // FAIRSAMPLE_SPIN_CONFIG_HPP
