#ifndef FAIRSAMPLE_ISING_HPP
#define FAIRSAMPLE_ISING_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fairsample/error.hpp"
#include "fairsample/spin_config.hpp"

namespace fairsample {

/// One k-body coupling: coefficient times the product of the listed spins.
struct IsingTerm {
  std::vector<std::size_t> sites;  // strictly increasing
  double coeff = 0.0;

  friend bool operator==(const IsingTerm&, const IsingTerm&) = default;
};

/// Inverse temperature. Zero (infinite temperature) is admitted.
class Temperature {
 public:
  explicit Temperature(double beta) : beta_(beta) {
    if (!std::isfinite(beta) || beta < 0.0) {
      throw ContractError("inverse temperature must be finite and non-negative");
    }
  }
  double beta() const noexcept { return beta_; }

 private:
  double beta_;
};

/// Classical energy function
///   E(s) = offset + sum_terms coeff * prod_{i in sites} s_i.
///
/// Terms are canonicalized on construction: site lists sorted, duplicates
/// merged, zero coefficients dropped, terms ordered by (order, sites). Two
/// models describing the same function therefore compare equal.
class IsingModel {
 public:
  IsingModel() = default;

  IsingModel(std::size_t n_sites, std::vector<IsingTerm> terms, double offset = 0.0)
      : n_sites_(n_sites), offset_(offset) {
    if (n_sites == 0 || n_sites > SpinConfig::kMaxSites) {
      throw CapacityError("IsingModel needs 1..64 sites, got " + std::to_string(n_sites));
    }
    std::map<std::vector<std::size_t>, double> merged;
    for (auto& term : terms) {
      auto sites = term.sites;
      std::sort(sites.begin(), sites.end());
      if (std::adjacent_find(sites.begin(), sites.end()) != sites.end()) {
        throw ContractError("term lists a site twice");
      }
      if (!sites.empty() && sites.back() >= n_sites) {
        throw IndexError("term site " + std::to_string(sites.back()) +
                         " out of range for " + std::to_string(n_sites) + " sites");
      }
      if (sites.empty()) {
        offset_ += term.coeff;
        continue;
      }
      merged[std::move(sites)] += term.coeff;
    }
    for (auto& [sites, coeff] : merged) {
      if (coeff != 0.0) terms_.push_back({sites, coeff});
    }
    std::stable_sort(terms_.begin(), terms_.end(), [](const auto& a, const auto& b) {
      return a.sites.size() < b.sites.size();
    });
    index_terms();
  }

  std::size_t n_sites() const noexcept { return n_sites_; }
  double offset() const noexcept { return offset_; }
  const std::vector<IsingTerm>& terms() const noexcept { return terms_; }

  std::size_t max_order() const noexcept {
    std::size_t k = 0;
    for (const auto& t : terms_) k = std::max(k, t.sites.size());
    return k;
  }

  /// True when every coefficient and the offset are integers; energy ties are
  /// then exact.
  bool has_integer_coefficients() const noexcept {
    auto integral = [](double v) { return std::nearbyint(v) == v; };
    if (!integral(offset_)) return false;
    return std::all_of(terms_.begin(), terms_.end(),
                       [&](const auto& t) { return integral(t.coeff); });
  }

  /// True when every coefficient is a multiple of 1/256 of moderate size.
  /// Sums of such values are exact in double precision, so energy ties,
  /// incremental updates and conservation laws hold bit-for-bit. Integer
  /// models and penalty models built from clauses of width <= 8 qualify.
  bool has_exact_arithmetic() const noexcept {
    auto dyadic = [](double v) {
      const double scaled = v * 256.0;
      return std::nearbyint(scaled) == scaled && std::abs(v) < 0x1.0p32;
    };
    if (!dyadic(offset_)) return false;
    return std::all_of(terms_.begin(), terms_.end(), [&](const auto& t) { return dyadic(t.coeff); });
  }

  /// True when no term has odd order (energy is invariant under s -> -s).
  bool is_spin_flip_symmetric() const noexcept {
    return std::all_of(terms_.begin(), terms_.end(),
                       [](const auto& t) { return t.sites.size() % 2 == 0; });
  }

  /// Terms touching `site`, by index into terms().
  const std::vector<std::size_t>& terms_at(std::size_t site) const { return by_site_.at(site); }

  /// Energy of the configuration whose packed bits are `bits`.
  double energy_of_bits(std::uint64_t bits) const noexcept {
    double e = offset_;
    for (std::size_t t = 0; t < terms_.size(); ++t) {
      const bool odd = std::popcount(bits & masks_[t]) & 1;
      e += odd ? -terms_[t].coeff : terms_[t].coeff;
    }
    return e;
  }

  /// Energies of all 2^N basis configurations, indexed by packed bits.
  std::vector<double> energy_table() const {
    if (n_sites_ > 30) throw CapacityError("energy table needs N <= 30");
    std::vector<double> table(std::size_t{1} << n_sites_);
    for (std::uint64_t z = 0; z < table.size(); ++z) table[z] = energy_of_bits(z);
    return table;
  }

  /// Sum of squared coefficients; ||H - offset||_F^2 = 2^N * this.
  double squared_coefficient_norm() const noexcept {
    double s = 0.0;
    for (const auto& t : terms_) s += t.coeff * t.coeff;
    return s;
  }

  std::uint64_t term_mask(std::size_t t) const { return masks_.at(t); }

  friend bool operator==(const IsingModel& a, const IsingModel& b) {
    return a.n_sites_ == b.n_sites_ && a.offset_ == b.offset_ && a.terms_ == b.terms_;
  }

 private:
  void index_terms() {
    masks_.clear();
    by_site_.assign(n_sites_, {});
    for (std::size_t t = 0; t < terms_.size(); ++t) {
      std::uint64_t m = 0;
      for (auto s : terms_[t].sites) {
        m |= std::uint64_t{1} << s;
        by_site_[s].push_back(t);
      }
      masks_.push_back(m);
    }
  }

  std::size_t n_sites_ = 0;
  double offset_ = 0.0;
  std::vector<IsingTerm> terms_;
  std::vector<std::uint64_t> masks_;
  std::vector<std::vector<std::size_t>> by_site_;
};

inline void check_dimension(const IsingModel& model, const SpinConfig& config) {
  if (config.size() != model.n_sites()) {
    throw DimensionError("configuration has " + std::to_string(config.size()) +
                         " sites, model has " + std::to_string(model.n_sites()));
  }
}

inline double energy(const IsingModel& model, const SpinConfig& config) {
  check_dimension(model, config);
  return model.energy_of_bits(config.bits());
}

/// E(flip(config, site)) - E(config), visiting only the terms containing site.
inline double delta_energy_flip(const IsingModel& model, const SpinConfig& config,
                                std::size_t site) {
  check_dimension(model, config);
  if (site >= model.n_sites()) {
    throw IndexError("site " + std::to_string(site) + " out of range");
  }
  double delta = 0.0;
  for (auto t : model.terms_at(site)) {
    const bool odd = std::popcount(config.bits() & model.term_mask(t)) & 1;
    const double value = odd ? -model.terms()[t].coeff : model.terms()[t].coeff;
    delta -= 2.0 * value;
  }
  return delta;
}

/// Unnormalized Boltzmann weight exp(-beta E).
inline double boltzmann_weight(const IsingModel& model, const SpinConfig& config,
                               Temperature t) {
  return std::exp(-t.beta() * energy(model, config));
}

struct GroundStates {
  double min_energy = 0.0;
  std::vector<SpinConfig> states;  // ascending packed-bit order
};

inline constexpr std::size_t kMaxEnumerationSites = 24;

/// Tolerance used when deciding that two energies are degenerate.
inline double degeneracy_tolerance(const IsingModel& model) {
  return model.has_exact_arithmetic() ? 0.0 : 1e-9;
}

/// Exhaustive search of all 2^N configurations.
inline GroundStates ground_states_bruteforce(const IsingModel& model) {
  if (model.n_sites() > kMaxEnumerationSites) {
    throw CapacityError("brute-force enumeration limited to " +
                        std::to_string(kMaxEnumerationSites) + " sites");
  }
  const double tol = degeneracy_tolerance(model);
  const std::uint64_t count = std::uint64_t{1} << model.n_sites();
  GroundStates out;
  out.min_energy = std::numeric_limits<double>::infinity();
  std::vector<std::uint64_t> hits;
  for (std::uint64_t z = 0; z < count; ++z) {
    const double e = model.energy_of_bits(z);
    if (e < out.min_energy - tol) {
      out.min_energy = e;
      hits.clear();
      hits.push_back(z);
    } else if (e <= out.min_energy + tol) {
      hits.push_back(z);
      out.min_energy = std::min(out.min_energy, e);
    }
  }
  // A later, slightly lower energy may push early hits outside the window.
  for (auto z : hits) {
    if (model.energy_of_bits(z) <= out.min_energy + tol) {
      out.states.emplace_back(model.n_sites(), z);
    }
  }
  return out;
}

// JSON: {"n_sites": N, "offset": c, "terms": [{"sites": [...], "coeff": J}, ...]}

inline void to_json(nlohmann::json& j, const IsingModel& model) {
  j = nlohmann::json::object();
  j["n_sites"] = model.n_sites();
  j["offset"] = model.offset();
  auto terms = nlohmann::json::array();
  for (const auto& t : model.terms()) {
    terms.push_back({{"sites", t.sites}, {"coeff", t.coeff}});
  }
  j["terms"] = std::move(terms);
}

inline void from_json(const nlohmann::json& j, IsingModel& model) {
  try {
    std::vector<IsingTerm> terms;
    for (const auto& t : j.at("terms")) {
      terms.push_back({t.at("sites").get<std::vector<std::size_t>>(), t.at("coeff").get<double>()});
    }
    model = IsingModel(j.at("n_sites").get<std::size_t>(), std::move(terms),
                       j.value("offset", 0.0));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed Ising model JSON: ") + e.what());
  }
}

inline IsingModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open model file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("cannot parse " + path + ": " + e.what());
  }
  return j.get<IsingModel>();
}

inline void save_model(const IsingModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write model file " + path);
  out << nlohmann::json(model).dump(2) << '\n';
}

}  // namespace fairsample

#endif  // FAIRSAMPLE_ISING_HPP
