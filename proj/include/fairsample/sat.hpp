#ifndef FAIRSAMPLE_SAT_HPP
#define FAIRSAMPLE_SAT_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fairsample/error.hpp"
#include "fairsample/ising.hpp"
#include "fairsample/random.hpp"
#include "fairsample/spin_config.hpp"

namespace fairsample {

/// Variable x_var or its negation. Truth of x_var is bit `var` of the
/// assignment (x = 1 <=> s = -1).
struct Literal {
  std::size_t var = 0;
  bool negated = false;

  bool eval(const SpinConfig& assignment) const { return assignment.bit(var) != negated; }

  /// 1-indexed signed DIMACS literal.
  long dimacs() const {
    const auto v = static_cast<long>(var) + 1;
    return negated ? -v : v;
  }

  friend bool operator==(const Literal&, const Literal&) = default;
  friend auto operator<=>(const Literal&, const Literal&) = default;
};

/// Disjunction of literals, stored sorted by variable.
struct Clause {
  std::vector<Literal> literals;

  Clause() = default;
  explicit Clause(std::vector<Literal> lits) : literals(std::move(lits)) {
    std::sort(literals.begin(), literals.end());
    for (std::size_t i = 1; i < literals.size(); ++i) {
      if (literals[i].var == literals[i - 1].var) {
        throw ContractError("clause repeats variable " + std::to_string(literals[i].var));
      }
    }
  }

  std::size_t width() const noexcept { return literals.size(); }

  /// Mask of variables in the clause, and the unique bit pattern on them that
  /// falsifies the clause.
  std::uint64_t var_mask() const noexcept {
    std::uint64_t m = 0;
    for (const auto& l : literals) m |= std::uint64_t{1} << l.var;
    return m;
  }
  std::uint64_t falsifying_bits() const noexcept {
    std::uint64_t v = 0;
    for (const auto& l : literals) {
      if (l.negated) v |= std::uint64_t{1} << l.var;
    }
    return v;
  }

  friend bool operator==(const Clause&, const Clause&) = default;
  friend auto operator<=>(const Clause& a, const Clause& b) { return a.literals <=> b.literals; }
};

/// CNF formula over n_vars variables. `k` is the nominal clause width of the
/// generated instance; blocking clauses appended later may be wider.
class CnfFormula {
 public:
  CnfFormula() = default;

  CnfFormula(std::size_t n_vars, std::vector<Clause> clauses, std::size_t k = 0)
      : n_vars_(n_vars), k_(k), clauses_(std::move(clauses)) {
    if (n_vars == 0 || n_vars > SpinConfig::kMaxSites) {
      throw CapacityError("CnfFormula needs 1..64 variables");
    }
    for (const auto& c : clauses_) {
      for (const auto& l : c.literals) {
        if (l.var >= n_vars_) {
          throw IndexError("literal variable " + std::to_string(l.var) + " out of range");
        }
      }
      if (k == 0) k_ = std::max(k_, c.width());
    }
    index();
  }

  std::size_t n_vars() const noexcept { return n_vars_; }
  std::size_t k() const noexcept { return k_; }
  const std::vector<Clause>& clauses() const noexcept { return clauses_; }
  std::size_t n_clauses() const noexcept { return clauses_.size(); }
  double density() const noexcept {
    return static_cast<double>(clauses_.size()) / static_cast<double>(n_vars_);
  }

  std::size_t max_width() const noexcept {
    std::size_t w = 0;
    for (const auto& c : clauses_) w = std::max(w, c.width());
    return w;
  }

  bool clause_satisfied_bits(std::size_t c, std::uint64_t bits) const noexcept {
    return (bits & masks_[c]) != falsifiers_[c];
  }

  std::size_t count_unsatisfied_bits(std::uint64_t bits) const noexcept {
    std::size_t n = 0;
    for (std::size_t c = 0; c < clauses_.size(); ++c) n += (bits & masks_[c]) == falsifiers_[c];
    return n;
  }

  CnfFormula with_clause(Clause clause) const {
    auto clauses = clauses_;
    clauses.push_back(std::move(clause));
    return CnfFormula(n_vars_, std::move(clauses), k_);
  }

  friend bool operator==(const CnfFormula& a, const CnfFormula& b) {
    return a.n_vars_ == b.n_vars_ && a.clauses_ == b.clauses_;
  }

 private:
  void index() {
    masks_.clear();
    falsifiers_.clear();
    for (const auto& c : clauses_) {
      masks_.push_back(c.var_mask());
      falsifiers_.push_back(c.falsifying_bits());
    }
  }

  std::size_t n_vars_ = 0;
  std::size_t k_ = 0;
  std::vector<Clause> clauses_;
  std::vector<std::uint64_t> masks_;
  std::vector<std::uint64_t> falsifiers_;
};

inline bool eval_clause(const Clause& clause, const SpinConfig& assignment) {
  for (const auto& l : clause.literals) {
    if (l.var >= assignment.size()) {
      throw IndexError("clause variable " + std::to_string(l.var) + " not covered by assignment");
    }
  }
  return std::any_of(clause.literals.begin(), clause.literals.end(),
                     [&](const Literal& l) { return l.eval(assignment); });
}

inline std::size_t count_unsatisfied(const CnfFormula& formula, const SpinConfig& assignment) {
  if (assignment.size() != formula.n_vars()) {
    throw DimensionError("assignment has " + std::to_string(assignment.size()) +
                         " variables, formula has " + std::to_string(formula.n_vars()));
  }
  return formula.count_unsatisfied_bits(assignment.bits());
}

inline bool satisfies(const CnfFormula& formula, const SpinConfig& assignment) {
  return count_unsatisfied(formula, assignment) == 0;
}

/// Penalty Hamiltonian with unit cost per violated clause.
///
/// A literal is false with indicator (1 + sigma s)/2, sigma = +1 for x and -1
/// for not-x (from x = (1 - s)/2). The clause penalty is the product of those
/// indicators, expanded over all subsets of its literals.
inline IsingModel to_ising(const CnfFormula& formula) {
  if (formula.max_width() > 3) {
    throw UnsupportedError("to_ising supports clause width <= 3, got " +
                           std::to_string(formula.max_width()));
  }
  std::vector<IsingTerm> terms;
  double offset = 0.0;
  for (const auto& clause : formula.clauses()) {
    const std::size_t w = clause.width();
    const double scale = std::ldexp(1.0, -static_cast<int>(w));
    for (std::uint32_t subset = 0; subset < (1U << w); ++subset) {
      double sign = 1.0;
      std::vector<std::size_t> sites;
      for (std::size_t j = 0; j < w; ++j) {
        if (subset & (1U << j)) {
          sites.push_back(clause.literals[j].var);
          if (clause.literals[j].negated) sign = -sign;
        }
      }
      if (sites.empty()) {
        offset += scale;
      } else {
        terms.push_back({std::move(sites), sign * scale});
      }
    }
  }
  return IsingModel(formula.n_vars(), std::move(terms), offset);
}

/// Number of distinct width-k clauses over n variables: C(n,k) 2^k.
inline double clause_universe_size(std::size_t n, std::size_t k) {
  double c = 1.0;
  for (std::size_t i = 0; i < k; ++i) c = c * static_cast<double>(n - i) / static_cast<double>(i + 1);
  return std::round(c) * std::ldexp(1.0, static_cast<int>(k));
}

inline std::size_t clause_count_for(std::size_t n, double alpha_c) {
  return static_cast<std::size_t>(std::floor(alpha_c * static_cast<double>(n))) + 1;
}

/// Random k-SAT with M = floor(alpha_c n) + 1 distinct clauses drawn
/// uniformly without replacement from the C(n,k) 2^k possible clauses.
inline CnfFormula generate_instance(std::size_t n, std::size_t k, double alpha_c,
                                    std::uint64_t seed) {
  if (k == 0 || n < k) throw ContractError("generate_instance needs 1 <= k <= n");
  if (!(alpha_c >= 0.0) || !std::isfinite(alpha_c)) throw ContractError("alpha_c must be finite and >= 0");
  const std::size_t m = clause_count_for(n, alpha_c);
  if (static_cast<double>(m) > clause_universe_size(n, k)) {
    throw InfeasibleError(std::to_string(m) + " clauses requested but only " +
                          std::to_string(static_cast<long long>(clause_universe_size(n, k))) +
                          " distinct clauses exist");
  }
  Rng rng(seed);
  std::set<Clause> seen;
  std::vector<Clause> clauses;
  std::vector<std::size_t> vars(n);
  while (clauses.size() < m) {
    for (std::size_t i = 0; i < n; ++i) vars[i] = i;
    std::vector<Literal> lits;
    // Partial Fisher-Yates: first k entries form a uniform k-subset.
    for (std::size_t j = 0; j < k; ++j) {
      const auto r = j + static_cast<std::size_t>(uniform_index(rng, n - j));
      std::swap(vars[j], vars[r]);
      lits.push_back({vars[j], (rng() >> 63) != 0});
    }
    Clause c(std::move(lits));
    if (seen.insert(c).second) clauses.push_back(std::move(c));
  }
  return CnfFormula(n, std::move(clauses), k);
}

/// All satisfying assignments in ascending packed-bit order.
inline std::vector<SpinConfig> enumerate_solutions(const CnfFormula& formula) {
  if (formula.n_vars() > kMaxEnumerationSites) {
    throw CapacityError("solution enumeration limited to " +
                        std::to_string(kMaxEnumerationSites) + " variables");
  }
  std::vector<SpinConfig> out;
  const std::uint64_t count = std::uint64_t{1} << formula.n_vars();
  for (std::uint64_t z = 0; z < count; ++z) {
    if (formula.count_unsatisfied_bits(z) == 0) out.emplace_back(formula.n_vars(), z);
  }
  return out;
}

/// Width-n clause that is false exactly at `solution`.
inline CnfFormula add_blocking_clause(const CnfFormula& formula, const SpinConfig& solution) {
  if (!satisfies(formula, solution)) {
    throw ContractError("blocking clause requires a satisfying assignment");
  }
  std::vector<Literal> lits;
  for (std::size_t i = 0; i < formula.n_vars(); ++i) lits.push_back({i, solution.bit(i)});
  return formula.with_clause(Clause(std::move(lits)));
}

// ---------------------------------------------------------------------------
// Instance sets

struct InstanceEntry {
  CnfFormula formula;
  std::vector<SpinConfig> solutions;
  std::uint64_t seed = 0;
};

struct InstanceSet {
  std::size_t k = 0;
  double alpha_c = 0.0;
  std::uint64_t seed = 0;
  std::vector<InstanceEntry> entries;
};

/// Threshold densities used when none is given.
inline double default_alpha_c(std::size_t k) {
  switch (k) {
    case 2: return 1.0;
    case 3: return 4.267;
    default: throw UnsupportedError("no default alpha_c for k = " + std::to_string(k));
  }
}

inline constexpr std::uint64_t kInstanceDrawBudget = 1'000'000;

/// Draws instances for each size in [n_min, n_max] until `per_size` of them
/// have at least two solutions. Draw j for size n uses seed
/// derive_seed(seed, n, j), so the set is reproducible and sizes are
/// independent.
inline InstanceSet build_instance_set(std::size_t n_min, std::size_t n_max, std::size_t k,
                                      std::size_t per_size, double alpha_c, std::uint64_t seed) {
  InstanceSet set{k, alpha_c, seed, {}};
  for (std::size_t n = n_min; n <= n_max; ++n) {
    std::size_t accepted = 0;
    for (std::uint64_t draw = 0; accepted < per_size; ++draw) {
      if (draw >= kInstanceDrawBudget) {
        throw GenerationError("retry budget exhausted for n = " + std::to_string(n));
      }
      const auto s = derive_seed(seed, n, draw);
      auto formula = generate_instance(n, k, alpha_c, s);
      auto solutions = enumerate_solutions(formula);
      if (solutions.size() < 2) continue;
      set.entries.push_back({std::move(formula), std::move(solutions), s});
      ++accepted;
    }
  }
  return set;
}

// ---------------------------------------------------------------------------
// DIMACS

inline void write_dimacs(std::ostream& out, const CnfFormula& formula) {
  out << "p cnf " << formula.n_vars() << ' ' << formula.n_clauses() << '\n';
  for (const auto& c : formula.clauses()) {
    for (const auto& l : c.literals) out << l.dimacs() << ' ';
    out << "0\n";
  }
}

inline CnfFormula read_dimacs(std::istream& in) {
  std::string line;
  long n = -1, m = -1;
  std::vector<Clause> clauses;
  std::vector<Literal> current;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == 'c' || line[0] == '%') continue;
    std::istringstream ls(line);
    if (line[0] == 'p') {
      std::string p, fmt;
      ls >> p >> fmt >> n >> m;
      if (fmt != "cnf" || n <= 0 || m < 0) throw FormatError("bad DIMACS header: " + line);
      continue;
    }
    if (n < 0) throw FormatError("DIMACS clause before header");
    long lit = 0;
    while (ls >> lit) {
      if (lit == 0) {
        clauses.emplace_back(std::move(current));
        current.clear();
        continue;
      }
      const long v = lit < 0 ? -lit : lit;
      if (v > n) throw FormatError("DIMACS literal " + std::to_string(lit) + " exceeds n");
      current.push_back({static_cast<std::size_t>(v - 1), lit < 0});
    }
    if (!ls.eof()) throw FormatError("non-numeric token in DIMACS line: " + line);
  }
  if (n < 0) throw FormatError("missing DIMACS header");
  if (!current.empty()) clauses.emplace_back(std::move(current));
  if (static_cast<long>(clauses.size()) != m) {
    throw FormatError("DIMACS header declares " + std::to_string(m) + " clauses, found " +
                      std::to_string(clauses.size()));
  }
  return CnfFormula(static_cast<std::size_t>(n), std::move(clauses));
}

inline CnfFormula load_dimacs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_dimacs(in);
}

inline void save_dimacs(const CnfFormula& formula, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  write_dimacs(out, formula);
}

inline std::string instance_file_name(std::size_t k, std::size_t n, std::size_t index) {
  return "k" + std::to_string(k) + "_n" + std::to_string(n) + "_" + std::to_string(index) + ".cnf";
}

/// Directory of DIMACS files plus manifest.json
/// {seed, alpha_c, k, instances: [{file, n, seed, solutions: [bitstrings]}]}.
inline void save_instance_set(const InstanceSet& set, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest = {{"seed", set.seed}, {"alpha_c", set.alpha_c}, {"k", set.k}};
  auto entries = nlohmann::json::array();
  std::map<std::size_t, std::size_t> per_n;
  for (const auto& e : set.entries) {
    const auto n = e.formula.n_vars();
    const auto file = instance_file_name(set.k, n, per_n[n]++);
    save_dimacs(e.formula, dir / file);
    std::vector<std::string> sols;
    for (const auto& s : e.solutions) sols.push_back(s.bitstring());
    entries.push_back({{"file", file}, {"n", n}, {"seed", e.seed}, {"solutions", sols}});
  }
  manifest["instances"] = std::move(entries);
  std::ofstream out(dir / "manifest.json");
  if (!out) throw FormatError("cannot write manifest in " + dir.string());
  out << manifest.dump(1) << '\n';
}

inline InstanceSet load_instance_set(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw FormatError("no manifest.json in " + dir.string());
  InstanceSet set;
  try {
    nlohmann::json manifest;
    in >> manifest;
    set.seed = manifest.at("seed").get<std::uint64_t>();
    set.alpha_c = manifest.at("alpha_c").get<double>();
    set.k = manifest.at("k").get<std::size_t>();
    for (const auto& e : manifest.at("instances")) {
      auto formula = load_dimacs(dir / e.at("file").get<std::string>());
      formula = CnfFormula(formula.n_vars(), formula.clauses(), set.k);
      std::vector<SpinConfig> sols;
      for (const auto& s : e.at("solutions")) sols.push_back(SpinConfig::from_bitstring(s.get<std::string>()));
      set.entries.push_back({std::move(formula), std::move(sols), e.at("seed").get<std::uint64_t>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed instance manifest: ") + e.what());
  }
  return set;
}

}  // namespace fairsample

#endif  // FAIRSAMPLE_SAT_HPP
