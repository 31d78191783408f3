#ifndef FAIRSAMPLE_BASELINES_HPP
#define FAIRSAMPLE_BASELINES_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fairsample/error.hpp"
#include "fairsample/ising.hpp"
#include "fairsample/mcmc.hpp"
#include "fairsample/parallel.hpp"
#include "fairsample/random.hpp"
#include "fairsample/sat.hpp"
#include "fairsample/spin_config.hpp"

namespace fairsample {

// ---------------------------------------------------------------------------
// Parallel tempering with isoenergetic cluster moves

struct PtIcmConfig {
  std::vector<double> betas = geometric_ladder(0.1, 10.0, 8);  // ascending
  std::size_t replicas_per_temperature = 2;
  std::size_t sweeps_between_exchanges = 1;
  std::size_t icm_every = 1;  // rounds between ICM passes; 0 disables ICM
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  static std::vector<double> geometric_ladder(double beta_min, double beta_max, std::size_t count) {
    if (count == 0 || !(beta_min > 0.0) || !(beta_max >= beta_min)) {
      throw ContractError("geometric ladder needs 0 < beta_min <= beta_max and count >= 1");
    }
    if (count == 1) return {beta_max};
    std::vector<double> b(count);
    const double ratio = std::pow(beta_max / beta_min, 1.0 / static_cast<double>(count - 1));
    for (std::size_t i = 0; i < count; ++i) b[i] = beta_min * std::pow(ratio, static_cast<double>(i));
    b.back() = beta_max;
    return b;
  }

  void validate() const {
    if (betas.empty()) throw ContractError("PT needs at least one temperature");
    for (std::size_t i = 0; i < betas.size(); ++i) {
      Temperature{betas[i]};
      if (i > 0 && !(betas[i] > betas[i - 1])) throw ContractError("PT betas must be strictly ascending");
    }
    if (replicas_per_temperature == 0) throw ContractError("need at least one replica per temperature");
    if (icm_every > 0 && replicas_per_temperature % 2 != 0) {
      throw ContractError("ICM needs an even replica count per temperature");
    }
    if (sweeps_between_exchanges == 0) throw ContractError("sweeps_between_exchanges must be >= 1");
  }
};

/// min(1, exp((beta_i - beta_j)(E_i - E_j))) for swapping the configurations
/// held at inverse temperatures beta_i and beta_j.
inline double exchange_probability(double beta_i, double beta_j, double e_i, double e_j) {
  const double x = (beta_i - beta_j) * (e_i - e_j);
  return x >= 0.0 ? 1.0 : std::exp(x);
}

inline void require_two_body(const IsingModel& model) {
  if (model.max_order() > 2) {
    throw UnsupportedError("PT-ICM supports only models with one- and two-body terms");
  }
}

/// Neighbour lists of the two-body interaction graph.
inline std::vector<std::vector<std::size_t>> interaction_graph(const IsingModel& model) {
  std::vector<std::vector<std::size_t>> adj(model.n_sites());
  for (const auto& t : model.terms()) {
    if (t.sites.size() == 2) {
      adj[t.sites[0]].push_back(t.sites[1]);
      adj[t.sites[1]].push_back(t.sites[0]);
    }
  }
  return adj;
}

/// Houdayer move: grow the connected cluster of a random site where the
/// replicas disagree, restricted to disagreeing sites, and flip it in both.
/// E_a + E_b is unchanged. Returns the cluster size (0 when a == b).
inline std::size_t icm_move(SpinConfig& a, SpinConfig& b, const IsingModel& model,
                            const std::vector<std::vector<std::size_t>>& graph, Rng& rng) {
  require_two_body(model);
  check_dimension(model, a);
  check_dimension(model, b);
  const std::uint64_t disagree = a.bits() ^ b.bits();
  const auto count = static_cast<std::uint64_t>(std::popcount(disagree));
  if (count == 0) return 0;
  // The pick-th set bit of `disagree`.
  std::uint64_t rest = disagree;
  for (auto pick = uniform_index(rng, count); pick > 0; --pick) rest &= rest - 1;
  const auto seed_site = static_cast<std::size_t>(std::countr_zero(rest));

  std::uint64_t cluster = std::uint64_t{1} << seed_site;
  std::vector<std::size_t> stack{seed_site};
  while (!stack.empty()) {
    const auto s = stack.back();
    stack.pop_back();
    for (auto nb : graph[s]) {
      const auto bit = std::uint64_t{1} << nb;
      if ((disagree & bit) && !(cluster & bit)) {
        cluster |= bit;
        stack.push_back(nb);
      }
    }
  }
  a = SpinConfig(a.size(), a.bits() ^ cluster);
  b = SpinConfig(b.size(), b.bits() ^ cluster);
  return static_cast<std::size_t>(std::popcount(cluster));
}

inline std::size_t icm_move(SpinConfig& a, SpinConfig& b, const IsingModel& model, Rng& rng) {
  return icm_move(a, b, model, interaction_graph(model), rng);
}

struct PtIcmResult {
  /// One record per round from replica 0 at the coldest temperature.
  /// Transition counts in records and first_visits are over all replicas.
  ChainTrace trace;
  /// First visit of each state by the traced replica, counting only its own
  /// sweeps and the exchange/ICM moves it took part in.
  std::unordered_map<SpinConfig, std::uint64_t, SpinConfigHash> coldest_first_visits;
  std::uint64_t total_transitions = 0;
  std::uint64_t coldest_transitions = 0;
  std::vector<std::uint64_t> exchange_attempts;  // per adjacent temperature pair
  std::vector<std::uint64_t> exchange_accepts;
  std::uint64_t icm_moves = 0;
  std::uint64_t icm_flipped_sites = 0;
};

/// Step accounting: one sweep of one replica = N transitions; each exchange
/// attempt and each ICM move = 1 transition.
inline PtIcmResult pt_icm_run(const IsingModel& model, const PtIcmConfig& cfg, std::uint64_t rounds) {
  require_two_body(model);
  cfg.validate();
  if (rounds == 0) throw ContractError("PT-ICM needs at least one round");
  const std::size_t n = model.n_sites();
  const std::size_t n_temps = cfg.betas.size();
  const std::size_t per = cfg.replicas_per_temperature;
  const std::size_t n_rep = n_temps * per;
  const std::size_t traced = (n_temps - 1) * per;
  const auto graph = interaction_graph(model);

  Rng master(derive_seed(cfg.seed, 0));
  std::vector<Rng> rngs;
  std::vector<ChainState> reps;
  for (std::size_t r = 0; r < n_rep; ++r) {
    rngs.emplace_back(derive_seed(cfg.seed, 1, r));
    reps.push_back(ChainState::start(model, SpinConfig::random(n, rngs.back())));
  }
  // reps[temp * per + k] is copy k at cfg.betas[temp].

  PtIcmResult out;
  out.exchange_attempts.assign(n_temps > 1 ? n_temps - 1 : 0, 0);
  out.exchange_accepts.assign(out.exchange_attempts.size(), 0);
  auto& trace = out.trace;
  trace.n_sites = n;
  std::uint64_t global = 0;
  std::uint64_t own = 0;
  auto note = [&](std::uint64_t round) {
    trace.note_visit(reps[traced].current, global, round);
    out.coldest_first_visits.try_emplace(reps[traced].current, own);
  };
  note(0);

  const std::uint64_t sweep_cost = static_cast<std::uint64_t>(n) * cfg.sweeps_between_exchanges;
  for (std::uint64_t round = 1; round <= rounds; ++round) {
    const std::uint64_t base = global;
    parallel_for(n_rep, cfg.threads, [&](std::size_t r) {
      const Temperature t(cfg.betas[r / per]);
      if (r != traced) {
        for (std::size_t s = 0; s < cfg.sweeps_between_exchanges; ++s) ssf_sweep(reps[r], model, t, rngs[r]);
        return;
      }
      std::uint64_t local = 0;
      auto visit = [&](const ChainState& c) {
        ++local;
        trace.note_visit(c.current, base + r * sweep_cost + local, round);
        out.coldest_first_visits.try_emplace(c.current, own + local);
      };
      for (std::size_t s = 0; s < cfg.sweeps_between_exchanges; ++s) ssf_sweep(reps[r], model, t, rngs[r], visit);
    });
    global += n_rep * sweep_cost;
    own += sweep_cost;

    for (std::size_t i = 0; i + 1 < n_temps; ++i) {
      for (std::size_t k = 0; k < per; ++k) {
        auto& lo = reps[i * per + k];
        auto& hi = reps[(i + 1) * per + k];
        ++out.exchange_attempts[i];
        ++global;
        const bool touches = (i + 1) * per + k == traced;
        if (touches) ++own;
        const double p = exchange_probability(cfg.betas[i], cfg.betas[i + 1], lo.energy, hi.energy);
        if (p >= 1.0 || uniform01(master) < p) {
          std::swap(lo.current, hi.current);
          std::swap(lo.energy, hi.energy);
          ++out.exchange_accepts[i];
        }
        if (touches) note(round);
      }
    }

    if (cfg.icm_every > 0 && round % cfg.icm_every == 0) {
      for (std::size_t temp = 0; temp < n_temps; ++temp) {
        for (std::size_t k = 0; k + 1 < per; k += 2) {
          auto& a = reps[temp * per + k];
          auto& b = reps[temp * per + k + 1];
          out.icm_flipped_sites += icm_move(a.current, b.current, model, graph, master);
          a.energy = model.energy_of_bits(a.current.bits());
          b.energy = model.energy_of_bits(b.current.bits());
          ++out.icm_moves;
          ++global;
          const bool touches = temp * per + k == traced;
          if (touches) {
            ++own;
            note(round);
          }
        }
      }
    }
    const auto& c = reps[traced];
    trace.records.push_back({round, global, c.current, c.energy, true, KernelTag::kPtIcm});
  }
  trace.total_steps = rounds;
  trace.total_transitions = global;
  out.total_transitions = global;
  out.coldest_transitions = own;
  return out;
}

// ---------------------------------------------------------------------------
// WalkSAT

enum class WalkSatVariant { kPlain, kLm };

struct WalkSatConfig {
  double noise = 0.5;
  std::uint64_t max_flips = 1'000'000;
  WalkSatVariant variant = WalkSatVariant::kPlain;
  double lm_w1 = 6.0;  // weight of clauses going from 0 to 1 true literals
  double lm_w2 = 1.0;  // weight of clauses going from 1 to 2 true literals
  std::uint64_t seed = 0;
  bool record_trace = false;

  void validate() const {
    if (!(noise >= 0.0 && noise <= 1.0)) throw ContractError("WalkSAT noise must lie in [0, 1]");
  }
};

struct WalkSatResult {
  std::optional<SpinConfig> solution;
  std::uint64_t flips = 0;
  SpinConfig initial;
  std::vector<std::size_t> flipped;  // filled when record_trace is set
};

namespace detail {

/// Incremental clause bookkeeping for local search.
class WalkSatState {
 public:
  WalkSatState(const CnfFormula& f, SpinConfig init) : f_(f), x_(init) {
    occ_.resize(f.n_vars());
    true_count_.assign(f.n_clauses(), 0);
    pos_.assign(f.n_clauses(), kNone);
    for (std::size_t c = 0; c < f.n_clauses(); ++c) {
      for (const auto& l : f.clauses()[c].literals) {
        occ_[l.var].push_back(c);
        if (l.eval(x_)) ++true_count_[c];
      }
      if (true_count_[c] == 0) add_unsat(c);
    }
  }

  bool solved() const noexcept { return unsat_.empty(); }
  const std::vector<std::size_t>& unsat() const noexcept { return unsat_; }
  const SpinConfig& assignment() const noexcept { return x_; }

  /// Clauses made false by flipping v.
  std::size_t break_count(std::size_t v) const {
    std::size_t b = 0;
    for (auto c : occ_[v]) b += true_count_[c] == 1 && literal_true(c, v);
    return b;
  }

  /// Clauses going 0 -> 1 and 1 -> 2 true literals when v flips.
  std::pair<std::size_t, std::size_t> make_counts(std::size_t v) const {
    std::size_t m1 = 0, m2 = 0;
    for (auto c : occ_[v]) {
      if (literal_true(c, v)) continue;
      m1 += true_count_[c] == 0;
      m2 += true_count_[c] == 1;
    }
    return {m1, m2};
  }

  void flip(std::size_t v) {
    x_.flip(v);
    for (auto c : occ_[v]) {
      if (literal_true(c, v)) {
        if (true_count_[c]++ == 0) remove_unsat(c);
      } else if (--true_count_[c] == 0) {
        add_unsat(c);
      }
    }
  }

 private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  bool literal_true(std::size_t c, std::size_t v) const {
    for (const auto& l : f_.clauses()[c].literals) {
      if (l.var == v) return l.eval(x_);
    }
    return false;
  }
  void add_unsat(std::size_t c) {
    pos_[c] = unsat_.size();
    unsat_.push_back(c);
  }
  void remove_unsat(std::size_t c) {
    const auto p = pos_[c];
    unsat_[p] = unsat_.back();
    pos_[unsat_[p]] = p;
    unsat_.pop_back();
    pos_[c] = kNone;
  }

  const CnfFormula& f_;
  SpinConfig x_;
  std::vector<std::vector<std::size_t>> occ_;
  std::vector<std::size_t> true_count_;
  std::vector<std::size_t> unsat_;
  std::vector<std::size_t> pos_;
};

}  // namespace detail

/// Local search from a uniform random assignment. Each flip picks a random
/// unsatisfied clause; with probability `noise` a random variable of it is
/// flipped, otherwise the best-scoring one. Plain scoring maximizes
/// make - break; LM scoring minimizes break and then maximizes
/// w1 * make1 + w2 * make2. Remaining ties are broken uniformly.
inline WalkSatResult walksat_run(const CnfFormula& formula, const WalkSatConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  WalkSatResult out;
  out.initial = SpinConfig::random(formula.n_vars(), rng);
  detail::WalkSatState st(formula, out.initial);
  std::vector<std::size_t> best;
  while (!st.solved()) {
    if (out.flips >= cfg.max_flips) return out;
    const auto c = st.unsat()[uniform_index(rng, st.unsat().size())];
    const auto& lits = formula.clauses()[c].literals;
    std::size_t v;
    if (bernoulli(rng, cfg.noise)) {
      v = lits[uniform_index(rng, lits.size())].var;
    } else {
      best.clear();
      double best_primary = 0.0, best_secondary = 0.0;
      for (const auto& l : lits) {
        const double brk = static_cast<double>(st.break_count(l.var));
        const auto [m1, m2] = st.make_counts(l.var);
        double primary, secondary;
        if (cfg.variant == WalkSatVariant::kPlain) {
          primary = static_cast<double>(m1) - brk;
          secondary = 0.0;
        } else {
          primary = -brk;
          secondary = cfg.lm_w1 * static_cast<double>(m1) + cfg.lm_w2 * static_cast<double>(m2);
        }
        if (best.empty() || primary > best_primary || (primary == best_primary && secondary > best_secondary)) {
          best.assign(1, l.var);
          best_primary = primary;
          best_secondary = secondary;
        } else if (primary == best_primary && secondary == best_secondary) {
          best.push_back(l.var);
        }
      }
      v = best[uniform_index(rng, best.size())];
    }
    st.flip(v);
    ++out.flips;
    if (cfg.record_trace) out.flipped.push_back(v);
  }
  out.solution = st.assignment();
  return out;
}

struct EnumerationResult {
  std::vector<SpinConfig> solutions;  // in discovery order
  std::vector<std::uint64_t> flips_at_discovery;  // cumulative flips when each was found
  std::uint64_t total_flips = 0;
  std::size_t runs = 0;
  bool complete = false;
};

/// Repeated WalkSAT with blocking clauses. The reference solution count
/// from exhaustive enumeration decides termination: the search stops as
/// soon as every solution is blocked, or reports an incomplete result when
/// a run exhausts its flip budget while solutions remain.
inline EnumerationResult walksat_enumerate(const CnfFormula& formula, const WalkSatConfig& cfg) {
  const std::size_t expected = enumerate_solutions(formula).size();
  EnumerationResult out;
  CnfFormula current = formula;
  while (out.solutions.size() < expected) {
    auto run_cfg = cfg;
    run_cfg.seed = derive_seed(cfg.seed, out.runs);
    const auto r = walksat_run(current, run_cfg);
    ++out.runs;
    out.total_flips += r.flips;
    if (!r.solution) return out;
    if (!satisfies(formula, *r.solution)) throw ContractError("WalkSAT returned a non-solution");
    out.solutions.push_back(*r.solution);
    out.flips_at_discovery.push_back(out.total_flips);
    current = add_blocking_clause(current, *r.solution);
  }
  out.complete = true;
  return out;
}

}  // namespace fairsample

#endif  // FAIRSAMPLE_BASELINES_HPP
