#ifndef FAIRSAMPLE_MCMC_HPP
#define FAIRSAMPLE_MCMC_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "fairsample/error.hpp"
#include "fairsample/ising.hpp"
#include "fairsample/made.hpp"
#include "fairsample/qsim.hpp"
#include "fairsample/random.hpp"
#include "fairsample/spin_config.hpp"

namespace fairsample {

enum class KernelTag : std::uint8_t { kSsf = 0, kUniform = 1, kQeMcmc = 2, kMade = 3, kHybrid = 4, kPtIcm = 5 };

inline const char* kernel_name(KernelTag tag) {
  switch (tag) {
    case KernelTag::kSsf: return "ssf";
    case KernelTag::kUniform: return "uniform";
    case KernelTag::kQeMcmc: return "qe-mcmc";
    case KernelTag::kMade: return "qaoa-nmc";
    case KernelTag::kHybrid: return "qaoa-hmc";
    case KernelTag::kPtIcm: return "pt-icm";
  }
  return "unknown";
}

/// A candidate plus the proposal log-densities needed by the MH ratio.
/// When `symmetric` is set the kernel guarantees Q(a|b) = Q(b|a) and the
/// log-q fields are ignored.
struct Proposal {
  SpinConfig candidate;
  bool symmetric = true;
  double log_q_forward = 0.0;  // log Q(candidate | current)
  double log_q_reverse = 0.0;  // log Q(current | candidate)
};

/// Kernels are immutable after construction and may be shared by chains
/// running on different threads.
class ProposalKernel {
 public:
  virtual ~ProposalKernel() = default;
  virtual Proposal propose(const SpinConfig& current, Rng& rng) const = 0;
  virtual KernelTag tag() const noexcept = 0;
};

/// Independent uniform draw over all 2^N configurations.
class UniformKernel final : public ProposalKernel {
 public:
  explicit UniformKernel(std::size_t n_sites) : n_(n_sites) {}
  Proposal propose(const SpinConfig& current, Rng& rng) const override {
    if (current.size() != n_) throw DimensionError("uniform kernel size mismatch");
    return {SpinConfig::random(n_, rng)};
  }
  KernelTag tag() const noexcept override { return KernelTag::kUniform; }

 private:
  std::size_t n_;
};

/// Ranges for the per-proposal draw of mixing weight and evolution time.
struct QeHyper {
  double gamma_low = 0.25;
  double gamma_high = 0.6;
  double time_low = 2.0;
  double time_high = 20.0;

  void validate() const {
    if (!(gamma_low >= 0.0 && gamma_low <= gamma_high && gamma_high <= 1.0)) {
      throw ContractError("mixing weight range must lie in [0, 1]");
    }
    if (!(time_low >= 0.0 && time_low <= time_high && std::isfinite(time_high))) {
      throw ContractError("evolution time range must be finite and non-negative");
    }
  }
};

/// Evolves |current> under (1-g) a H_P + g H_d for a drawn (g, t) and
/// measures once. U = exp(-iHt) is symmetric, so the proposal is symmetric
/// for each fixed draw.
class QeMcmcKernel final : public ProposalKernel {
 public:
  QeMcmcKernel(const IsingModel& model, QeHyper hyper = {}, EvolveOptions options = {})
      : n_(model.n_sites()),
        energies_(model.energy_table()),
        alpha_(driver_balance_scale(model)),
        hyper_(hyper),
        options_(options) {
    hyper_.validate();
  }

  Proposal propose(const SpinConfig& current, Rng& rng) const override {
    if (current.size() != n_) throw DimensionError("Qe-MCMC kernel size mismatch");
    const double g = uniform_real(rng, hyper_.gamma_low, hyper_.gamma_high);
    const double t = uniform_real(rng, hyper_.time_low, hyper_.time_high);
    return propose_with(current, g, t, rng);
  }

  /// Proposal for a fixed (gamma_mix, time) draw.
  Proposal propose_with(const SpinConfig& current, double gamma_mix, double time, Rng& rng) const {
    auto state = StateVector::basis(current);
    evolve_fixed(state, qe_mcmc_hamiltonian(energies_, alpha_, gamma_mix), time, options_);
    return {measure_once(state, rng)};
  }

  KernelTag tag() const noexcept override { return KernelTag::kQeMcmc; }
  double alpha() const noexcept { return alpha_; }
  const QeHyper& hyper() const noexcept { return hyper_; }

 private:
  std::size_t n_;
  std::vector<double> energies_;
  double alpha_;
  QeHyper hyper_;
  EvolveOptions options_;
};

/// Independence sampler drawing from a trained MADE network.
class MadeKernel final : public ProposalKernel {
 public:
  explicit MadeKernel(MadeNetwork net) : net_(std::move(net)) {}

  Proposal propose(const SpinConfig& current, Rng& rng) const override {
    auto candidate = net_.sample(rng);
    return {candidate, false, net_.log_prob(candidate), net_.log_prob(current)};
  }

  KernelTag tag() const noexcept override { return KernelTag::kMade; }
  const MadeNetwork& network() const noexcept { return net_; }

 private:
  MadeNetwork net_;
};

// ---------------------------------------------------------------------------
// Chains

struct ChainState {
  SpinConfig current;
  double energy = 0.0;            // == energy(model, current)
  std::uint64_t steps = 0;        // composite updates performed
  std::uint64_t transitions = 0;  // elementary transitions (see step accounting)

  static ChainState start(const IsingModel& model, const SpinConfig& init) {
    return {init, fairsample::energy(model, init), 0, 0};
  }
};

/// min(1, exp(-beta dE + log q_rev - log q_fwd)).
inline double acceptance_probability(double beta, double delta_energy, const Proposal& p) {
  double log_ratio = -beta * delta_energy;
  if (!p.symmetric) log_ratio += p.log_q_reverse - p.log_q_forward;
  if (std::isnan(log_ratio)) throw ContractError("acceptance ratio is NaN");
  return log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
}

struct NoVisit {
  void operator()(const ChainState&) const noexcept {}
};

/// One Metropolis-Hastings update with the given kernel. Counts one
/// transition. Returns whether the candidate was accepted.
template <typename Visit = NoVisit>
bool mh_step(ChainState& chain, const IsingModel& model, Temperature t, const ProposalKernel& kernel,
             Rng& rng, Visit&& visit = {}) {
  auto p = kernel.propose(chain.current, rng);
  check_dimension(model, p.candidate);
  const double e_new = model.energy_of_bits(p.candidate.bits());
  const double a = acceptance_probability(t.beta(), e_new - chain.energy, p);
  const bool accept = a >= 1.0 || uniform01(rng) < a;
  if (accept) {
    chain.current = p.candidate;
    chain.energy = e_new;
  }
  ++chain.transitions;
  visit(chain);
  return accept;
}

/// N single-site Metropolis updates in a fresh random site order. Counts N
/// transitions and calls `visit` after each. Returns the number of accepted
/// flips.
template <typename Visit = NoVisit>
std::size_t ssf_sweep(ChainState& chain, const IsingModel& model, Temperature t, Rng& rng,
                      Visit&& visit = {}) {
  const std::size_t n = model.n_sites();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle(std::span<std::size_t>(order), rng);
  std::size_t accepted = 0;
  for (auto site : order) {
    const double delta = delta_energy_flip(model, chain.current, site);
    const bool accept = delta <= 0.0 || uniform01(rng) < std::exp(-t.beta() * delta);
    if (accept) {
      chain.current.flip(site);
      chain.energy += delta;
      ++accepted;
    }
    ++chain.transitions;
    visit(chain);
  }
  // Re-derive to keep the cache exact for non-dyadic coefficients.
  chain.energy = model.energy_of_bits(chain.current.bits());
  return accepted;
}

/// One MADE independence step followed by one SSF sweep (N + 1 transitions).
/// Returns whether the MADE candidate was accepted.
template <typename Visit = NoVisit>
bool step_qaoa_hmc(ChainState& chain, const IsingModel& model, Temperature t, const MadeKernel& kernel,
                   Rng& rng, Visit&& visit = {}) {
  const bool accepted = mh_step(chain, model, t, kernel, rng, visit);
  ssf_sweep(chain, model, t, rng, visit);
  return accepted;
}

/// What one composite chain step does.
struct ChainUpdate {
  enum class Kind { kKernel, kSsfSweep, kHybrid };
  Kind kind = Kind::kSsfSweep;
  const ProposalKernel* kernel = nullptr;  // kKernel
  const MadeKernel* made = nullptr;        // kHybrid

  static ChainUpdate with_kernel(const ProposalKernel& k) { return {Kind::kKernel, &k, nullptr}; }
  static ChainUpdate ssf() { return {Kind::kSsfSweep, nullptr, nullptr}; }
  static ChainUpdate hybrid(const MadeKernel& m) { return {Kind::kHybrid, nullptr, &m}; }

  KernelTag tag() const {
    switch (kind) {
      case Kind::kKernel: return kernel->tag();
      case Kind::kSsfSweep: return KernelTag::kSsf;
      case Kind::kHybrid: return KernelTag::kHybrid;
    }
    return KernelTag::kSsf;
  }

  /// Elementary transitions per composite step.
  std::uint64_t transitions_per_step(std::size_t n_sites) const {
    switch (kind) {
      case Kind::kKernel: return 1;
      case Kind::kSsfSweep: return n_sites;
      case Kind::kHybrid: return n_sites + 1;
    }
    return 1;
  }
};

struct TraceRecord {
  std::uint64_t step = 0;         // 1-based composite step index
  std::uint64_t transitions = 0;  // cumulative transitions after this step
  SpinConfig state;
  double energy = 0.0;
  bool accepted = false;
  KernelTag tag = KernelTag::kSsf;
};

/// First time a configuration was occupied, in both counters.
struct FirstVisit {
  std::uint64_t transitions = 0;
  std::uint64_t step = 0;
};

/// Chain output. `records` holds every thinning-th composite step;
/// `first_visits` sees every elementary transition, including the states
/// passed through inside a sweep.
struct ChainTrace {
  std::size_t n_sites = 0;
  std::uint64_t thinning = 1;
  std::uint64_t total_steps = 0;
  std::uint64_t total_transitions = 0;
  std::vector<TraceRecord> records;
  std::unordered_map<SpinConfig, FirstVisit, SpinConfigHash> first_visits;

  void note_visit(const SpinConfig& s, std::uint64_t transitions, std::uint64_t step) {
    first_visits.try_emplace(s, FirstVisit{transitions, step});
  }
};

struct ChainOptions {
  std::uint64_t steps = 1;
  std::optional<SpinConfig> init;  // uniform random when empty
  std::uint64_t seed = 0;
  std::uint64_t thinning = 1;
  std::uint64_t burn_in = 0;  // composite steps dropped from records
};

/// Deterministic given options.seed.
inline ChainTrace run_chain(const IsingModel& model, Temperature t, const ChainUpdate& update,
                            const ChainOptions& options) {
  if (options.steps == 0) throw ContractError("chain needs at least one step");
  if (options.thinning == 0) throw ContractError("thinning must be >= 1");
  if (update.kind == ChainUpdate::Kind::kKernel && !update.kernel) throw ContractError("missing kernel");
  if (update.kind == ChainUpdate::Kind::kHybrid && !update.made) throw ContractError("missing MADE kernel");
  Rng rng(options.seed);
  const SpinConfig init = options.init ? *options.init : SpinConfig::random(model.n_sites(), rng);
  auto chain = ChainState::start(model, init);

  ChainTrace trace;
  trace.n_sites = model.n_sites();
  trace.thinning = options.thinning;
  trace.records.reserve(static_cast<std::size_t>(options.steps / options.thinning));
  trace.note_visit(chain.current, 0, 0);
  const KernelTag tag = update.tag();
  for (std::uint64_t s = 1; s <= options.steps; ++s) {
    auto visit = [&](const ChainState& c) { trace.note_visit(c.current, c.transitions, s); };
    bool accepted = false;
    switch (update.kind) {
      case ChainUpdate::Kind::kKernel:
        accepted = mh_step(chain, model, t, *update.kernel, rng, visit);
        break;
      case ChainUpdate::Kind::kSsfSweep:
        accepted = ssf_sweep(chain, model, t, rng, visit) > 0;
        break;
      case ChainUpdate::Kind::kHybrid:
        accepted = step_qaoa_hmc(chain, model, t, *update.made, rng, visit);
        break;
    }
    chain.steps = s;
    if (s > options.burn_in && s % options.thinning == 0) {
      trace.records.push_back({s, chain.transitions, chain.current, chain.energy, accepted, tag});
    }
  }
  trace.total_steps = chain.steps;
  trace.total_transitions = chain.transitions;
  return trace;
}

// ---------------------------------------------------------------------------
// Trace export

inline void write_trace_csv(std::ostream& out, const ChainTrace& trace) {
  out << "step,bitstring,energy,accepted,kernel_tag,transitions\n";
  out.precision(17);
  for (const auto& r : trace.records) {
    out << r.step << ',' << r.state.bitstring() << ',' << r.energy << ',' << (r.accepted ? 1 : 0) << ','
        << kernel_name(r.tag) << ',' << r.transitions << '\n';
  }
}

namespace detail {

inline constexpr char kTraceMagic[8] = {'F', 'S', 'T', 'R', 'A', 'C', 'E', '1'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw FormatError("truncated binary trace");
  return v;
}

}  // namespace detail

/// Host-endian rows of (step u64, transitions u64, bits u64, energy f64,
/// accepted u8, tag u8) after a fixed header.
inline void write_trace_binary(std::ostream& out, const ChainTrace& trace) {
  out.write(detail::kTraceMagic, sizeof detail::kTraceMagic);
  detail::put<std::uint64_t>(out, trace.n_sites);
  detail::put<std::uint64_t>(out, trace.thinning);
  detail::put<std::uint64_t>(out, trace.total_steps);
  detail::put<std::uint64_t>(out, trace.total_transitions);
  detail::put<std::uint64_t>(out, trace.records.size());
  for (const auto& r : trace.records) {
    detail::put(out, r.step);
    detail::put(out, r.transitions);
    detail::put(out, r.state.bits());
    detail::put(out, r.energy);
    detail::put<std::uint8_t>(out, r.accepted ? 1 : 0);
    detail::put(out, static_cast<std::uint8_t>(r.tag));
  }
}

/// Restores records; first_visits is not stored and comes back empty.
inline ChainTrace read_trace_binary(std::istream& in) {
  char magic[sizeof detail::kTraceMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, detail::kTraceMagic, sizeof magic) != 0) {
    throw FormatError("not a binary chain trace");
  }
  ChainTrace trace;
  trace.n_sites = detail::get<std::uint64_t>(in);
  trace.thinning = detail::get<std::uint64_t>(in);
  trace.total_steps = detail::get<std::uint64_t>(in);
  trace.total_transitions = detail::get<std::uint64_t>(in);
  const auto count = detail::get<std::uint64_t>(in);
  if (trace.n_sites == 0 || trace.n_sites > SpinConfig::kMaxSites) throw FormatError("bad site count in trace");
  for (std::uint64_t i = 0; i < count; ++i) {
    TraceRecord r;
    r.step = detail::get<std::uint64_t>(in);
    r.transitions = detail::get<std::uint64_t>(in);
    r.state = SpinConfig(trace.n_sites, detail::get<std::uint64_t>(in));
    r.energy = detail::get<double>(in);
    r.accepted = detail::get<std::uint8_t>(in) != 0;
    const auto tag = detail::get<std::uint8_t>(in);
    if (tag > static_cast<std::uint8_t>(KernelTag::kPtIcm)) throw FormatError("bad kernel tag in trace");
    r.tag = static_cast<KernelTag>(tag);
    trace.records.push_back(r);
  }
  return trace;
}

}  // namespace fairsample

#endif  // FAIRSAMPLE_MCMC_HPP
