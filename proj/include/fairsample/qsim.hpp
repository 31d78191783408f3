#ifndef FAIRSAMPLE_QSIM_HPP
#define FAIRSAMPLE_QSIM_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fairsample/error.hpp"
#include "fairsample/ising.hpp"
#include "fairsample/random.hpp"
#include "fairsample/spin_config.hpp"

namespace fairsample {

using Complex = std::complex<double>;

inline constexpr std::size_t kMaxQubits = 24;

/// Dense 2^N amplitude vector. Basis index z carries qubit i in bit i, the
/// same packing as SpinConfig, so amplitude z belongs to SpinConfig(N, z).
class StateVector {
 public:
  /// |0...0>.
  explicit StateVector(std::size_t n_qubits) : n_(n_qubits) {
    if (n_qubits == 0 || n_qubits > kMaxQubits) {
      throw CapacityError("statevector supports 1.." + std::to_string(kMaxQubits) + " qubits");
    }
    amps_.assign(std::size_t{1} << n_qubits, Complex{0.0, 0.0});
    amps_[0] = 1.0;
  }

  /// |+>^N, the ground state of the transverse-field driver.
  static StateVector uniform(std::size_t n_qubits) {
    StateVector s(n_qubits);
    const double a = 1.0 / std::sqrt(static_cast<double>(s.dim()));
    std::fill(s.amps_.begin(), s.amps_.end(), Complex{a, 0.0});
    return s;
  }

  static StateVector basis(std::size_t n_qubits, std::uint64_t index) {
    StateVector s(n_qubits);
    if (index >= s.dim()) throw IndexError("basis index out of range");
    s.amps_[0] = 0.0;
    s.amps_[index] = 1.0;
    return s;
  }

  static StateVector basis(const SpinConfig& config) { return basis(config.size(), config.bits()); }

  static StateVector from_amplitudes(std::size_t n_qubits, std::vector<Complex> amps) {
    StateVector s(n_qubits);
    if (amps.size() != s.dim()) throw DimensionError("amplitude count must be 2^N");
    s.amps_ = std::move(amps);
    return s;
  }

  std::size_t n_qubits() const noexcept { return n_; }
  std::size_t dim() const noexcept { return amps_.size(); }
  std::span<Complex> amplitudes() noexcept { return amps_; }
  std::span<const Complex> amplitudes() const noexcept { return amps_; }
  const Complex& operator[](std::size_t z) const { return amps_[z]; }

  double norm() const noexcept {
    double s = 0.0;
    for (const auto& a : amps_) s += std::norm(a);
    return std::sqrt(s);
  }

  void normalize() {
    const double n = norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw IntegrationError("cannot normalize a zero or non-finite state");
    for (auto& a : amps_) a /= n;
  }

 private:
  std::size_t n_;
  std::vector<Complex> amps_;
};

inline void check_energy_table(const StateVector& state, std::span<const double> energies) {
  if (energies.size() != state.dim()) {
    throw DimensionError("energy table has " + std::to_string(energies.size()) +
                         " entries, state has " + std::to_string(state.dim()));
  }
}

/// a_z <- exp(-i gamma E_z) a_z.
inline void apply_phase_layer(StateVector& state, std::span<const double> energies, double gamma) {
  check_energy_table(state, energies);
  auto amps = state.amplitudes();
  for (std::size_t z = 0; z < amps.size(); ++z) amps[z] *= std::polar(1.0, -gamma * energies[z]);
}

inline void apply_phase_layer(StateVector& state, const IsingModel& model, double gamma) {
  if (model.n_sites() != state.n_qubits()) throw DimensionError("model and state sizes differ");
  const auto table = model.energy_table();
  apply_phase_layer(state, table, gamma);
}

/// exp(-i beta H_d) with H_d = -sum_i X_i, i.e. the rotation
/// [cos b, i sin b; i sin b, cos b] on every qubit.
inline void apply_mixer_layer(StateVector& state, double beta) {
  const double c = std::cos(beta);
  const Complex is{0.0, std::sin(beta)};
  auto amps = state.amplitudes();
  const std::size_t dim = amps.size();
  for (std::size_t q = 0; q < state.n_qubits(); ++q) {
    const std::size_t stride = std::size_t{1} << q;
    for (std::size_t base = 0; base < dim; base += 2 * stride) {
      for (std::size_t z = base; z < base + stride; ++z) {
        const Complex a0 = amps[z];
        const Complex a1 = amps[z + stride];
        amps[z] = c * a0 + is * a1;
        amps[z + stride] = is * a0 + c * a1;
      }
    }
  }
}

/// Depth-p QAOA state: alternate phase(gamma_k) then mixer(beta_k) on |+>^N.
inline StateVector run_qaoa(std::size_t n_qubits, std::span<const double> energies,
                            std::span<const double> gammas, std::span<const double> betas) {
  if (gammas.empty() || gammas.size() != betas.size()) {
    throw ContractError("QAOA needs equal, non-empty gamma and beta lists");
  }
  auto state = StateVector::uniform(n_qubits);
  for (std::size_t k = 0; k < gammas.size(); ++k) {
    apply_phase_layer(state, energies, gammas[k]);
    apply_mixer_layer(state, betas[k]);
  }
  return state;
}

inline StateVector run_qaoa(const IsingModel& model, std::span<const double> gammas,
                            std::span<const double> betas) {
  const auto table = model.energy_table();
  return run_qaoa(model.n_sites(), table, gammas, betas);
}

/// <psi| diag(E) |psi>.
inline double expectation_value(const StateVector& state, std::span<const double> energies) {
  check_energy_table(state, energies);
  double e = 0.0;
  for (std::size_t z = 0; z < energies.size(); ++z) e += std::norm(state[z]) * energies[z];
  return e;
}

// ---------------------------------------------------------------------------
// Time-independent evolution

/// H = problem_weight * diag(E) + driver_weight * H_d, H_d = -sum_i X_i.
/// Both parts are real symmetric, so exp(-iHt) is a symmetric matrix.
struct MixedHamiltonian {
  std::span<const double> energies;
  double problem_weight = 1.0;
  double driver_weight = 0.0;
};

/// Scale that equalizes Frobenius norms of H_d and H_P (constant part
/// excluded): sqrt(N / sum_terms J^2).
inline double driver_balance_scale(const IsingModel& model) {
  const double sq = model.squared_coefficient_norm();
  if (!(sq > 0.0)) throw ContractError("model has no non-constant terms");
  return std::sqrt(static_cast<double>(model.n_sites()) / sq);
}

/// (1 - gamma_mix) * alpha * H_P + gamma_mix * H_d for the given energy table.
inline MixedHamiltonian qe_mcmc_hamiltonian(std::span<const double> energies, double alpha,
                                            double gamma_mix) {
  return {energies, (1.0 - gamma_mix) * alpha, gamma_mix};
}

struct EvolveOptions {
  double tolerance = 1e-8;   // max amplitude change between n and 2n steps
  double initial_dt = 0.1;
  std::size_t max_steps = std::size_t{1} << 22;
  std::size_t order = 6;     // 2, 4, 6 or 8
};

struct EvolveReport {
  std::size_t steps = 0;
  double self_consistency = 0.0;
};

namespace detail {

/// Stage weights of the symmetric composition of the given even order,
/// built by the Yoshida triple-jump recursion from the second-order step.
inline std::vector<double> composition_weights(std::size_t order) {
  if (order < 2 || order > 8 || order % 2 != 0) throw ContractError("evolution order must be 2, 4, 6 or 8");
  std::vector<double> w{1.0};
  for (std::size_t k = 2; k < order; k += 2) {
    const double root = std::pow(2.0, 1.0 / static_cast<double>(k + 1));
    const double outer = 1.0 / (2.0 - root);
    const double middle = -root / (2.0 - root);
    std::vector<double> next;
    for (double f : {outer, middle, outer}) {
      for (double v : w) next.push_back(f * v);
    }
    w = std::move(next);
  }
  return w;
}

/// n composite steps; every stage is the symmetric splitting
/// D(c dt/2) P(c dt) D(c dt/2), adjacent driver factors fused.
inline void trotter_evolve(StateVector& state, const MixedHamiltonian& h, double time,
                           std::size_t n, std::size_t order = 4) {
  const auto weights = composition_weights(order);
  const double dt = time / static_cast<double>(n);
  // Diagonal factors per stage, computed once.
  std::vector<std::vector<Complex>> phases(weights.size(), std::vector<Complex>(h.energies.size()));
  for (std::size_t k = 0; k < weights.size(); ++k) {
    for (std::size_t z = 0; z < h.energies.size(); ++z) {
      phases[k][z] = std::polar(1.0, -h.problem_weight * weights[k] * dt * h.energies[z]);
    }
  }
  auto amps = state.amplitudes();
  double pending = 0.0;
  for (std::size_t step = 0; step < n; ++step) {
    for (std::size_t k = 0; k < weights.size(); ++k) {
      pending += h.driver_weight * weights[k] * dt / 2.0;
      if (pending != 0.0) apply_mixer_layer(state, pending);
      const auto& f = phases[k];
      for (std::size_t z = 0; z < amps.size(); ++z) amps[z] *= f[z];
      pending = h.driver_weight * weights[k] * dt / 2.0;
    }
  }
  if (pending != 0.0) apply_mixer_layer(state, pending);
}

inline double max_abs_difference(const StateVector& a, const StateVector& b) {
  double d = 0.0;
  for (std::size_t z = 0; z < a.dim(); ++z) d = std::max(d, std::abs(a[z] - b[z]));
  return d;
}

}  // namespace detail

/// state <- exp(-i H time) state by a symmetric product formula (options.order) built from
/// symmetric splittings. The step count doubles until two successive
/// refinements agree to options.tolerance. Every factor is symmetric and the
/// product palindromic, so the applied operator U satisfies U = U^T exactly.
inline EvolveReport evolve_fixed(StateVector& state, const MixedHamiltonian& h, double time,
                                 const EvolveOptions& options = {}) {
  check_energy_table(state, h.energies);
  if (!std::isfinite(time)) throw IntegrationError("evolution time must be finite");
  if (time == 0.0) return {0, 0.0};
  auto n = static_cast<std::size_t>(std::ceil(std::abs(time) / options.initial_dt));
  n = std::max<std::size_t>(n, 1);
  StateVector coarse = state;
  detail::trotter_evolve(coarse, h, time, n, options.order);
  while (true) {
    if (2 * n > options.max_steps) {
      throw IntegrationError("evolve_fixed did not converge within max_steps");
    }
    StateVector fine = state;
    detail::trotter_evolve(fine, h, time, 2 * n, options.order);
    const double diff = detail::max_abs_difference(coarse, fine);
    n *= 2;
    if (diff < options.tolerance) {
      state = std::move(fine);
      return {n, diff};
    }
    coarse = std::move(fine);
  }
}

// ---------------------------------------------------------------------------
// Quantum annealing

/// H(t) = A(t/T) H_d + B(t/T) H_P on t in [0, T].
struct AnnealSchedule {
  double total_time = 0.0;
  std::function<double(double)> a_of;
  std::function<double(double)> b_of;

  static AnnealSchedule linear(double total_time) {
    return {total_time, [](double s) { return 1.0 - s; }, [](double s) { return s; }};
  }
};

struct AnnealOptions {
  double max_dt = 0.01;
  double min_steps = 1e4;   // dt = min(max_dt, T / min_steps)
  double dt_scale = 1.0;    // < 1 for step-halving checks
};

/// Fourth-order Runge-Kutta integration of i d|psi>/dt = H(t)|psi> from |+>^N,
/// renormalized after every step.
inline StateVector run_annealing(const IsingModel& model, const AnnealSchedule& schedule,
                                 const AnnealOptions& options = {}) {
  const double total = schedule.total_time;
  if (!std::isfinite(total) || total < 0.0) throw IntegrationError("annealing time must be finite and >= 0");
  auto state = StateVector::uniform(model.n_sites());
  if (total == 0.0) return state;
  const auto energies = model.energy_table();
  double dt = std::min(options.max_dt, total / options.min_steps) * options.dt_scale;
  if (!(dt > 0.0) || dt < 1e-14 * std::max(1.0, total)) {
    throw IntegrationError("annealing step size underflow");
  }
  const auto steps = static_cast<std::size_t>(std::ceil(total / dt));
  dt = total / static_cast<double>(steps);

  const std::size_t dim = state.dim();
  const std::size_t nq = state.n_qubits();
  std::vector<Complex> k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim);
  // out = -i (a H_d + b H_P) in
  auto derivative = [&](double t, std::span<const Complex> in, std::vector<Complex>& out) {
    const double s = t / total;
    const double a = schedule.a_of(s);
    const double b = schedule.b_of(s);
    for (std::size_t z = 0; z < dim; ++z) {
      Complex hz = b * energies[z] * in[z];
      Complex flips{0.0, 0.0};
      for (std::size_t q = 0; q < nq; ++q) flips += in[z ^ (std::size_t{1} << q)];
      hz -= a * flips;
      out[z] = Complex{hz.imag(), -hz.real()};
    }
  };
  auto psi = state.amplitudes();
  for (std::size_t step = 0; step < steps; ++step) {
    const double t = static_cast<double>(step) * dt;
    derivative(t, psi, k1);
    for (std::size_t z = 0; z < dim; ++z) tmp[z] = psi[z] + 0.5 * dt * k1[z];
    derivative(t + 0.5 * dt, tmp, k2);
    for (std::size_t z = 0; z < dim; ++z) tmp[z] = psi[z] + 0.5 * dt * k2[z];
    derivative(t + 0.5 * dt, tmp, k3);
    for (std::size_t z = 0; z < dim; ++z) tmp[z] = psi[z] + dt * k3[z];
    derivative(t + dt, tmp, k4);
    for (std::size_t z = 0; z < dim; ++z) {
      psi[z] += dt / 6.0 * (k1[z] + 2.0 * k2[z] + 2.0 * k3[z] + k4[z]);
    }
    state.normalize();
  }
  return state;
}

// ---------------------------------------------------------------------------
// Measurement

struct OutputDistribution {
  std::size_t n_qubits = 0;
  std::vector<double> probs;  // indexed by packed bits

  double total() const noexcept {
    double s = 0.0;
    for (double p : probs) s += p;
    return s;
  }
  double operator[](const SpinConfig& c) const { return probs.at(c.bits()); }
};

inline OutputDistribution measure_distribution(const StateVector& state) {
  OutputDistribution d{state.n_qubits(), std::vector<double>(state.dim())};
  for (std::size_t z = 0; z < state.dim(); ++z) d.probs[z] = std::norm(state[z]);
  return d;
}

/// Exact categorical draws from the distribution.
inline std::vector<SpinConfig> sample(const OutputDistribution& dist, std::size_t count, Rng& rng) {
  std::vector<double> cumulative(dist.probs.size());
  double acc = 0.0;
  for (std::size_t z = 0; z < cumulative.size(); ++z) cumulative[z] = acc += dist.probs[z];
  std::vector<SpinConfig> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double u = uniform01(rng) * acc;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    auto z = static_cast<std::uint64_t>(std::min<std::ptrdiff_t>(
        it - cumulative.begin(), static_cast<std::ptrdiff_t>(cumulative.size()) - 1));
    // Skip zero-probability entries sharing the boundary value.
    while (dist.probs[z] == 0.0 && z + 1 < cumulative.size()) ++z;
    out.emplace_back(dist.n_qubits, z);
  }
  return out;
}

inline std::vector<SpinConfig> sample(const StateVector& state, std::size_t count, Rng& rng) {
  return sample(measure_distribution(state), count, rng);
}

/// One projective measurement in the computational basis.
inline SpinConfig measure_once(const StateVector& state, Rng& rng) {
  const double u = uniform01(rng) * state.norm() * state.norm();
  double acc = 0.0;
  std::size_t last_nonzero = 0;
  for (std::size_t z = 0; z < state.dim(); ++z) {
    const double p = std::norm(state[z]);
    if (p == 0.0) continue;
    last_nonzero = z;
    acc += p;
    if (u < acc) return SpinConfig(state.n_qubits(), z);
  }
  return SpinConfig(state.n_qubits(), last_nonzero);
}

/// CSV rows "bitstring,probability".
inline void write_distribution_csv(std::ostream& out, const OutputDistribution& dist) {
  out << "bitstring,probability\n" << std::setprecision(17);
  for (std::size_t z = 0; z < dist.probs.size(); ++z) {
    out << SpinConfig(dist.n_qubits, z).bitstring() << ',' << dist.probs[z] << '\n';
  }
}

}  // namespace fairsample

#endif  // FAIRSAMPLE_QSIM_HPP
