#ifndef FAIRSAMPLE_VALIDATION_HPP
#define FAIRSAMPLE_VALIDATION_HPP

// Exact oracles: dense transition matrices, dense matrix exponentials and
// exhaustive enumeration. Requires Eigen.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "fairsample/baselines.hpp"
#include "fairsample/ising.hpp"
#include "fairsample/made.hpp"
#include "fairsample/mcmc.hpp"
#include "fairsample/qsim.hpp"
#include "fairsample/random.hpp"
#include "fairsample/sat.hpp"

namespace fairsample {

/// Row-major dense stochastic matrix over the 2^N basis states.
struct TransitionMatrix {
  std::size_t dim = 0;
  std::vector<double> p;

  explicit TransitionMatrix(std::size_t d = 0) : dim(d), p(d * d, 0.0) {}
  double& operator()(std::size_t i, std::size_t j) { return p[i * dim + j]; }
  double operator()(std::size_t i, std::size_t j) const { return p[i * dim + j]; }

  static TransitionMatrix identity(std::size_t d) {
    TransitionMatrix m(d);
    for (std::size_t i = 0; i < d; ++i) m(i, i) = 1.0;
    return m;
  }

  friend TransitionMatrix operator*(const TransitionMatrix& a, const TransitionMatrix& b) {
    TransitionMatrix c(a.dim);
    for (std::size_t i = 0; i < a.dim; ++i) {
      for (std::size_t k = 0; k < a.dim; ++k) {
        const double v = a(i, k);
        if (v == 0.0) continue;
        for (std::size_t j = 0; j < a.dim; ++j) c(i, j) += v * b(k, j);
      }
    }
    return c;
  }
};

/// Normalized Boltzmann distribution over all basis states.
inline std::vector<double> boltzmann_distribution(const IsingModel& model, Temperature t) {
  const auto e = model.energy_table();
  const double e_min = *std::min_element(e.begin(), e.end());
  std::vector<double> pi(e.size());
  double z = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) z += pi[i] = std::exp(-t.beta() * (e[i] - e_min));
  for (auto& v : pi) v /= z;
  return pi;
}

/// MH matrix for a proposal matrix q (row = current). The acceptance uses
/// the q-ratio unless `symmetric`.
inline TransitionMatrix mh_transition_matrix(const IsingModel& model, Temperature t, const TransitionMatrix& q,
                                             bool symmetric) {
  const auto e = model.energy_table();
  TransitionMatrix m(q.dim);
  for (std::size_t z = 0; z < q.dim; ++z) {
    double stay = 1.0;
    for (std::size_t w = 0; w < q.dim; ++w) {
      if (w == z || q(z, w) == 0.0) continue;
      const Proposal prop{SpinConfig(model.n_sites(), w), symmetric, std::log(q(z, w)), std::log(q(w, z))};
      const double a = acceptance_probability(t.beta(), e[w] - e[z], prop);
      m(z, w) = q(z, w) * a;
      stay -= m(z, w);
    }
    m(z, z) = stay;
  }
  return m;
}

inline TransitionMatrix uniform_kernel_matrix(const IsingModel& model, Temperature t) {
  const std::size_t d = std::size_t{1} << model.n_sites();
  TransitionMatrix q(d);
  std::fill(q.p.begin(), q.p.end(), 1.0 / static_cast<double>(d));
  return mh_transition_matrix(model, t, q, true);
}

/// Independence proposal q(z -> w) = exp(log_prob(w)).
inline TransitionMatrix made_kernel_matrix(const IsingModel& model, Temperature t, const MadeNetwork& net) {
  const std::size_t d = std::size_t{1} << model.n_sites();
  std::vector<double> q_row(d);
  for (std::size_t w = 0; w < d; ++w) q_row[w] = std::exp(net.log_prob_bits(w));
  TransitionMatrix q(d);
  for (std::size_t z = 0; z < d; ++z) std::copy(q_row.begin(), q_row.end(), q.p.begin() + z * d);
  return mh_transition_matrix(model, t, q, false);
}

/// Metropolis update of one fixed site.
inline TransitionMatrix site_update_matrix(const IsingModel& model, Temperature t, std::size_t site) {
  const auto e = model.energy_table();
  const std::size_t d = e.size();
  TransitionMatrix m(d);
  for (std::size_t z = 0; z < d; ++z) {
    const std::size_t w = z ^ (std::size_t{1} << site);
    const double delta = e[w] - e[z];
    const double a = delta <= 0.0 ? 1.0 : std::exp(-t.beta() * delta);
    m(z, w) = a;
    m(z, z) = 1.0 - a;
  }
  return m;
}

/// Single flip of a uniformly chosen site.
inline TransitionMatrix random_site_matrix(const IsingModel& model, Temperature t) {
  const std::size_t n = model.n_sites();
  TransitionMatrix m(std::size_t{1} << n);
  for (std::size_t s = 0; s < n; ++s) {
    const auto ms = site_update_matrix(model, t, s);
    for (std::size_t i = 0; i < m.p.size(); ++i) m.p[i] += ms.p[i] / static_cast<double>(n);
  }
  return m;
}

/// One SSF sweep: average over all site orders of the product of
/// single-site updates.
inline TransitionMatrix ssf_sweep_matrix(const IsingModel& model, Temperature t) {
  const std::size_t n = model.n_sites();
  if (n > 6) throw CapacityError("sweep matrix enumerates all N! orders; N <= 6");
  std::vector<TransitionMatrix> site;
  for (std::size_t s = 0; s < n; ++s) site.push_back(site_update_matrix(model, t, s));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  const std::size_t d = std::size_t{1} << n;
  TransitionMatrix sum(d);
  std::size_t count = 0;
  do {
    auto prod = TransitionMatrix::identity(d);
    for (auto s : perm) prod = prod * site[s];
    for (std::size_t i = 0; i < sum.p.size(); ++i) sum.p[i] += prod.p[i];
    ++count;
  } while (std::next_permutation(perm.begin(), perm.end()));
  for (auto& v : sum.p) v /= static_cast<double>(count);
  return sum;
}

/// max |pi_z P_zw - pi_w P_wz|.
inline double detailed_balance_violation(const TransitionMatrix& m, const std::vector<double>& pi) {
  double worst = 0.0;
  for (std::size_t z = 0; z < m.dim; ++z) {
    for (std::size_t w = z + 1; w < m.dim; ++w) {
      worst = std::max(worst, std::abs(pi[z] * m(z, w) - pi[w] * m(w, z)));
    }
  }
  return worst;
}

/// ||pi P - pi||_1.
inline double stationarity_error(const TransitionMatrix& m, const std::vector<double>& pi) {
  double err = 0.0;
  for (std::size_t w = 0; w < m.dim; ++w) {
    double s = 0.0;
    for (std::size_t z = 0; z < m.dim; ++z) s += pi[z] * m(z, w);
    err += std::abs(s - pi[w]);
  }
  return err;
}

/// Largest deviation of a row sum from 1 or any negative entry.
inline double stochasticity_error(const TransitionMatrix& m) {
  double worst = 0.0;
  for (std::size_t z = 0; z < m.dim; ++z) {
    double s = 0.0;
    for (std::size_t w = 0; w < m.dim; ++w) {
      s += m(z, w);
      worst = std::max(worst, -m(z, w));
    }
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Dense quantum oracles

using DenseMatrix = Eigen::MatrixXcd;
using DenseVector = Eigen::VectorXcd;

inline DenseMatrix dense_problem(std::span<const double> energies) {
  DenseMatrix h = DenseMatrix::Zero(static_cast<Eigen::Index>(energies.size()),
                                    static_cast<Eigen::Index>(energies.size()));
  for (std::size_t z = 0; z < energies.size(); ++z) h(static_cast<Eigen::Index>(z), static_cast<Eigen::Index>(z)) = energies[z];
  return h;
}

/// -sum_i X_i.
inline DenseMatrix dense_driver(std::size_t n) {
  const auto d = static_cast<Eigen::Index>(std::size_t{1} << n);
  DenseMatrix h = DenseMatrix::Zero(d, d);
  for (Eigen::Index z = 0; z < d; ++z) {
    for (std::size_t q = 0; q < n; ++q) h(z, z ^ (Eigen::Index{1} << q)) -= 1.0;
  }
  return h;
}

inline DenseMatrix dense_expm(const DenseMatrix& h, double time) {
  DenseMatrix a = Complex(0.0, -time) * h;
  return a.exp();
}

inline DenseVector to_dense(const StateVector& s) {
  DenseVector v(static_cast<Eigen::Index>(s.dim()));
  for (std::size_t z = 0; z < s.dim(); ++z) v(static_cast<Eigen::Index>(z)) = s[z];
  return v;
}

inline double max_abs_diff(const StateVector& s, const DenseVector& v) {
  double d = 0.0;
  for (std::size_t z = 0; z < s.dim(); ++z) d = std::max(d, std::abs(s[z] - v(static_cast<Eigen::Index>(z))));
  return d;
}

// ---------------------------------------------------------------------------
// Fixtures for the suite

/// Random k-body model with coefficients drawn from {-2,-1,1,2} (integer) or
/// uniform in [-1, 1].
inline IsingModel random_model(std::size_t n, std::size_t max_order, bool integer, Rng& rng) {
  std::vector<IsingTerm> terms;
  for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << n); ++mask) {
    const auto order = static_cast<std::size_t>(std::popcount(mask));
    if (order > max_order || !bernoulli(rng, 0.6)) continue;
    std::vector<std::size_t> sites;
    for (std::size_t i = 0; i < n; ++i) {
      if ((mask >> i) & 1U) sites.push_back(i);
    }
    double c;
    if (integer) {
      static constexpr double kValues[4] = {-2.0, -1.0, 1.0, 2.0};
      c = kValues[uniform_index(rng, 4)];
    } else {
      c = uniform_real(rng, -1.0, 1.0);
    }
    terms.push_back({sites, c});
  }
  if (terms.empty()) terms.push_back({{0}, 1.0});
  return IsingModel(n, std::move(terms));
}

inline MadeNetwork random_made(std::size_t n, std::size_t hidden, Rng& rng, double scale = 1.0) {
  MadeNetwork net(n, {hidden});
  net.initialize(rng);
  for (auto& l : net.layers()) {
    for (auto& w : l.weights) w *= scale;
    for (auto& b : l.biases) b *= scale;
  }
  return net;
}

inline double made_normalization_error(const MadeNetwork& net) {
  if (net.n_inputs() > 20) throw CapacityError("normalization check enumerates 2^N states");
  double total = 0.0;
  for (std::uint64_t z = 0; z < (std::uint64_t{1} << net.n_inputs()); ++z) total += std::exp(net.log_prob_bits(z));
  return std::abs(total - 1.0);
}

/// Largest relative difference between the analytic gradient and central
/// differences, normalized by the gradient's max-norm.
inline double made_gradient_error(MadeNetwork net, std::span<const SpinConfig> data, double h = 1e-6) {
  const auto g = nll_gradient(net, data);
  auto params = parameter_pointers(net);
  double worst = 0.0, scale = 0.0;
  for (double v : g) scale = std::max(scale, std::abs(v));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = *params[i];
    *params[i] = saved + h;
    const double up = mean_nll(net, data);
    *params[i] = saved - h;
    const double down = mean_nll(net, data);
    *params[i] = saved;
    worst = std::max(worst, std::abs((up - down) / (2.0 * h) - g[i]));
  }
  return scale > 0.0 ? worst / scale : worst;
}

/// Sets every output-layer mask entry of the first variable in the order,
/// so its conditional sees its own input.
inline void corrupt_made_mask(MadeNetwork& net) {
  auto& out = net.layers().back();
  const auto first = net.order().front();
  for (std::size_t i = 0; i < out.in; ++i) out.mask[out.at(first, i)] = 1;
  auto& hidden = net.layers().front();
  for (auto& m : hidden.mask) m = 1;
}

// ---------------------------------------------------------------------------
// Suite

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;  // measured error or statistic
  double limit = 0.0;  // pass threshold
};

inline CheckResult check_below(std::string name, double value, double limit) {
  return {std::move(name), std::isfinite(value) && value < limit, value, limit};
}

inline std::vector<CheckResult> oracle_suite(std::uint64_t seed = 1) {
  std::vector<CheckResult> out;
  Rng rng(seed);

  // Kernels at N = 4: detailed balance and stationarity.
  {
    double db_uniform = 0.0, db_made = 0.0, db_site = 0.0, db_sweep = 0.0;
    double st_sweep = 0.0, st_hybrid = 0.0, stoch = 0.0;
    for (int rep = 0; rep < 4; ++rep) {
      const auto model = random_model(4, 3, rep % 2 == 0, rng);
      for (double beta : {0.0, 0.7, 2.0}) {
        const Temperature t(beta);
        const auto pi = boltzmann_distribution(model, t);
        const auto uni = uniform_kernel_matrix(model, t);
        const auto net = random_made(4, 16, rng, 2.0);
        const auto made = made_kernel_matrix(model, t, net);
        const auto site = random_site_matrix(model, t);
        const auto sweep = ssf_sweep_matrix(model, t);
        const auto hybrid = made * sweep;
        db_uniform = std::max(db_uniform, detailed_balance_violation(uni, pi));
        db_made = std::max(db_made, detailed_balance_violation(made, pi));
        db_site = std::max(db_site, detailed_balance_violation(site, pi));
        db_sweep = std::max(db_sweep, detailed_balance_violation(sweep, pi));
        st_sweep = std::max(st_sweep, stationarity_error(sweep, pi));
        st_hybrid = std::max(st_hybrid, stationarity_error(hybrid, pi));
        for (const auto* m : {&uni, &made, &site, &sweep, &hybrid}) stoch = std::max(stoch, stochasticity_error(*m));
      }
    }
    out.push_back(check_below("detailed balance, uniform kernel (N=4)", db_uniform, 1e-10));
    out.push_back(check_below("detailed balance, MADE kernel (N=4)", db_made, 1e-10));
    out.push_back(check_below("detailed balance, single-site flip (N=4)", db_site, 1e-10));
    out.push_back(check_below("detailed balance, SSF sweep (N=4)", db_sweep, 1e-10));
    out.push_back(check_below("stationarity, SSF sweep (N=4)", st_sweep, 1e-9));
    out.push_back(check_below("stationarity, hybrid step (N=4)", st_hybrid, 1e-9));
    out.push_back(check_below("row-stochastic transition matrices", stoch, 1e-12));
  }

  // PT exchange on a 2-replica, 3-site product space.
  {
    const auto model = random_model(3, 2, true, rng);
    const double b1 = 0.4, b2 = 1.3;
    const auto p1 = boltzmann_distribution(model, Temperature(b1));
    const auto p2 = boltzmann_distribution(model, Temperature(b2));
    const auto e = model.energy_table();
    double worst = 0.0;
    for (std::size_t x = 0; x < 8; ++x) {
      for (std::size_t y = 0; y < 8; ++y) {
        const double fwd = p1[x] * p2[y] * exchange_probability(b1, b2, e[x], e[y]);
        const double rev = p1[y] * p2[x] * exchange_probability(b1, b2, e[y], e[x]);
        worst = std::max(worst, std::abs(fwd - rev));
      }
    }
    out.push_back(check_below("detailed balance, replica exchange (3 sites)", worst, 1e-10));
  }

  // MADE normalization and gradients.
  {
    double norm_err = 0.0;
    for (std::size_t n : {3U, 7U, 12U}) {
      norm_err = std::max(norm_err, made_normalization_error(random_made(n, 4 * n, rng, 3.0)));
      MadeNetwork ordered(n, {2 * n, 3 * n}, [&] {
        std::vector<std::size_t> o(n);
        std::iota(o.rbegin(), o.rend(), std::size_t{0});
        return o;
      }());
      ordered.initialize(rng);
      norm_err = std::max(norm_err, made_normalization_error(ordered));
    }
    out.push_back(check_below("MADE normalization (N<=12)", norm_err, 1e-6));

    double grad_err = 0.0;
    for (std::size_t n : {4U, 6U}) {
      const auto net = random_made(n, 4 * n, rng);
      std::vector<SpinConfig> data;
      for (int i = 0; i < 16; ++i) data.push_back(SpinConfig::random(n, rng));
      grad_err = std::max(grad_err, made_gradient_error(net, data));
    }
    out.push_back(check_below("MADE analytic vs finite-difference gradient", grad_err, 1e-4));
  }

  // SAT penalty <-> Ising energy, exhaustive.
  {
    double worst = 0.0;
    for (std::size_t k : {2U, 3U}) {
      for (std::size_t n : {4U, 8U, 12U}) {
        const auto f = generate_instance(n, k, default_alpha_c(k), rng());
        const auto model = to_ising(f);
        for (std::uint64_t z = 0; z < (std::uint64_t{1} << n); ++z) {
          worst = std::max(worst, std::abs(model.energy_of_bits(z) - static_cast<double>(f.count_unsatisfied_bits(z))));
        }
      }
    }
    out.push_back({"SAT penalty equals Ising energy (N<=12, exact)", worst == 0.0, worst, 0.0});
  }

  // ICM pair-energy conservation.
  {
    double worst = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
      const auto model = random_model(8, 2, true, rng);
      for (int move = 0; move < 50; ++move) {
        auto a = SpinConfig::random(8, rng);
        auto b = SpinConfig::random(8, rng);
        const double before = energy(model, a) + energy(model, b);
        icm_move(a, b, model, rng);
        worst = std::max(worst, std::abs(energy(model, a) + energy(model, b) - before));
      }
    }
    out.push_back({"ICM conserves pair energy (integer models, exact)", worst == 0.0, worst, 0.0});
  }

  // Quantum layers against dense exponentials.
  {
    const auto model = random_model(3, 3, false, rng);
    const auto table = model.energy_table();
    const double gamma = 0.83, beta = -0.41;
    auto s = StateVector::uniform(3);
    for (std::size_t z = 0; z < s.dim(); ++z) s.amplitudes()[z] *= Complex(std::cos(0.3 * z), std::sin(0.7 * z));
    const DenseVector v0 = to_dense(s);
    auto phase = s;
    apply_phase_layer(phase, table, gamma);
    auto mixer = s;
    apply_mixer_layer(mixer, beta);
    out.push_back(check_below("phase layer vs dense expm (N=3)",
                              max_abs_diff(phase, dense_expm(dense_problem(table), gamma) * v0), 1e-10));
    out.push_back(check_below("mixer layer vs dense expm (N=3)",
                              max_abs_diff(mixer, dense_expm(dense_driver(3), beta) * v0), 1e-10));

    const auto model4 = random_model(4, 2, false, rng);
    const auto table4 = model4.energy_table();
    const std::vector<double> gammas{0.37, -1.1}, betas{0.52, 0.18};
    const auto q = run_qaoa(4, table4, gammas, betas);
    DenseVector v = to_dense(StateVector::uniform(4));
    for (std::size_t l = 0; l < 2; ++l) {
      v = dense_expm(dense_problem(table4), gammas[l]) * v;
      v = dense_expm(dense_driver(4), betas[l]) * v;
    }
    out.push_back(check_below("QAOA p=2 vs dense unitary product (N=4)", max_abs_diff(q, v), 1e-10));

    const double alpha = driver_balance_scale(model);
    const auto h = qe_mcmc_hamiltonian(table, alpha, 0.4);
    const DenseMatrix dense_h = h.problem_weight * dense_problem(table) + h.driver_weight * dense_driver(3);
    const double time = 7.3;
    auto evolved = s;
    evolve_fixed(evolved, h, time);
    out.push_back(check_below("evolve_fixed vs dense expm (N=3)", max_abs_diff(evolved, dense_expm(dense_h, time) * v0),
                              1e-7));

    double sym = 0.0;
    std::vector<StateVector> cols;
    for (std::size_t z = 0; z < 8; ++z) {
      auto c = StateVector::basis(3, z);
      evolve_fixed(c, h, time);
      cols.push_back(std::move(c));
    }
    for (std::size_t z = 0; z < 8; ++z) {
      for (std::size_t w = 0; w < 8; ++w) sym = std::max(sym, std::abs(std::abs(cols[z][w]) - std::abs(cols[w][z])));
    }
    out.push_back(check_below("evolve_fixed proposal symmetry |U_zw| = |U_wz|", sym, 1e-8));
  }
  return out;
}

/// A MADE net with a deliberately broken mask must fail the normalization
/// check. Passes when the corruption is detected.
inline CheckResult made_mask_negative_control(std::uint64_t seed = 1) {
  Rng rng(seed);
  auto net = random_made(6, 24, rng, 3.0);
  corrupt_made_mask(net);
  const double err = made_normalization_error(net);
  return {"corrupted MADE mask fails normalization (negative control)",
          err > 1e-6 && !net.masks_are_autoregressive(), err, 1e-6};
}

inline void print_checks(std::ostream& out, const std::vector<CheckResult>& checks) {
  for (const auto& c : checks) {
    out << (c.passed ? "PASS" : "FAIL") << "  " << c.name << "  value=" << c.value << "  limit=" << c.limit << '\n';
  }
}

}  // namespace fairsample

#endif  // FAIRSAMPLE_VALIDATION_HPP
