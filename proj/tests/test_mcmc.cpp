#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "fairsample/mcmc.hpp"
#include "fairsample/validation.hpp"

namespace fs = fairsample;

namespace {

/// Deterministic proposal for frequency checks.
class FixedKernel final : public fs::ProposalKernel {
 public:
  explicit FixedKernel(fs::SpinConfig c) : c_(c) {}
  fs::Proposal propose(const fs::SpinConfig&, fs::Rng&) const override { return {c_}; }
  fs::KernelTag tag() const noexcept override { return fs::KernelTag::kUniform; }

 private:
  fs::SpinConfig c_;
};

double tvd(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
  return 0.5 * d;
}

}  // namespace

TEST(Mcmc, AcceptanceProbabilityFormula) {
  fs::Proposal sym{fs::SpinConfig(2, 0)};
  EXPECT_DOUBLE_EQ(fs::acceptance_probability(1.0, -3.0, sym), 1.0);
  EXPECT_NEAR(fs::acceptance_probability(2.0, 0.5, sym), std::exp(-1.0), 1e-15);
  fs::Proposal asym{fs::SpinConfig(2, 0), false, std::log(0.5), std::log(0.25)};
  EXPECT_NEAR(fs::acceptance_probability(1.0, 0.0, asym), 0.5, 1e-15);
}

TEST(Mcmc, UphillAcceptanceFrequency) {
  const fs::IsingModel m(1, {{{0}, -0.5}});  // E(up) = -0.5, E(down) = 0.5
  const FixedKernel k(fs::SpinConfig(1, 1));
  const fs::Temperature t(1.3);
  fs::Rng rng(1);
  const int trials = 100000;
  int accepted = 0;
  for (int i = 0; i < trials; ++i) {
    auto c = fs::ChainState::start(m, fs::SpinConfig(1, 0));
    accepted += fs::mh_step(c, m, t, k, rng);
  }
  const double p = std::exp(-1.3);
  EXPECT_NEAR(accepted / double(trials), p, 3.0 * std::sqrt(p * (1 - p) / trials));
}

TEST(Mcmc, RejectLeavesStateAndCountsTransition) {
  const fs::IsingModel m(1, {{{0}, -50.0}});
  const FixedKernel k(fs::SpinConfig(1, 1));
  fs::Rng rng(2);
  auto c = fs::ChainState::start(m, fs::SpinConfig(1, 0));
  EXPECT_FALSE(fs::mh_step(c, m, fs::Temperature(10.0), k, rng));
  EXPECT_EQ(c.current.bits(), 0u);
  EXPECT_EQ(c.transitions, 1u);
  EXPECT_DOUBLE_EQ(c.energy, -50.0);
}

TEST(Mcmc, InfiniteTemperatureSweepFlipsEverySite) {
  fs::Rng rng(3);
  const auto m = fs::random_model(6, 2, true, rng);
  auto c = fs::ChainState::start(m, fs::SpinConfig(6, 0));
  EXPECT_EQ(fs::ssf_sweep(c, m, fs::Temperature(0.0), rng), 6u);
  EXPECT_EQ(c.current.bits(), 0b111111u);
  EXPECT_EQ(c.transitions, 6u);
  EXPECT_DOUBLE_EQ(c.energy, fs::energy(m, c.current));
}

TEST(Mcmc, SweepVisitsEachSiteOnceInRandomOrder) {
  const fs::IsingModel m(5, {{{0}, 1.0}});
  fs::Rng rng(4);
  std::set<std::vector<std::size_t>> orders;
  for (int rep = 0; rep < 30; ++rep) {
    auto c = fs::ChainState::start(m, fs::SpinConfig(5, 0));
    std::vector<std::size_t> order;
    fs::SpinConfig prev = c.current;
    fs::ssf_sweep(c, m, fs::Temperature(0.0), rng, [&](const fs::ChainState& s) {
      order.push_back(static_cast<std::size_t>(std::countr_zero(s.current.bits() ^ prev.bits())));
      prev = s.current;
    });
    auto sorted = order;
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(sorted, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
    orders.insert(order);
  }
  EXPECT_GT(orders.size(), 10u);
}

TEST(Mcmc, TransitionMatricesSatisfyDetailedBalance) {
  fs::Rng rng(5);
  for (int rep = 0; rep < 3; ++rep) {
    const auto m = fs::random_model(4, 3, false, rng);
    for (double beta : {0.3, 3.0}) {
      const fs::Temperature t(beta);
      const auto pi = fs::boltzmann_distribution(m, t);
      const auto net = fs::random_made(4, 16, rng, 2.0);
      EXPECT_LT(fs::detailed_balance_violation(fs::made_kernel_matrix(m, t, net), pi), 1e-10);
      EXPECT_LT(fs::detailed_balance_violation(fs::uniform_kernel_matrix(m, t), pi), 1e-10);
      EXPECT_LT(fs::detailed_balance_violation(fs::random_site_matrix(m, t), pi), 1e-10);
      const auto sweep = fs::ssf_sweep_matrix(m, t);
      EXPECT_LT(fs::stationarity_error(sweep, pi), 1e-9);
      EXPECT_LT(fs::stationarity_error(fs::made_kernel_matrix(m, t, net) * sweep, pi), 1e-9);
    }
  }
}

TEST(Mcmc, ZeroWeightMadeReducesToUniformAcceptance) {
  const fs::MadeKernel k(fs::MadeNetwork(3, {12}));
  fs::Rng rng(6);
  const auto p = k.propose(fs::SpinConfig(3, 5), rng);
  EXPECT_FALSE(p.symmetric);
  EXPECT_NEAR(p.log_q_forward, p.log_q_reverse, 1e-15);
}

TEST(Mcmc, MadeProposalIgnoresCurrentState) {
  fs::Rng net_rng(7);
  const fs::MadeKernel k(fs::random_made(4, 16, net_rng, 2.0));
  fs::Rng a(11), b(11);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(k.propose(fs::SpinConfig(4, 0), a).candidate, k.propose(fs::SpinConfig(4, 15), b).candidate);
  }
}

TEST(Mcmc, QeMcmcProposalFollowsEvolvedState) {
  fs::Rng rng(8);
  const auto m = fs::random_model(4, 2, false, rng);
  const fs::QeMcmcKernel k(m);
  EXPECT_NEAR(k.alpha(), std::sqrt(4.0 / m.squared_coefficient_norm()), 1e-15);
  const auto table = m.energy_table();
  const auto h = fs::qe_mcmc_hamiltonian(table, k.alpha(), 0.4);
  auto state = fs::StateVector::basis(4, 5);
  fs::evolve_fixed(state, h, 6.0);
  const auto dist = fs::measure_distribution(state);
  const int shots = 2000;
  std::vector<double> freq(16, 0.0);
  for (int i = 0; i < shots; ++i) {
    const auto p = k.propose_with(fs::SpinConfig(4, 5), 0.4, 6.0, rng);
    EXPECT_TRUE(p.symmetric);
    freq[p.candidate.bits()] += 1.0 / shots;
  }
  EXPECT_LT(tvd(freq, dist.probs), 0.06);
  EXPECT_THROW(fs::QeMcmcKernel(m, fs::QeHyper{0.7, 0.2}), fs::ContractError);
}

TEST(Mcmc, SsfChainMatchesBoltzmann) {
  fs::Rng rng(9);
  const auto m = fs::random_model(4, 2, true, rng);
  const fs::Temperature t(0.8);
  const auto pi = fs::boltzmann_distribution(m, t);
  fs::ChainOptions co;
  co.steps = 1000000;
  co.seed = 10;
  const auto trace = fs::run_chain(m, t, fs::ChainUpdate::ssf(), co);
  std::vector<double> freq(16, 0.0);
  for (const auto& r : trace.records) freq[r.state.bits()] += 1.0 / trace.records.size();
  EXPECT_LT(tvd(freq, pi), 0.02);
}

TEST(Mcmc, HybridChainMatchesBoltzmann) {
  fs::Rng rng(10);
  const auto m = fs::random_model(4, 3, false, rng);
  const fs::Temperature t(1.5);
  const auto pi = fs::boltzmann_distribution(m, t);
  const fs::MadeKernel k(fs::random_made(4, 16, rng, 2.0));
  fs::ChainOptions co;
  co.steps = 200000;
  co.seed = 11;
  const auto trace = fs::run_chain(m, t, fs::ChainUpdate::hybrid(k), co);
  std::vector<double> freq(16, 0.0);
  for (const auto& r : trace.records) freq[r.state.bits()] += 1.0 / trace.records.size();
  EXPECT_LT(tvd(freq, pi), 0.02);
  EXPECT_EQ(trace.total_transitions, co.steps * 5);
}

TEST(Mcmc, RunChainIsDeterministicAndAccountsSteps) {
  fs::Rng rng(12);
  const auto m = fs::random_model(5, 2, true, rng);
  const fs::MadeKernel k(fs::random_made(5, 20, rng));
  fs::ChainOptions co;
  co.steps = 500;
  co.seed = 3;
  co.thinning = 5;
  co.burn_in = 100;
  const auto a = fs::run_chain(m, fs::Temperature(2.0), fs::ChainUpdate::with_kernel(k), co);
  const auto b = fs::run_chain(m, fs::Temperature(2.0), fs::ChainUpdate::with_kernel(k), co);
  ASSERT_EQ(a.records.size(), 80u);
  for (std::size_t i = 0; i < a.records.size(); ++i) EXPECT_EQ(a.records[i].state, b.records[i].state);
  EXPECT_EQ(a.records.front().step, 105u);
  EXPECT_EQ(a.total_transitions, 500u);
  for (const auto& r : a.records) EXPECT_DOUBLE_EQ(r.energy, fs::energy(m, r.state));
  EXPECT_EQ(fs::ChainUpdate::hybrid(k).transitions_per_step(5), 6u);
  EXPECT_EQ(fs::ChainUpdate::ssf().transitions_per_step(5), 5u);
}

TEST(Mcmc, FirstVisitsSeeStatesInsideSweeps) {
  const fs::IsingModel m(3, {{{0}, 1.0}});
  fs::ChainOptions co;
  co.steps = 1;
  co.seed = 1;
  co.init = fs::SpinConfig(3, 0);
  const auto trace = fs::run_chain(m, fs::Temperature(0.0), fs::ChainUpdate::ssf(), co);
  // Start state, two intermediate states, final state.
  EXPECT_EQ(trace.first_visits.size(), 4u);
  EXPECT_EQ(trace.records.size(), 1u);
  EXPECT_EQ(trace.first_visits.at(fs::SpinConfig(3, 7)).transitions, 3u);
}

TEST(Mcmc, TraceExportRoundTrip) {
  fs::Rng rng(13);
  const auto m = fs::random_model(6, 2, true, rng);
  fs::ChainOptions co;
  co.steps = 50;
  co.seed = 4;
  const auto trace = fs::run_chain(m, fs::Temperature(1.0), fs::ChainUpdate::ssf(), co);
  std::stringstream bin;
  fs::write_trace_binary(bin, trace);
  const auto back = fs::read_trace_binary(bin);
  ASSERT_EQ(back.records.size(), trace.records.size());
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    EXPECT_EQ(back.records[i].state, trace.records[i].state);
    EXPECT_EQ(back.records[i].energy, trace.records[i].energy);
    EXPECT_EQ(back.records[i].transitions, trace.records[i].transitions);
  }
  std::stringstream csv;
  fs::write_trace_csv(csv, trace);
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "step,bitstring,energy,accepted,kernel_tag,transitions");
  std::stringstream garbage("not a trace");
  EXPECT_THROW(fs::read_trace_binary(garbage), fs::FormatError);
}
