#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "fairsample/baselines.hpp"
#include "fairsample/metrics.hpp"
#include "fairsample/validation.hpp"

namespace fs = fairsample;

namespace {

double tvd(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
  return 0.5 * d;
}

std::vector<double> record_frequencies(const fs::ChainTrace& t, std::size_t n) {
  std::vector<double> f(std::size_t{1} << n, 0.0);
  for (const auto& r : t.records) f[r.state.bits()] += 1.0 / static_cast<double>(t.records.size());
  return f;
}

}  // namespace

TEST(Baselines, ExchangeProbability) {
  EXPECT_DOUBLE_EQ(fs::exchange_probability(1.0, 2.0, -3.0, -3.0), 1.0);
  // Moving the lower energy to the colder replica is always accepted.
  EXPECT_DOUBLE_EQ(fs::exchange_probability(1.0, 2.0, -1.0, 1.0), 1.0);
  EXPECT_NEAR(fs::exchange_probability(1.0, 2.0, 1.0, -1.0), std::exp(-2.0), 1e-15);
}

TEST(Baselines, GeometricLadder) {
  const auto b = fs::PtIcmConfig::geometric_ladder(0.1, 10.0, 8);
  ASSERT_EQ(b.size(), 8u);
  EXPECT_DOUBLE_EQ(b.front(), 0.1);
  EXPECT_DOUBLE_EQ(b.back(), 10.0);
  for (std::size_t i = 2; i < b.size(); ++i) EXPECT_NEAR(b[i] / b[i - 1], b[1] / b[0], 1e-12);
  EXPECT_THROW(fs::PtIcmConfig::geometric_ladder(0.0, 1.0, 3), fs::ContractError);
}

TEST(Baselines, IcmConservesPairEnergyExactly) {
  fs::Rng rng(1);
  for (int rep = 0; rep < 20; ++rep) {
    const auto m = fs::random_model(10, 2, true, rng);
    for (int k = 0; k < 50; ++k) {
      auto a = fs::SpinConfig::random(10, rng);
      auto b = fs::SpinConfig::random(10, rng);
      const double before = fs::energy(m, a) + fs::energy(m, b);
      fs::icm_move(a, b, m, rng);
      EXPECT_EQ(fs::energy(m, a) + fs::energy(m, b), before);
    }
  }
}

TEST(Baselines, IcmEdgeCases) {
  const fs::IsingModel chain(4, {{{0, 1}, 1.0}, {{1, 2}, -1.0}, {{2, 3}, 1.0}});
  fs::Rng rng(2);
  auto a = fs::SpinConfig(4, 0b0101);
  auto b = a;
  EXPECT_EQ(fs::icm_move(a, b, chain, rng), 0u);
  EXPECT_EQ(a.bits(), 0b0101u);
  b = a.inverted();
  const auto a0 = a, b0 = b;
  EXPECT_EQ(fs::icm_move(a, b, chain, rng), 4u);
  EXPECT_EQ(a, b0);
  EXPECT_EQ(b, a0);
  const fs::IsingModel cubic(3, {{{0, 1, 2}, 1.0}});
  EXPECT_THROW(fs::icm_move(a, b, cubic, rng), fs::UnsupportedError);
}

TEST(Baselines, PtColdestReplicaMatchesBoltzmann) {
  fs::Rng rng(3);
  const auto m = fs::random_model(4, 2, true, rng);
  fs::PtIcmConfig cfg;
  cfg.betas = fs::PtIcmConfig::geometric_ladder(0.1, 1.0, 4);
  cfg.seed = 4;
  const auto r = fs::pt_icm_run(m, cfg, 200000);
  const auto pi = fs::boltzmann_distribution(m, fs::Temperature(1.0));
  EXPECT_LT(tvd(record_frequencies(r.trace, 4), pi), 0.02);
  EXPECT_GT(r.icm_moves, 0u);
  for (std::size_t i = 0; i < r.exchange_attempts.size(); ++i) {
    EXPECT_GT(r.exchange_accepts[i], 0u);
    EXPECT_LE(r.exchange_accepts[i], r.exchange_attempts[i]);
  }
}

TEST(Baselines, SingleTemperaturePtIsPlainSsf) {
  fs::Rng rng(5);
  const auto m = fs::random_model(4, 2, true, rng);
  fs::PtIcmConfig cfg;
  cfg.betas = {0.7};
  cfg.replicas_per_temperature = 1;
  cfg.icm_every = 0;
  cfg.seed = 6;
  const auto pt = fs::pt_icm_run(m, cfg, 100000);
  fs::ChainOptions co;
  co.steps = 100000;
  co.seed = 7;
  const auto ssf = fs::run_chain(m, fs::Temperature(0.7), fs::ChainUpdate::ssf(), co);
  EXPECT_LT(tvd(record_frequencies(pt.trace, 4), record_frequencies(ssf, 4)), 0.02);
  EXPECT_EQ(pt.total_transitions, 100000u * 4);
}

TEST(Baselines, PtIsDeterministicAcrossThreads) {
  fs::Rng rng(8);
  const auto m = fs::random_model(8, 2, true, rng);
  fs::PtIcmConfig cfg;
  cfg.seed = 9;
  const auto a = fs::pt_icm_run(m, cfg, 500);
  cfg.threads = 2;
  const auto b = fs::pt_icm_run(m, cfg, 500);
  ASSERT_EQ(a.trace.records.size(), b.trace.records.size());
  for (std::size_t i = 0; i < a.trace.records.size(); ++i) EXPECT_EQ(a.trace.records[i].state, b.trace.records[i].state);
  EXPECT_EQ(a.exchange_accepts, b.exchange_accepts);
}

TEST(Baselines, PtRejectsHigherOrderModels) {
  const fs::IsingModel cubic(3, {{{0, 1, 2}, 1.0}});
  EXPECT_THROW(fs::pt_icm_run(cubic, fs::PtIcmConfig{}, 10), fs::UnsupportedError);
}

TEST(Baselines, WalkSatTrivialCases) {
  const fs::CnfFormula unit(1, {fs::Clause({{0, false}})}, 1);
  for (std::uint64_t s = 0; s < 20; ++s) {
    fs::WalkSatConfig cfg;
    cfg.seed = s;
    const auto r = fs::walksat_run(unit, cfg);
    ASSERT_TRUE(r.solution);
    EXPECT_LE(r.flips, 3u);
    if (fs::satisfies(unit, r.initial)) {
      EXPECT_EQ(r.flips, 0u);
    }
  }
  const fs::CnfFormula contradiction(1, {fs::Clause({{0, false}}), fs::Clause({{0, true}})}, 1);
  fs::WalkSatConfig cfg;
  cfg.max_flips = 100;
  const auto r = fs::walksat_run(contradiction, cfg);
  EXPECT_FALSE(r.solution);
  EXPECT_EQ(r.flips, 100u);
}

TEST(Baselines, WalkSatVariantsSolveRandomInstances) {
  for (auto variant : {fs::WalkSatVariant::kPlain, fs::WalkSatVariant::kLm}) {
    for (std::uint64_t s = 0; s < 10; ++s) {
      const auto f = fs::generate_instance(14, 3, fs::default_alpha_c(3), 100 + s);
      if (fs::enumerate_solutions(f).empty()) continue;
      fs::WalkSatConfig cfg;
      cfg.variant = variant;
      cfg.seed = s;
      cfg.record_trace = true;
      const auto r = fs::walksat_run(f, cfg);
      ASSERT_TRUE(r.solution);
      EXPECT_TRUE(fs::satisfies(f, *r.solution));
      EXPECT_EQ(r.flipped.size(), r.flips);
      auto x = r.initial;
      for (auto v : r.flipped) x.flip(v);
      EXPECT_EQ(x, *r.solution);
    }
  }
}

TEST(Baselines, WalkSatEnumerationMatchesExactCount) {
  const auto set = fs::build_instance_set(8, 12, 2, 3, 1.0, 11);
  for (const auto& e : set.entries) {
    fs::WalkSatConfig cfg;
    cfg.variant = fs::WalkSatVariant::kLm;
    cfg.seed = e.seed;
    const auto r = fs::walksat_enumerate(e.formula, cfg);
    ASSERT_TRUE(r.complete);
    std::set<std::uint64_t> got, want;
    for (const auto& s : r.solutions) got.insert(s.bits());
    for (const auto& s : e.solutions) want.insert(s.bits());
    EXPECT_EQ(got, want);
    EXPECT_EQ(r.solutions.size(), e.solutions.size());
    EXPECT_TRUE(std::is_sorted(r.flips_at_discovery.begin(), r.flips_at_discovery.end()));
    EXPECT_EQ(r.flips_at_discovery.back(), r.total_flips);
  }
}

TEST(Baselines, HybridChainCountsAllSolutions) {
  const auto set = fs::build_instance_set(8, 10, 2, 2, 1.0, 12);
  for (const auto& e : set.entries) {
    const auto model = fs::to_ising(e.formula);
    const fs::MadeKernel k(fs::MadeNetwork(e.formula.n_vars(), {4 * e.formula.n_vars()}));
    fs::ChainOptions co;
    co.steps = 20000;
    co.seed = e.seed;
    const auto trace = fs::run_chain(model, fs::Temperature(10.0), fs::ChainUpdate::hybrid(k), co);
    EXPECT_EQ(fs::distinct_ground_states(trace, e.solutions), e.solutions.size());
  }
}
