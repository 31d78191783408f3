#include <gtest/gtest.h>

#include <cmath>

#include "fairsample/qsim.hpp"
#include "fairsample/validation.hpp"

namespace fs = fairsample;

namespace {

fs::StateVector scrambled(std::size_t n) {
  auto s = fs::StateVector::uniform(n);
  for (std::size_t z = 0; z < s.dim(); ++z) s.amplitudes()[z] *= fs::Complex(std::cos(0.9 * z), std::sin(0.4 * z));
  return s;
}

double tvd(const fs::OutputDistribution& a, const fs::OutputDistribution& b) {
  double d = 0.0;
  for (std::size_t z = 0; z < a.probs.size(); ++z) d += std::abs(a.probs[z] - b.probs[z]);
  return 0.5 * d;
}

fs::IsingModel fixture(const char* name) {
  return fs::load_model(std::string(FAIRSAMPLE_DATA_DIR) + "/fixtures/" + name + ".json");
}

}  // namespace

TEST(Qsim, UniformStateIsNormalized) {
  const auto s = fs::StateVector::uniform(5);
  EXPECT_NEAR(s.norm(), 1.0, 1e-14);
  EXPECT_NEAR(std::norm(s[7]), 1.0 / 32.0, 1e-15);
  EXPECT_THROW(fs::StateVector::uniform(fs::kMaxQubits + 1), fs::CapacityError);
}

TEST(Qsim, LayersMatchDenseExponentials) {
  fs::Rng rng(2);
  for (std::size_t n : {1u, 2u, 4u}) {
    const auto model = fs::random_model(n, 3, false, rng);
    const auto table = model.energy_table();
    const auto s = scrambled(n);
    const auto v = fs::to_dense(s);
    auto phase = s;
    fs::apply_phase_layer(phase, model, 1.37);
    EXPECT_LT(fs::max_abs_diff(phase, fs::dense_expm(fs::dense_problem(table), 1.37) * v), 1e-10);
    auto mixer = s;
    fs::apply_mixer_layer(mixer, 0.61);
    EXPECT_LT(fs::max_abs_diff(mixer, fs::dense_expm(fs::dense_driver(n), 0.61) * v), 1e-10);
  }
}

TEST(Qsim, ZeroAnglesAreIdentity) {
  const auto s = scrambled(3);
  auto t = s;
  fs::apply_phase_layer(t, fs::IsingModel(3, {{{0, 2}, 1.0}}), 0.0);
  fs::apply_mixer_layer(t, 0.0);
  EXPECT_LT(fs::detail::max_abs_difference(s, t), 1e-15);
}

TEST(Qsim, CompositionWeightsSumToOne) {
  for (std::size_t order : {2u, 4u, 6u, 8u}) {
    const auto w = fs::detail::composition_weights(order);
    double sum = 0.0;
    for (double x : w) sum += x;
    EXPECT_NEAR(sum, 1.0, 1e-13) << order;
  }
  EXPECT_THROW(fs::detail::composition_weights(3), fs::ContractError);
}

TEST(Qsim, EvolveFixedMatchesDenseExpm) {
  fs::Rng rng(8);
  for (std::size_t n : {2u, 3u, 4u}) {
    const auto model = fs::random_model(n, 2, false, rng);
    const auto table = model.energy_table();
    const double alpha = fs::driver_balance_scale(model);
    for (double g : {0.25, 0.6}) {
      for (double time : {2.0, 11.0, 20.0}) {
        const auto h = fs::qe_mcmc_hamiltonian(table, alpha, g);
        auto s = fs::StateVector::basis(n, 1);
        const auto v = fs::to_dense(s);
        const auto report = fs::evolve_fixed(s, h, time);
        const fs::DenseMatrix dense = h.problem_weight * fs::dense_problem(table) + h.driver_weight * fs::dense_driver(n);
        EXPECT_LT(fs::max_abs_diff(s, fs::dense_expm(dense, time) * v), 1e-7) << n << ' ' << g << ' ' << time;
        EXPECT_LE(report.self_consistency, 1e-8);
      }
    }
  }
}

TEST(Qsim, EvolveFixedIsSymmetric) {
  fs::Rng rng(9);
  const auto model = fs::random_model(4, 3, false, rng);
  const auto table = model.energy_table();
  const auto h = fs::qe_mcmc_hamiltonian(table, fs::driver_balance_scale(model), 0.4);
  std::vector<fs::StateVector> cols;
  for (std::size_t z = 0; z < 16; ++z) {
    auto c = fs::StateVector::basis(4, z);
    fs::evolve_fixed(c, h, 13.0);
    cols.push_back(std::move(c));
  }
  for (std::size_t z = 0; z < 16; ++z) {
    for (std::size_t w = 0; w < 16; ++w) EXPECT_NEAR(std::abs(cols[z][w]), std::abs(cols[w][z]), 1e-8);
  }
}

TEST(Qsim, AnnealingConvergesUnderStepHalving) {
  const auto model = fixture("sixfold");
  for (double ta : {1.0, 10.0, 100.0}) {
    fs::AnnealOptions coarse, fine;
    fine.dt_scale = 0.5;
    const auto a = fs::measure_distribution(fs::run_annealing(model, fs::AnnealSchedule::linear(ta), coarse));
    const auto b = fs::measure_distribution(fs::run_annealing(model, fs::AnnealSchedule::linear(ta), fine));
    EXPECT_LT(tvd(a, b), 1e-6) << ta;
  }
}

TEST(Qsim, AnnealingMatchesDenseTimeOrderedProduct) {
  fs::Rng rng(4);
  const auto model = fs::random_model(3, 2, true, rng);
  const auto table = model.energy_table();
  const double total = 3.0;
  const int steps = 3000;
  fs::DenseVector v = fs::to_dense(fs::StateVector::uniform(3));
  const auto hp = fs::dense_problem(table);
  const auto hd = fs::dense_driver(3);
  for (int i = 0; i < steps; ++i) {
    const double s = (i + 0.5) / steps;
    v = fs::dense_expm((1.0 - s) * hd + s * hp, total / steps) * v;
  }
  const auto state = fs::run_annealing(model, fs::AnnealSchedule::linear(total));
  EXPECT_LT(fs::max_abs_diff(state, v), 1e-5);
}

TEST(Qsim, ShortAnnealLeavesUniformState) {
  const auto model = fixture("sixfold");
  const auto d = fs::measure_distribution(fs::run_annealing(model, fs::AnnealSchedule::linear(1e-6)));
  for (double p : d.probs) EXPECT_NEAR(p, 1.0 / 32.0, 1e-9);
}

TEST(Qsim, MeasurementPassesChiSquare) {
  fs::Rng rng(12);
  const auto model = fs::random_model(4, 2, false, rng);
  const std::vector<double> g{0.4, 0.9}, b{0.7, 0.3};
  const auto state = fs::run_qaoa(model, g, b);
  const auto dist = fs::measure_distribution(state);
  const std::size_t shots = 200000;
  std::vector<double> counts(16, 0.0);
  for (const auto& s : fs::sample(dist, shots, rng)) counts[s.bits()] += 1.0;
  double chi2 = 0.0;
  for (std::size_t z = 0; z < 16; ++z) {
    ASSERT_GT(dist.probs[z], 1e-4);
    const double expected = dist.probs[z] * shots;
    chi2 += (counts[z] - expected) * (counts[z] - expected) / expected;
  }
  // Upper 0.001 quantile of chi-square with 15 degrees of freedom.
  EXPECT_LT(chi2, 37.697);
}

TEST(Qsim, SingleShotMeasurementFollowsBornRule) {
  fs::Rng rng(13);
  auto s = fs::StateVector::from_amplitudes(1, {fs::Complex(std::sqrt(0.2), 0.0), fs::Complex(0.0, std::sqrt(0.8))});
  int ones = 0;
  const int shots = 100000;
  for (int i = 0; i < shots; ++i) ones += fs::measure_once(s, rng).bits() == 1;
  EXPECT_NEAR(ones / double(shots), 0.8, 4 * std::sqrt(0.16 / shots));
}

TEST(Qsim, ZeroProbabilityStatesAreNeverSampled) {
  fs::Rng rng(1);
  fs::OutputDistribution d{2, {0.0, 0.5, 0.0, 0.5}};
  for (const auto& s : fs::sample(d, 5000, rng)) EXPECT_TRUE(s.bits() == 1 || s.bits() == 3);
}
