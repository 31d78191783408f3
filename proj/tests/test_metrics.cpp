#include <gtest/gtest.h>

#include <sstream>

#include "fairsample/experiment.hpp"

namespace fs = fairsample;

namespace {

std::vector<fs::SpinConfig> states(std::initializer_list<std::uint64_t> bits, std::size_t n = 3) {
  std::vector<fs::SpinConfig> out;
  for (auto b : bits) out.emplace_back(n, b);
  return out;
}

fs::ResultRow row(std::string algo, std::size_t inst, std::size_t trial, std::optional<double> steps,
                  std::optional<double> ratio = std::nullopt) {
  fs::ResultRow r;
  r.k = 2;
  r.n = 8;
  r.algorithm = std::move(algo);
  r.instance = inst;
  r.trial = trial;
  r.n_g = 4;
  r.steps = steps;
  r.ratio = ratio;
  r.all_found = ratio.has_value();
  return r;
}

}  // namespace

TEST(Metrics, FairnessOfHistogram) {
  const auto g = states({1, 2, 4});
  const auto samples = states({1, 1, 2, 4, 1, 2, 7});
  const auto h = fs::histogram(std::span<const fs::SpinConfig>(samples), g);
  EXPECT_DOUBLE_EQ(h.total, 6.0);
  const auto f = fs::fairness(h);
  EXPECT_TRUE(f.all_found);
  EXPECT_DOUBLE_EQ(*f.ratio, 3.0);
  EXPECT_NEAR(*f.tvd_to_uniform, 0.5 * (std::abs(0.5 - 1.0 / 3) + std::abs(1.0 / 6 - 1.0 / 3)), 1e-15);

  const auto missing = states({1, 1, 2});
  const auto f2 = fs::fairness(fs::histogram(std::span<const fs::SpinConfig>(missing), g));
  EXPECT_FALSE(f2.all_found);
  EXPECT_FALSE(f2.ratio);
}

TEST(Metrics, UniformHistogramIsFair) {
  const auto g = states({0, 3});
  const auto samples = states({0, 3, 3, 0});
  const auto f = fs::fairness(fs::histogram(std::span<const fs::SpinConfig>(samples), g));
  EXPECT_DOUBLE_EQ(*f.ratio, 1.0);
  EXPECT_DOUBLE_EQ(*f.tvd_to_uniform, 0.0);
}

TEST(Metrics, StepsToEnumerateSequence) {
  const auto g = states({1, 2});
  const auto seq = states({0, 1, 1, 5, 2, 1});
  EXPECT_EQ(fs::steps_to_enumerate(std::span<const fs::SpinConfig>(seq), g), 5u);
  const auto partial = states({0, 1});
  EXPECT_FALSE(fs::steps_to_enumerate(std::span<const fs::SpinConfig>(partial), g));
}

TEST(Metrics, StepsToEnumerateIsMonotoneUnderExtension) {
  fs::Rng rng(1);
  const auto g = states({1, 2, 3, 4});
  std::vector<fs::SpinConfig> seq;
  std::optional<std::uint64_t> first;
  for (int i = 0; i < 200; ++i) {
    seq.emplace_back(3, fs::uniform_index(rng, 8));
    const auto s = fs::steps_to_enumerate(std::span<const fs::SpinConfig>(seq), g);
    if (first) {
      EXPECT_EQ(s, first);
    }
    if (s && !first) first = s;
  }
  EXPECT_TRUE(first);
}

TEST(Metrics, CouponCollectorCalibration) {
  const auto g = states({0, 1, 2, 3, 4, 5});
  fs::Rng rng(2);
  double total = 0.0;
  const int runs = 1000;
  for (int r = 0; r < runs; ++r) {
    std::vector<fs::SpinConfig> seq;
    std::optional<std::uint64_t> s;
    while (!s) {
      seq.emplace_back(3, fs::uniform_index(rng, 6));
      s = fs::steps_to_enumerate(std::span<const fs::SpinConfig>(seq), g);
    }
    total += static_cast<double>(*s);
  }
  const double expected = 6.0 * (1.0 + 1.0 / 2 + 1.0 / 3 + 1.0 / 4 + 1.0 / 5 + 1.0 / 6);
  EXPECT_NEAR(total / runs, expected, 0.1 * expected);
}

TEST(Metrics, StepsToEnumerateFromTrace) {
  const fs::IsingModel m(3, {{{0}, 1.0}});
  fs::ChainOptions co;
  co.steps = 2;
  co.init = fs::SpinConfig(3, 0);
  const auto t = fs::run_chain(m, fs::Temperature(0.0), fs::ChainUpdate::ssf(), co);
  const auto g = states({7});
  EXPECT_EQ(fs::steps_to_enumerate(t, g), 3u);
  EXPECT_EQ(fs::steps_to_enumerate(t, g, fs::Accounting::kSteps), 1u);
  EXPECT_EQ(fs::distinct_ground_states(t, states({0, 7, 5})), 2u + (t.first_visits.count(fs::SpinConfig(3, 5))));
}

TEST(Metrics, AggregateGroupsAndSkipsMissing) {
  std::vector<fs::ResultRow> rows{row("a", 0, 0, 10.0, 1.0), row("a", 1, 0, std::nullopt, std::nullopt),
                                  row("a", 2, 0, 30.0, 3.0), row("b", 0, 0, 5.0, 2.0)};
  const auto g = fs::aggregate(rows);
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g[0].key.algorithm, "a");
  EXPECT_EQ(g[0].rows, 3u);
  EXPECT_EQ(g[0].all_found, 2u);
  EXPECT_EQ(g[0].ratio->count, 2u);
  EXPECT_DOUBLE_EQ(g[0].ratio->median, 2.0);
  EXPECT_DOUBLE_EQ(g[0].steps->mean, 20.0);
  EXPECT_EQ(g[1].steps->count, 1u);
  EXPECT_THROW(fs::aggregate(std::vector<fs::ResultRow>{}), fs::ContractError);
}

TEST(Metrics, Superiority) {
  std::vector<fs::ResultRow> rows{row("a", 0, 1, 10.0), row("a", 0, 2, 20.0), row("b", 0, 1, 30.0),
                                  row("a", 1, 1, 50.0), row("b", 1, 1, 40.0), row("a", 2, 1, 5.0),
                                  row("b", 2, 1, 5.0), row("a", 3, 1, 1.0), row("b", 3, 1, std::nullopt)};
  const auto s = fs::superiority(rows, "a", "b");
  EXPECT_EQ(s.compared, 3u);
  EXPECT_EQ(s.a_wins, 1u);
  EXPECT_EQ(s.b_wins, 1u);
  EXPECT_EQ(s.ties, 1u);
}

TEST(Metrics, RowsCsvRoundTrip) {
  std::vector<fs::ResultRow> rows{row("qaoa-hmc", 3, 0, std::nullopt, 1.25), row("walksat", 3, 2, 123.0)};
  rows[0].tvd = 0.0625;
  rows[1].seed = 987654321;
  std::istringstream in(fs::rows_to_csv(rows));
  const auto back = fs::read_rows_csv(in);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].algorithm, rows[i].algorithm);
    EXPECT_EQ(back[i].instance, rows[i].instance);
    EXPECT_EQ(back[i].trial, rows[i].trial);
    EXPECT_EQ(back[i].seed, rows[i].seed);
    EXPECT_EQ(back[i].ratio, rows[i].ratio);
    EXPECT_EQ(back[i].tvd, rows[i].tvd);
    EXPECT_EQ(back[i].steps, rows[i].steps);
    EXPECT_EQ(back[i].all_found, rows[i].all_found);
  }
  std::istringstream bad("nope\n");
  EXPECT_THROW(fs::read_rows_csv(bad), fs::FormatError);
}

TEST(Metrics, ComputeMetricsSplitsFairnessAndCounting) {
  std::vector<fs::ResultRow> rows{row("qaoa-hmc", 0, 0, std::nullopt, 1.5), row("qaoa-hmc", 0, 1, 10.0),
                                  row("walksatlm", 0, 1, 20.0)};
  const auto t = fs::compute_metrics(rows);
  EXPECT_EQ(t.fairness.size(), 1u);
  EXPECT_EQ(t.counting.size(), 2u);
  ASSERT_EQ(t.superiority.size(), 1u);
  EXPECT_EQ(std::get<4>(t.superiority[0]).a_wins, 1u);
}
