#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "fairsample/sat.hpp"

namespace fs = fairsample;

namespace {

fs::Clause clause(std::initializer_list<long> dimacs) {
  std::vector<fs::Literal> lits;
  for (long d : dimacs) lits.push_back({static_cast<std::size_t>(std::labs(d) - 1), d < 0});
  return fs::Clause(std::move(lits));
}

}  // namespace

TEST(Sat, ClauseTruthTable) {
  const auto c = clause({1, -2});
  // x1 is bit 0, x2 is bit 1; false only at x1 = 0, x2 = 1.
  EXPECT_TRUE(fs::eval_clause(c, fs::SpinConfig(2, 0b00)));
  EXPECT_TRUE(fs::eval_clause(c, fs::SpinConfig(2, 0b01)));
  EXPECT_FALSE(fs::eval_clause(c, fs::SpinConfig(2, 0b10)));
  EXPECT_TRUE(fs::eval_clause(c, fs::SpinConfig(2, 0b11)));
}

TEST(Sat, RepeatedVariableRejected) { EXPECT_THROW(clause({1, -1}), fs::ContractError); }

TEST(Sat, PenaltyEqualsIsingEnergyExhaustively) {
  for (std::size_t k : {1u, 2u, 3u}) {
    for (std::size_t n : {4u, 6u, 10u, 12u}) {
      const auto f = fs::generate_instance(n, k, k == 1 ? 0.5 : fs::default_alpha_c(k), 17 * n + k);
      const auto m = fs::to_ising(f);
      for (std::uint64_t z = 0; z < (std::uint64_t{1} << n); ++z) {
        ASSERT_EQ(m.energy_of_bits(z), static_cast<double>(f.count_unsatisfied_bits(z))) << "k=" << k << " n=" << n;
      }
    }
  }
}

TEST(Sat, SingleClauseIsingTerms) {
  // (x1 or x2): false iff s1 = s2 = +1, penalty (1+s1)(1+s2)/4.
  const auto m = fs::to_ising(fs::CnfFormula(2, {clause({1, 2})}));
  EXPECT_EQ(m, fs::IsingModel(2, {{{0}, 0.25}, {{1}, 0.25}, {{0, 1}, 0.25}}, 0.25));
}

TEST(Sat, GeneratorClauseCountAndDistinctness) {
  const auto f = fs::generate_instance(10, 3, 4.267, 99);
  EXPECT_EQ(f.n_clauses(), 43u);
  std::set<fs::Clause> distinct(f.clauses().begin(), f.clauses().end());
  EXPECT_EQ(distinct.size(), f.n_clauses());
  for (const auto& c : f.clauses()) EXPECT_EQ(c.width(), 3u);
  EXPECT_EQ(fs::generate_instance(10, 3, 4.267, 99), f);
  EXPECT_THROW(fs::generate_instance(3, 3, 10.0, 1), fs::InfeasibleError);
}

TEST(Sat, EnumerateSolutionsMatchesFilter) {
  const auto f = fs::generate_instance(9, 2, 1.0, 5);
  const auto sols = fs::enumerate_solutions(f);
  std::size_t count = 0;
  for (std::uint64_t z = 0; z < 512; ++z) count += f.count_unsatisfied_bits(z) == 0;
  EXPECT_EQ(sols.size(), count);
  for (const auto& s : sols) EXPECT_TRUE(fs::satisfies(f, s));
}

TEST(Sat, BlockingClauseRemovesExactlyOneSolution) {
  const auto f = fs::generate_instance(8, 2, 1.0, 11);
  auto sols = fs::enumerate_solutions(f);
  ASSERT_FALSE(sols.empty());
  const auto g = fs::add_blocking_clause(f, sols.front());
  const auto after = fs::enumerate_solutions(g);
  EXPECT_EQ(after.size() + 1, sols.size());
  EXPECT_EQ(std::vector(sols.begin() + 1, sols.end()), after);
  EXPECT_THROW(fs::add_blocking_clause(g, sols.front()), fs::ContractError);
}

TEST(Sat, InstanceSetFiltersForDegeneracy) {
  const auto set = fs::build_instance_set(8, 9, 2, 3, 1.0, 4);
  ASSERT_EQ(set.entries.size(), 6u);
  for (const auto& e : set.entries) {
    EXPECT_GE(e.solutions.size(), 2u);
    EXPECT_EQ(e.solutions, fs::enumerate_solutions(e.formula));
  }
  // Sizes draw independent seed streams.
  const auto only9 = fs::build_instance_set(9, 9, 2, 3, 1.0, 4);
  EXPECT_EQ(only9.entries[0].formula, set.entries[3].formula);
}

TEST(Sat, DimacsRoundTrip) {
  const auto f = fs::generate_instance(7, 3, 4.267, 3);
  std::stringstream ss;
  fs::write_dimacs(ss, f);
  EXPECT_EQ(fs::read_dimacs(ss), f);
}

TEST(Sat, DimacsParsesCommentsAndRejectsGarbage) {
  std::stringstream ok("c comment\np cnf 3 2\n1 -2 0\n2 3 0\n");
  const auto f = fs::read_dimacs(ok);
  EXPECT_EQ(f.n_vars(), 3u);
  EXPECT_EQ(f.n_clauses(), 2u);
  std::stringstream bad("p cnf 2 1\n1 5 0\n");
  EXPECT_THROW(fs::read_dimacs(bad), fs::Error);
}

TEST(Sat, InstanceSetSaveLoad) {
  const auto set = fs::build_instance_set(6, 6, 2, 2, 1.0, 8);
  const auto dir = std::filesystem::temp_directory_path() / "fairsample_set_test";
  std::filesystem::remove_all(dir);
  fs::save_instance_set(set, dir);
  const auto back = fs::load_instance_set(dir);
  ASSERT_EQ(back.entries.size(), set.entries.size());
  for (std::size_t i = 0; i < set.entries.size(); ++i) {
    EXPECT_EQ(back.entries[i].formula, set.entries[i].formula);
    EXPECT_EQ(back.entries[i].solutions, set.entries[i].solutions);
  }
  std::filesystem::remove_all(dir);
}
