// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <chrono>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "fairsample/experiment.hpp"
#include "fairsample/validation.hpp"

namespace fs = fairsample;

namespace {

struct Outcome {
  bool passed = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) passed = false;
    detail << "    " << (ok ? "ok   " : "FAIL ") << what << '\n';
  }
};

template <typename F>
bool criterion(int id, const std::string& title, F&& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    body(o);
  } catch (const std::exception& e) {
    o.require(false, std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << (o.passed ? "PASS" : "FAIL") << " criterion " << id << ": " << title << " (" << std::fixed
            << std::setprecision(1) << secs << " s)\n"
            << std::defaultfloat << o.detail.str() << std::flush;
  return o.passed;
}

std::string num(double v) {
  std::ostringstream s;
  s << std::setprecision(4) << v;
  return s.str();
}

std::string fixture_dir() { return std::string(FAIRSAMPLE_DATA_DIR) + "/fixtures"; }

double tvd(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
  return 0.5 * d;
}

void exact_oracles(Outcome& o) {
  for (const auto& c : fs::oracle_suite(1)) {
    const std::string bound = c.limit == 0.0 ? " (must be exactly 0)" : " < " + num(c.limit);
    o.require(c.passed, c.name + " = " + num(c.value) + bound);
  }
  const auto neg = fs::made_mask_negative_control(1);
  o.require(neg.passed, neg.name + ": normalization error " + num(neg.value) + " > " + num(neg.limit));
}

void small_instances(Outcome& o) {
  fs::ExperimentConfig cfg = fs::load_config(std::string(FAIRSAMPLE_CONFIG_DIR) + "/fig1.json");
  cfg.fixture_dir = fixture_dir();
  for (const auto& r : fs::run_small_instances(cfg)) {
    const auto& qa = r.method("qa");
    double total = 0.0;
    for (double c : qa.counts) total += c;
    const double p_min = *std::min_element(qa.counts.begin(), qa.counts.end()) / total;
    const double bound = 0.2 / static_cast<double>(r.ground_states.size());
    o.require(p_min < bound, r.name + ": QA least-likely ground state " + num(p_min) + " < " + num(bound));
    for (const char* m : {"qe-mcmc", "qaoa-nmc"}) {
      const auto f = fs::fairness(r.method(m));
      o.require(f.all_found, r.name + ": " + m + " visits all " + std::to_string(r.ground_states.size()) +
                                 " ground states (ratio " + (f.ratio ? num(*f.ratio) : "n/a") + ")");
    }
  }
}

void anneal_sweep(Outcome& o) {
  fs::ExperimentConfig cfg = fs::load_config(std::string(FAIRSAMPLE_CONFIG_DIR) + "/fig2.json");
  cfg.fixture_dir = fixture_dir();
  const auto r = fs::run_anneal_sweep(cfg);
  o.require(r.ground_states.size() == 6, "fixture is sixfold degenerate");
  double worst_short = 0.0;
  for (const auto& p : r.points) {
    if (p.anneal_time <= 10.0 + 1e-9) worst_short = std::max(worst_short, p.ratio.value_or(1e300));
  }
  o.require(worst_short < 2.0, "max ratio for T_a <= 10 is " + num(worst_short) + " < 2");
  const auto& last = r.points.back();
  o.require(std::abs(last.anneal_time - 1000.0) < 1e-9 && last.ratio.value_or(1e300) > 5.0,
            "ratio at T_a = 1000 is " + (last.ratio ? num(*last.ratio) : std::string("inf")) + " > 5");
  o.require(r.t_qaoa <= r.fair_limit, "T_QAOA = " + num(r.t_qaoa) + " lies in the fair region T_a <= " +
                                          num(r.fair_limit));
}

void ksat_fairness(Outcome& o) {
  fs::ExperimentConfig cfg;
  cfg.kind = fs::ExperimentKind::kKsatFairness;
  cfg.seed = 42;
  cfg.k = 2;
  cfg.sizes = {8, 10, 12};
  cfg.per_size = 20;
  cfg.algorithms = {"qaoa-nmc", "qaoa-hmc", "pt-icm"};
  cfg.validate();
  const auto set = fs::build_instances(cfg);
  const auto schedules = fs::optimize_schedules(cfg, set);
  fs::TrainedNets nets;
  fs::train_nets(cfg, set, schedules, nets);
  auto rows = fs::run_chains(cfg, set, nets);
  const auto base = fs::run_baselines(cfg, set);
  rows.insert(rows.end(), base.begin(), base.end());

  std::map<std::string, std::vector<double>> ratios;
  std::map<std::string, std::size_t> found, total;
  for (const auto& r : rows) {
    if (r.trial != 0) continue;
    ++total[r.algorithm];
    found[r.algorithm] += r.all_found;
    if (r.ratio) ratios[r.algorithm].push_back(*r.ratio);
  }
  for (const auto& [a, n] : total) {
    o.detail << "    " << a << ": all_found " << found[a] << "/" << n << ", median ratio "
             << (ratios[a].empty() ? std::string("n/a") : num(fs::median(ratios[a]))) << '\n';
  }
  const double hmc_frac = static_cast<double>(found["qaoa-hmc"]) / static_cast<double>(total["qaoa-hmc"]);
  o.require(total["qaoa-hmc"] == set.entries.size() && hmc_frac >= 0.95,
            "QAOA-HMC all_found on " + num(100.0 * hmc_frac) + "% of instances (>= 95%)");
  const double med_hmc = ratios["qaoa-hmc"].empty() ? 1e300 : fs::median(ratios["qaoa-hmc"]);
  const double med_pt = ratios["pt-icm"].empty() ? 0.0 : fs::median(ratios["pt-icm"]);
  o.require(med_hmc <= 2.0 * med_pt, "median ratio QAOA-HMC " + num(med_hmc) + " <= 2 x PT-ICM " + num(med_pt));
  const std::size_t nmc_fail = total["qaoa-nmc"] - found["qaoa-nmc"];
  o.require(nmc_fail > 0, "QAOA-NMC misses a ground state on " + std::to_string(nmc_fail) + " instance(s) (> 0)");
}

void counting_oracle(Outcome& o) {
  std::size_t checked = 0, walksat_ok = 0, lm_ok = 0, hybrid_ok = 0;
  for (std::size_t k : {2u, 3u}) {
    fs::ExperimentConfig cfg;
    cfg.seed = 77;
    cfg.k = k;
    cfg.sizes = {8, 10, 12, 14};
    cfg.per_size = 3;
    cfg.depth = 3;
    cfg.starts = 3;
    cfg.algorithms = {"qaoa-hmc"};
    cfg.validate();
    const auto set = fs::build_instances(cfg);
    const auto schedules = fs::optimize_schedules(cfg, set);
    fs::TrainedNets nets;
    fs::train_nets(cfg, set, schedules, nets);
    for (std::size_t i = 0; i < set.entries.size(); ++i) {
      const auto& e = set.entries[i];
      const std::size_t exact = e.solutions.size();
      ++checked;
      for (auto variant : {fs::WalkSatVariant::kPlain, fs::WalkSatVariant::kLm}) {
        const auto r = fs::walksat_enumerate(e.formula, fs::walksat_config_for(cfg, variant, fs::derive_seed(9, i, k)));
        std::set<fs::SpinConfig, decltype([](const fs::SpinConfig& a, const fs::SpinConfig& b) {
                   return a.bits() < b.bits();
                 })>
            distinct(r.solutions.begin(), r.solutions.end());
        const bool ok = r.complete && distinct.size() == exact;
        (variant == fs::WalkSatVariant::kPlain ? walksat_ok : lm_ok) += ok;
        if (!ok) {
          o.detail << "    k=" << k << " instance " << i << ": WalkSAT found " << distinct.size() << " of " << exact
                   << '\n';
        }
      }
      const auto model = fs::to_ising(e.formula);
      const fs::MadeKernel kernel(*nets.optimized[i]);
      std::set<std::uint64_t> seen;
      for (std::size_t trial = 0; trial < cfg.initial_states; ++trial) {
        fs::ChainOptions co;
        co.steps = cfg.chain_steps;
        co.seed = fs::derive_seed(fs::derive_seed(cfg.seed, 500, i), trial);
        const auto trace = fs::run_chain(model, fs::Temperature(cfg.beta), fs::ChainUpdate::hybrid(kernel), co);
        for (const auto& g : e.solutions) {
          if (trace.first_visits.count(g)) seen.insert(g.bits());
        }
      }
      hybrid_ok += seen.size() == exact;
      if (seen.size() != exact) {
        o.detail << "    k=" << k << " instance " << i << ": hybrid chain found " << seen.size() << " of " << exact
                 << '\n';
      }
    }
  }
  const auto n = std::to_string(checked);
  o.require(walksat_ok == checked, "WalkSAT enumeration exact on " + std::to_string(walksat_ok) + "/" + n);
  o.require(lm_ok == checked, "WalkSATlm enumeration exact on " + std::to_string(lm_ok) + "/" + n);
  o.require(hybrid_ok == checked, "hybrid-chain distinct count exact on " + std::to_string(hybrid_ok) + "/" + n);
}

void coupon_collector(Outcome& o) {
  const auto model = fs::load_model(fixture_dir() + "/sixfold.json");
  const auto gs = fs::ground_states_bruteforce(model).states;
  o.require(gs.size() == 6, "sixfold fixture has 6 ground states");
  fs::Rng rng(2024);
  const int runs = 1000;
  double sum = 0.0;
  for (int r = 0; r < runs; ++r) {
    std::vector<fs::SpinConfig> seq;
    std::optional<std::uint64_t> steps;
    while (!steps) {
      seq.push_back(gs[fs::uniform_index(rng, gs.size())]);
      steps = fs::steps_to_enumerate(std::span<const fs::SpinConfig>(seq), gs);
    }
    sum += static_cast<double>(*steps);
  }
  double harmonic = 0.0;
  for (int i = 1; i <= 6; ++i) harmonic += 1.0 / i;
  const double expected = 6.0 * harmonic;
  const double mean = sum / runs;
  o.require(std::abs(mean - expected) <= 0.1 * expected,
            "mean steps " + num(mean) + " within 10% of " + num(expected));
}

void statistical_checks(Outcome& o) {
  fs::Rng rng(7);
  const auto model = fs::random_model(4, 2, true, rng);
  const fs::Temperature t(0.8);
  const auto pi = fs::boltzmann_distribution(model, t);
  fs::ChainOptions co;
  co.steps = 1000000;
  co.seed = 8;
  const auto trace = fs::run_chain(model, t, fs::ChainUpdate::ssf(), co);
  std::vector<double> freq(16, 0.0);
  for (const auto& r : trace.records) freq[r.state.bits()] += 1.0 / static_cast<double>(trace.records.size());
  const double d = tvd(freq, pi);
  o.require(d < 0.02, "SSF chain TVD to Boltzmann " + num(d) + " < 0.02");

  const auto state = fs::run_qaoa(model, std::vector<double>{0.4, 0.9}, std::vector<double>{0.7, 0.3});
  const auto dist = fs::measure_distribution(state);
  const std::size_t shots = 200000;
  std::vector<double> counts(16, 0.0);
  for (const auto& s : fs::sample(dist, shots, rng)) counts[s.bits()] += 1.0;
  double chi2 = 0.0;
  std::size_t cells = 0;
  for (std::size_t z = 0; z < 16; ++z) {
    const double expected = dist.probs[z] * static_cast<double>(shots);
    if (expected < 5.0) continue;
    chi2 += (counts[z] - expected) * (counts[z] - expected) / expected;
    ++cells;
  }
  // Upper 0.001 quantile of chi-square with 15 degrees of freedom.
  o.require(cells == 16 && chi2 < 37.697, "measurement chi-square " + num(chi2) + " < 37.697 (df 15)");
}

}  // namespace

int main() {
  bool ok = true;
  ok &= criterion(1, "exact-oracle suite", exact_oracles);
  ok &= criterion(2, "small-instance fairness", small_instances);
  ok &= criterion(3, "annealing-time sweep", anneal_sweep);
  ok &= criterion(4, "k-SAT fairness comparison", ksat_fairness);
  ok &= criterion(5, "counting oracle", counting_oracle);
  ok &= criterion(6, "coupon-collector calibration", coupon_collector);
  ok &= criterion(7, "statistical sampler checks", statistical_checks);
  std::cout << (ok ? "all criteria passed" : "some criteria failed") << '\n';
  return ok ? 0 : 1;
}
