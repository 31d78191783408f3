#ifndef FAIRSAMPLE_EXPERIMENT_HPP
#define FAIRSAMPLE_EXPERIMENT_HPP

// Experiment pipelines behind the CLI: declarative config, per-stage
// functions and the files they exchange.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fairsample/baselines.hpp"
#include "fairsample/error.hpp"
#include "fairsample/ising.hpp"
#include "fairsample/made.hpp"
#include "fairsample/mcmc.hpp"
#include "fairsample/metrics.hpp"
#include "fairsample/parallel.hpp"
#include "fairsample/qaoa.hpp"
#include "fairsample/qsim.hpp"
#include "fairsample/random.hpp"
#include "fairsample/sat.hpp"

namespace fairsample {

inline constexpr const char* kVersion = "0.1.0";

/// Invalid or inconsistent experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage ran before the stage it depends on.
class StageError : public Error {
 public:
  using Error::Error;
};

enum class ExperimentKind { kSmallInstances, kAnnealSweep, kKsatFairness, kKsatCounting };

inline const char* kind_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::kSmallInstances: return "small_instances";
    case ExperimentKind::kAnnealSweep: return "anneal_sweep";
    case ExperimentKind::kKsatFairness: return "ksat_fairness";
    case ExperimentKind::kKsatCounting: return "ksat_counting";
  }
  return "unknown";
}

/// Algorithm names accepted in k-SAT configs and written to result rows.
inline const std::vector<std::string>& known_algorithms() {
  static const std::vector<std::string> names = {
      "qaoa",     "qaoa-fixed",     "made",     "made-fixed", "qaoa-nmc", "qaoa-nmc-fixed",
      "qaoa-hmc", "qaoa-hmc-fixed", "qe-mcmc",  "ssf",        "pt-icm",   "walksat",
      "walksatlm"};
  return names;
}

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kKsatFairness;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  double beta = 10.0;

  // Small-instance fixtures.
  std::string fixture_dir;  // empty: filled in by the caller
  std::vector<std::string> fixtures = {"sixfold", "threefold", "fivefold"};
  std::size_t samples = 1000;
  double anneal_time = 1000.0;
  AnnealOptions anneal{};

  // Annealing-time sweep.
  std::string sweep_fixture = "sixfold";
  std::size_t sweep_points = 30;
  double sweep_min = 0.1;
  double sweep_max = 1000.0;
  double fair_ratio = 2.0;  // ratio below which a sweep point counts as fair

  // QAOA.
  std::size_t depth = 5;
  std::size_t starts = 10;

  // MADE.
  std::size_t training_samples = 1000;
  TrainConfig train{};

  QeHyper qe{};

  // k-SAT instance sets and chains.
  std::size_t k = 2;
  std::vector<std::size_t> sizes = {8, 9, 10, 11, 12, 13, 14, 15, 16};
  std::size_t per_size = 100;
  std::optional<double> alpha_c;
  std::size_t chain_steps = 10000;
  std::size_t initial_states = 10;
  std::vector<std::string> algorithms = {"qaoa", "qaoa-fixed", "made", "qaoa-nmc", "qaoa-hmc", "pt-icm"};

  // PT-ICM. rounds = 0 matches the pooled chain sample count.
  std::uint64_t pt_rounds = 0;
  double pt_beta_min = 0.1;
  std::size_t pt_temperatures = 8;
  std::size_t pt_replicas = 2;

  // WalkSAT.
  double walksat_noise = 0.5;
  std::uint64_t walksat_max_flips = 1'000'000;
  double walksat_lm_w1 = 6.0;
  double walksat_lm_w2 = 1.0;

  double resolved_alpha_c() const { return alpha_c ? *alpha_c : default_alpha_c(k); }
  std::uint64_t resolved_pt_rounds() const {
    return pt_rounds > 0 ? pt_rounds : static_cast<std::uint64_t>(chain_steps) * initial_states;
  }
  bool wants(const std::string& algorithm) const {
    return std::find(algorithms.begin(), algorithms.end(), algorithm) != algorithms.end();
  }

  void validate() const {
    auto require = [](bool ok, const std::string& what) {
      if (!ok) throw ConfigError(what);
    };
    require(std::isfinite(beta) && beta >= 0.0, "beta must be finite and >= 0");
    require(threads >= 1, "threads must be >= 1");
    require(samples >= 1, "samples must be >= 1");
    require(anneal_time > 0.0, "anneal_time must be > 0");
    require(anneal.max_dt > 0.0 && anneal.min_steps >= 1.0, "anneal step control must be positive");
    require(sweep_points >= 2 && sweep_min > 0.0 && sweep_max > sweep_min, "sweep needs >= 2 points on 0 < min < max");
    require(fair_ratio > 1.0, "fair_ratio must exceed 1");
    require(depth >= 1, "depth must be >= 1");
    require(starts >= 1, "starts must be >= 1");
    require(training_samples >= 1, "training_samples must be >= 1");
    require(train.epochs >= 1 && train.batch_size >= 1 && train.learning_rate > 0.0, "invalid MADE training settings");
    try {
      qe.validate();
    } catch (const ContractError& e) {
      throw ConfigError(e.what());
    }
    require(k == 2 || k == 3, "k must be 2 or 3");
    require(!sizes.empty(), "sizes must not be empty");
    for (auto n : sizes) require(n >= k && n <= kMaxEnumerationSites, "instance sizes must lie in [k, 24]");
    require(per_size >= 1, "per_size must be >= 1");
    require(!alpha_c || *alpha_c > 0.0, "alpha_c must be > 0");
    require(chain_steps >= 1 && initial_states >= 1, "chain_steps and initial_states must be >= 1");
    for (const auto& a : algorithms) {
      const auto& known = known_algorithms();
      require(std::find(known.begin(), known.end(), a) != known.end(), "unknown algorithm '" + a + "'");
    }
    require(pt_beta_min > 0.0 && pt_beta_min <= beta, "pt_beta_min must lie in (0, beta]");
    require(pt_temperatures >= 1, "pt_temperatures must be >= 1");
    require(pt_replicas >= 2 && pt_replicas % 2 == 0, "pt_replicas must be even and >= 2");
    require(walksat_noise >= 0.0 && walksat_noise <= 1.0, "walksat_noise must lie in [0, 1]");
    require(walksat_max_flips >= 1, "walksat_max_flips must be >= 1");
    if (k == 3 && wants("pt-icm")) throw ConfigError("pt-icm needs two-body models; drop it for k = 3");
  }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const char* where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError(std::string("unknown key '") + key + "' in " + where);
  }
}

template <typename T>
void read_if(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("bad value for '") + key + "'");
  }
}

}  // namespace detail

inline ExperimentKind parse_kind(const std::string& s) {
  for (auto k : {ExperimentKind::kSmallInstances, ExperimentKind::kAnnealSweep, ExperimentKind::kKsatFairness,
                 ExperimentKind::kKsatCounting}) {
    if (s == kind_name(k)) return k;
  }
  throw ConfigError("unknown experiment kind '" + s + "'");
}

/// Parses and validates. Unknown keys are errors; missing keys keep their
/// defaults.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  using detail::read_if;
  detail::reject_unknown_keys(j,
                              {"kind", "seed", "threads", "beta", "fixtures", "fixture_dir", "samples", "anneal",
                               "sweep", "qaoa", "made", "qe_mcmc", "ksat", "chains", "algorithms", "pt_icm",
                               "walksat"},
                              "config");
  ExperimentConfig c;
  if (j.contains("kind")) c.kind = parse_kind(j.at("kind").get<std::string>());
  read_if(j, "seed", c.seed);
  read_if(j, "threads", c.threads);
  read_if(j, "beta", c.beta);
  read_if(j, "fixtures", c.fixtures);
  read_if(j, "fixture_dir", c.fixture_dir);
  read_if(j, "samples", c.samples);
  read_if(j, "algorithms", c.algorithms);
  if (j.contains("anneal")) {
    const auto& a = j.at("anneal");
    detail::reject_unknown_keys(a, {"time", "max_dt", "min_steps"}, "anneal");
    read_if(a, "time", c.anneal_time);
    read_if(a, "max_dt", c.anneal.max_dt);
    read_if(a, "min_steps", c.anneal.min_steps);
  }
  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    detail::reject_unknown_keys(s, {"fixture", "points", "min", "max", "fair_ratio"}, "sweep");
    read_if(s, "fixture", c.sweep_fixture);
    read_if(s, "points", c.sweep_points);
    read_if(s, "min", c.sweep_min);
    read_if(s, "max", c.sweep_max);
    read_if(s, "fair_ratio", c.fair_ratio);
  }
  if (j.contains("qaoa")) {
    const auto& q = j.at("qaoa");
    detail::reject_unknown_keys(q, {"depth", "starts"}, "qaoa");
    read_if(q, "depth", c.depth);
    read_if(q, "starts", c.starts);
  }
  if (j.contains("made")) {
    const auto& m = j.at("made");
    detail::reject_unknown_keys(m,
                                {"training_samples", "epochs", "batch_size", "learning_rate", "hidden_sizes",
                                 "plateau_epochs", "plateau_tolerance"},
                                "made");
    read_if(m, "training_samples", c.training_samples);
    read_if(m, "epochs", c.train.epochs);
    read_if(m, "batch_size", c.train.batch_size);
    read_if(m, "learning_rate", c.train.learning_rate);
    read_if(m, "hidden_sizes", c.train.hidden_sizes);
    read_if(m, "plateau_epochs", c.train.plateau_epochs);
    read_if(m, "plateau_tolerance", c.train.plateau_tolerance);
  }
  if (j.contains("qe_mcmc")) {
    const auto& q = j.at("qe_mcmc");
    detail::reject_unknown_keys(q, {"gamma_low", "gamma_high", "time_low", "time_high"}, "qe_mcmc");
    read_if(q, "gamma_low", c.qe.gamma_low);
    read_if(q, "gamma_high", c.qe.gamma_high);
    read_if(q, "time_low", c.qe.time_low);
    read_if(q, "time_high", c.qe.time_high);
  }
  if (j.contains("ksat")) {
    const auto& s = j.at("ksat");
    detail::reject_unknown_keys(s, {"k", "sizes", "per_size", "alpha_c"}, "ksat");
    read_if(s, "k", c.k);
    read_if(s, "sizes", c.sizes);
    read_if(s, "per_size", c.per_size);
    if (s.contains("alpha_c") && !s.at("alpha_c").is_null()) {
      double a = 0.0;
      read_if(s, "alpha_c", a);
      c.alpha_c = a;
    }
  }
  if (j.contains("chains")) {
    const auto& s = j.at("chains");
    detail::reject_unknown_keys(s, {"steps", "initial_states"}, "chains");
    read_if(s, "steps", c.chain_steps);
    read_if(s, "initial_states", c.initial_states);
  }
  if (j.contains("pt_icm")) {
    const auto& s = j.at("pt_icm");
    detail::reject_unknown_keys(s, {"rounds", "beta_min", "temperatures", "replicas"}, "pt_icm");
    read_if(s, "rounds", c.pt_rounds);
    read_if(s, "beta_min", c.pt_beta_min);
    read_if(s, "temperatures", c.pt_temperatures);
    read_if(s, "replicas", c.pt_replicas);
  }
  if (j.contains("walksat")) {
    const auto& s = j.at("walksat");
    detail::reject_unknown_keys(s, {"noise", "max_flips", "lm_w1", "lm_w2"}, "walksat");
    read_if(s, "noise", c.walksat_noise);
    read_if(s, "max_flips", c.walksat_max_flips);
    read_if(s, "lm_w1", c.walksat_lm_w1);
    read_if(s, "lm_w2", c.walksat_lm_w2);
  }
  c.validate();
  return c;
}

/// Fully resolved form, with every default spelled out.
inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["kind"] = kind_name(c.kind);
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["beta"] = c.beta;
  j["fixtures"] = c.fixtures;
  j["fixture_dir"] = c.fixture_dir;
  j["samples"] = c.samples;
  j["anneal"] = {{"time", c.anneal_time}, {"max_dt", c.anneal.max_dt}, {"min_steps", c.anneal.min_steps}};
  j["sweep"] = {{"fixture", c.sweep_fixture},
                {"points", c.sweep_points},
                {"min", c.sweep_min},
                {"max", c.sweep_max},
                {"fair_ratio", c.fair_ratio}};
  j["qaoa"] = {{"depth", c.depth}, {"starts", c.starts}};
  j["made"] = {{"training_samples", c.training_samples},
               {"epochs", c.train.epochs},
               {"batch_size", c.train.batch_size},
               {"learning_rate", c.train.learning_rate},
               {"hidden_sizes", c.train.hidden_sizes},
               {"plateau_epochs", c.train.plateau_epochs},
               {"plateau_tolerance", c.train.plateau_tolerance}};
  j["qe_mcmc"] = {{"gamma_low", c.qe.gamma_low},
                  {"gamma_high", c.qe.gamma_high},
                  {"time_low", c.qe.time_low},
                  {"time_high", c.qe.time_high}};
  j["ksat"] = {{"k", c.k}, {"sizes", c.sizes}, {"per_size", c.per_size}, {"alpha_c", c.resolved_alpha_c()}};
  j["chains"] = {{"steps", c.chain_steps}, {"initial_states", c.initial_states}};
  j["algorithms"] = c.algorithms;
  j["pt_icm"] = {{"rounds", c.resolved_pt_rounds()},
                 {"beta_min", c.pt_beta_min},
                 {"temperatures", c.pt_temperatures},
                 {"replicas", c.pt_replicas}};
  j["walksat"] = {{"noise", c.walksat_noise},
                  {"max_flips", c.walksat_max_flips},
                  {"lm_w1", c.walksat_lm_w1},
                  {"lm_w2", c.walksat_lm_w2}};
  return j;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Small 5-site fixtures

struct MethodHistogram {
  std::string method;
  GroundStateHistogram hist;
  bool exact = false;  // probabilities of an exact distribution, not counts
};

struct FixtureResult {
  std::string name;
  double min_energy = 0.0;
  std::vector<SpinConfig> ground_states;
  std::vector<MethodHistogram> methods;
  double t_qaoa = 0.0;

  const GroundStateHistogram& method(const std::string& m) const {
    for (const auto& h : methods) {
      if (h.method == m) return h.hist;
    }
    throw ContractError("no method " + m);
  }
};

inline IsingModel load_fixture(const ExperimentConfig& cfg, const std::string& name) {
  const auto path = std::filesystem::path(cfg.fixture_dir) / (name + ".json");
  if (!std::filesystem::exists(path)) throw ConfigError("missing fixture " + path.string());
  return load_model(path.string());
}

inline QaoaOptimum<LinearSchedule> optimize_for(const IsingModel& model, const ExperimentConfig& cfg, Rng& rng) {
  return optimize(model, cfg.depth, cfg.starts, rng);
}

/// The small-instance experiments optimize all 2p angles.
inline QaoaOptimum<QaoaParams> optimize_free_for(const IsingModel& model, const ExperimentConfig& cfg, Rng& rng) {
  return optimize_free(model, cfg.depth, cfg.starts, rng);
}

inline TrainConfig train_config_for(const ExperimentConfig& cfg, std::uint64_t seed) {
  auto tc = cfg.train;
  tc.seed = seed;
  return tc;
}

/// QA, QAOA, Qe-MCMC and QAOA-NMC on one fixture at the target temperature.
inline FixtureResult run_fixture(const ExperimentConfig& cfg, const std::string& name, std::uint64_t seed) {
  const auto model = load_fixture(cfg, name);
  const auto gs = ground_states_bruteforce(model);
  FixtureResult out{name, gs.min_energy, gs.states, {}, 0.0};
  const Temperature t(cfg.beta);

  const auto qa = run_annealing(model, AnnealSchedule::linear(cfg.anneal_time), cfg.anneal);
  out.methods.push_back({"qa", histogram(measure_distribution(qa), gs.states), true});

  Rng rng(derive_seed(seed, 1));
  const auto opt = optimize_free_for(model, cfg, rng);
  out.t_qaoa = effective_time(opt.params);
  const auto state = qaoa_state(model, opt.params);
  out.methods.push_back({"qaoa", histogram(measure_distribution(state), gs.states), true});

  ChainOptions co;
  co.steps = cfg.samples;
  co.seed = derive_seed(seed, 2);
  const QeMcmcKernel qe(model, cfg.qe);
  out.methods.push_back({"qe-mcmc", histogram(run_chain(model, t, ChainUpdate::with_kernel(qe), co), gs.states)});

  Rng srng(derive_seed(seed, 3));
  const auto data = sample(state, cfg.training_samples, srng);
  const auto trained = train(data, train_config_for(cfg, derive_seed(seed, 4)));
  const MadeKernel made(trained.net);
  co.seed = derive_seed(seed, 5);
  out.methods.push_back({"qaoa-nmc", histogram(run_chain(model, t, ChainUpdate::with_kernel(made), co), gs.states)});
  return out;
}

inline std::vector<FixtureResult> run_small_instances(const ExperimentConfig& cfg) {
  std::vector<FixtureResult> out(cfg.fixtures.size());
  parallel_for(cfg.fixtures.size(), cfg.threads,
               [&](std::size_t i) { out[i] = run_fixture(cfg, cfg.fixtures[i], derive_seed(cfg.seed, 100, i)); });
  return out;
}

/// Long format: instance,method,bitstring,value,kind (probability or count).
inline void write_fixture_csv(std::ostream& out, std::span<const FixtureResult> results) {
  out.precision(12);
  out << "instance,n_g,method,bitstring,value,normalized,kind\n";
  for (const auto& r : results) {
    for (const auto& m : r.methods) {
      double total = 0.0;
      for (double c : m.hist.counts) total += c;
      for (std::size_t i = 0; i < m.hist.ground_states.size(); ++i) {
        out << r.name << ',' << r.ground_states.size() << ',' << m.method << ','
            << m.hist.ground_states[i].bitstring() << ',' << m.hist.counts[i] << ','
            << (total > 0.0 ? m.hist.counts[i] / total : 0.0) << ',' << (m.exact ? "probability" : "count")
            << '\n';
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Annealing-time sweep

struct SweepPoint {
  double anneal_time = 0.0;
  GroundStateHistogram hist;  // renormalized over the ground manifold
  double ground_mass = 0.0;   // probability of ending in any ground state
  std::optional<double> ratio;
};

struct SweepResult {
  std::string fixture;
  std::vector<SpinConfig> ground_states;
  std::vector<SweepPoint> points;
  double t_qaoa = 0.0;
  QaoaOptimum<QaoaParams> qaoa;
  /// Largest grid time up to which every point has ratio < fair_ratio.
  double fair_limit = 0.0;
};

inline std::vector<double> log_grid(double lo, double hi, std::size_t count) {
  if (count < 2 || !(lo > 0.0) || !(hi > lo)) throw ContractError("log grid needs count >= 2 and 0 < lo < hi");
  std::vector<double> g(count);
  const double step = std::log(hi / lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) g[i] = lo * std::exp(step * static_cast<double>(i));
  g.front() = lo;
  g.back() = hi;
  return g;
}

inline SweepResult run_anneal_sweep(const ExperimentConfig& cfg) {
  const auto model = load_fixture(cfg, cfg.sweep_fixture);
  const auto gs = ground_states_bruteforce(model);
  SweepResult out;
  out.fixture = cfg.sweep_fixture;
  out.ground_states = gs.states;
  const auto grid = log_grid(cfg.sweep_min, cfg.sweep_max, cfg.sweep_points);
  out.points.resize(grid.size());
  parallel_for(grid.size(), cfg.threads, [&](std::size_t i) {
    const auto dist = measure_distribution(run_annealing(model, AnnealSchedule::linear(grid[i]), cfg.anneal));
    auto& p = out.points[i];
    p.anneal_time = grid[i];
    p.hist = histogram(dist, gs.states);
    for (const auto& g : gs.states) p.ground_mass += dist[g];
    p.ratio = fairness(p.hist).ratio;
  });
  for (const auto& p : out.points) {
    if (!p.ratio || *p.ratio >= cfg.fair_ratio) break;
    out.fair_limit = p.anneal_time;
  }
  Rng rng(derive_seed(cfg.seed, 200));
  out.qaoa = optimize_free_for(model, cfg, rng);
  out.t_qaoa = effective_time(out.qaoa.params);
  return out;
}

inline void write_sweep_csv(std::ostream& out, const SweepResult& r) {
  out.precision(12);
  out << "anneal_time,bitstring,probability,ground_mass,ratio\n";
  for (const auto& p : r.points) {
    for (std::size_t i = 0; i < r.ground_states.size(); ++i) {
      out << p.anneal_time << ',' << r.ground_states[i].bitstring() << ',' << p.hist.counts[i] << ','
          << p.ground_mass << ',';
      if (p.ratio) out << *p.ratio;
      out << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// k-SAT pipeline stages

struct RunPaths {
  std::filesystem::path root;

  std::filesystem::path config() const { return root / "config.json"; }
  std::filesystem::path instances() const { return root / "instances"; }
  std::filesystem::path degeneracy() const { return root / "instances" / "degeneracy.csv"; }
  std::filesystem::path schedules() const { return root / "qaoa" / "schedules.json"; }
  std::filesystem::path nets() const { return root / "made"; }
  std::filesystem::path net(std::size_t instance, bool fixed) const {
    return nets() / ("net_" + std::to_string(instance) + (fixed ? "_fixed" : "") + ".json");
  }
  std::filesystem::path made_rows() const { return root / "made" / "rows.csv"; }
  std::filesystem::path chain_rows() const { return root / "chains" / "rows.csv"; }
  std::filesystem::path baseline_rows() const { return root / "baselines" / "rows.csv"; }
  std::filesystem::path metrics() const { return root / "metrics"; }
};

inline void require_stage(const std::filesystem::path& file, const char* stage) {
  if (!std::filesystem::exists(file)) {
    throw StageError("missing " + file.string() + "; run the '" + stage + "' stage first");
  }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path.string());
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

/// Instance sets for every configured size; draws for size n are seeded
/// independently of the other sizes.
inline InstanceSet build_instances(const ExperimentConfig& cfg) {
  InstanceSet set{cfg.k, cfg.resolved_alpha_c(), cfg.seed, {}};
  for (auto n : cfg.sizes) {
    auto part = build_instance_set(n, n, cfg.k, cfg.per_size, set.alpha_c, cfg.seed);
    for (auto& e : part.entries) set.entries.push_back(std::move(e));
  }
  return set;
}

inline void write_degeneracy_csv(std::ostream& out, const InstanceSet& set) {
  out << "k,n,instance,n_g,clauses,seed\n";
  for (std::size_t i = 0; i < set.entries.size(); ++i) {
    const auto& e = set.entries[i];
    out << set.k << ',' << e.formula.n_vars() << ',' << i << ',' << e.solutions.size() << ','
        << e.formula.n_clauses() << ',' << e.seed << '\n';
  }
}

struct InstanceSchedule {
  LinearSchedule schedule;
  double expectation = 0.0;
};

struct ScheduleSet {
  std::vector<InstanceSchedule> per_instance;
  FixedAngles fixed;
  std::size_t depth = 0;
};

inline ScheduleSet optimize_schedules(const ExperimentConfig& cfg, const InstanceSet& set) {
  ScheduleSet out;
  out.depth = cfg.depth;
  out.per_instance.resize(set.entries.size());
  parallel_for(set.entries.size(), cfg.threads, [&](std::size_t i) {
    const auto model = to_ising(set.entries[i].formula);
    Rng rng(derive_seed(cfg.seed, 300, i));
    const auto opt = optimize_for(model, cfg, rng);
    out.per_instance[i] = {opt.params, opt.expectation};
  });
  std::vector<LinearSchedule> all;
  for (const auto& s : out.per_instance) all.push_back(s.schedule);
  out.fixed = fixed_angles_from_set(all);
  return out;
}

inline nlohmann::json schedules_to_json(const ScheduleSet& s) {
  auto arr = nlohmann::json::array();
  for (const auto& e : s.per_instance) arr.push_back(schedule_to_json(e.schedule, e.expectation, s.depth));
  return {{"depth", s.depth}, {"instances", arr}, {"fixed", schedule_to_json(s.fixed.schedule, 0.0, s.depth)}};
}

inline ScheduleSet schedules_from_json(const nlohmann::json& j) {
  try {
    ScheduleSet s;
    s.depth = j.at("depth").get<std::size_t>();
    for (const auto& e : j.at("instances")) {
      s.per_instance.push_back({schedule_from_json(e), e.at("expectation").get<double>()});
    }
    s.fixed.schedule = schedule_from_json(j.at("fixed"));
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed schedules: ") + e.what());
  }
}

/// One fairness row from a histogram.
inline ResultRow fairness_row(const ExperimentConfig& cfg, const InstanceEntry& e, std::size_t instance,
                              const std::string& algorithm, std::uint64_t seed, const GroundStateHistogram& h) {
  const auto f = fairness(h);
  ResultRow r;
  r.k = cfg.k;
  r.n = e.formula.n_vars();
  r.algorithm = algorithm;
  r.instance = instance;
  r.trial = 0;
  r.seed = seed;
  r.n_g = e.solutions.size();
  r.ratio = f.ratio;
  r.all_found = f.all_found;
  r.tvd = f.tvd_to_uniform;
  return r;
}

inline ResultRow counting_row(const ExperimentConfig& cfg, const InstanceEntry& e, std::size_t instance,
                              const std::string& algorithm, std::size_t trial, std::uint64_t seed,
                              std::optional<std::uint64_t> steps) {
  ResultRow r;
  r.k = cfg.k;
  r.n = e.formula.n_vars();
  r.algorithm = algorithm;
  r.instance = instance;
  r.trial = trial;
  r.seed = seed;
  r.n_g = e.solutions.size();
  r.all_found = steps.has_value();
  if (steps) r.steps = static_cast<double>(*steps);
  return r;
}

struct TrainedNets {
  std::vector<std::optional<MadeNetwork>> optimized;
  std::vector<std::optional<MadeNetwork>> fixed;
};

/// Samples the optimized and fixed-angle circuits, trains one MADE per
/// source and emits the sample-based fairness rows (trial 0).
inline std::vector<ResultRow> train_nets(const ExperimentConfig& cfg, const InstanceSet& set,
                                         const ScheduleSet& schedules, TrainedNets& nets) {
  if (schedules.per_instance.size() != set.entries.size()) {
    throw StageError("schedules do not match the instance set; rerun 'optimize-qaoa'");
  }
  const std::size_t count = set.entries.size();
  nets.optimized.assign(count, std::nullopt);
  nets.fixed.assign(count, std::nullopt);
  std::vector<std::vector<ResultRow>> rows(count);
  const bool want_fixed = cfg.wants("qaoa-fixed") || cfg.wants("made-fixed") || cfg.wants("qaoa-nmc-fixed") ||
                          cfg.wants("qaoa-hmc-fixed");
  parallel_for(count, cfg.threads, [&](std::size_t i) {
    const auto& e = set.entries[i];
    const auto model = to_ising(e.formula);
    for (int fixed = 0; fixed < 2; ++fixed) {
      if (fixed && !want_fixed) continue;
      const auto& sched = fixed ? schedules.fixed.schedule : schedules.per_instance[i].schedule;
      const auto state = qaoa_state(model, expand(sched, schedules.depth));
      const std::uint64_t seed = derive_seed(cfg.seed, 400 + fixed, i);
      Rng rng(seed);
      const auto data = sample(state, cfg.training_samples, rng);
      const std::string suffix = fixed ? "-fixed" : "";
      if (cfg.wants("qaoa" + suffix)) {
        rows[i].push_back(fairness_row(cfg, e, i, "qaoa" + suffix, seed, histogram(data, e.solutions)));
      }
      auto trained = train(data, train_config_for(cfg, derive_seed(seed, 1)));
      if (cfg.wants("made" + suffix)) {
        Rng mrng(derive_seed(seed, 2));
        std::vector<SpinConfig> drawn;
        for (std::size_t s = 0; s < cfg.training_samples; ++s) drawn.push_back(trained.net.sample(mrng));
        rows[i].push_back(fairness_row(cfg, e, i, "made" + suffix, seed, histogram(drawn, e.solutions)));
      }
      (fixed ? nets.fixed : nets.optimized)[i].emplace(std::move(trained.net));
    }
  });
  std::vector<ResultRow> out;
  for (auto& r : rows) out.insert(out.end(), r.begin(), r.end());
  return out;
}

struct StageRows {
  std::vector<ResultRow> fairness;  // trial 0, pooled over initial states
  std::vector<ResultRow> counting;  // one per initial state / run, trial >= 1
};

inline std::vector<ResultRow> concat(StageRows rows) {
  auto out = std::move(rows.fairness);
  out.insert(out.end(), rows.counting.begin(), rows.counting.end());
  return out;
}

/// Chains from `initial_states` random starts of `chain_steps` composite
/// steps each. The fairness row pools the recorded states of all chains;
/// each chain gives one counting row in elementary transitions.
inline std::vector<ResultRow> run_chains(const ExperimentConfig& cfg, const InstanceSet& set,
                                         const TrainedNets& nets) {
  const std::size_t count = set.entries.size();
  std::vector<std::vector<ResultRow>> fair(count), counting(count);
  parallel_for(count, cfg.threads, [&](std::size_t i) {
    const auto& e = set.entries[i];
    const auto model = to_ising(e.formula);
    const Temperature t(cfg.beta);
    std::optional<MadeKernel> opt_kernel, fixed_kernel;
    if (i < nets.optimized.size() && nets.optimized[i]) opt_kernel.emplace(*nets.optimized[i]);
    if (i < nets.fixed.size() && nets.fixed[i]) fixed_kernel.emplace(*nets.fixed[i]);
    std::optional<QeMcmcKernel> qe;
    if (cfg.wants("qe-mcmc")) qe.emplace(model, cfg.qe);

    std::uint64_t algo_index = 0;
    auto run = [&](const std::string& name, const ChainUpdate& update) {
      const std::uint64_t seed = derive_seed(cfg.seed, 500 + algo_index++, i);
      auto pooled = histogram(std::span<const SpinConfig>{}, e.solutions);
      for (std::size_t trial = 0; trial < cfg.initial_states; ++trial) {
        ChainOptions co;
        co.steps = cfg.chain_steps;
        co.seed = derive_seed(seed, trial);
        const auto trace = run_chain(model, t, update, co);
        const auto h = histogram(trace, e.solutions);
        for (std::size_t g = 0; g < h.counts.size(); ++g) pooled.counts[g] += h.counts[g];
        pooled.total += h.total;
        counting[i].push_back(counting_row(cfg, e, i, name, trial + 1, co.seed,
                                           steps_to_enumerate(trace, e.solutions, Accounting::kTransitions)));
      }
      fair[i].push_back(fairness_row(cfg, e, i, name, seed, pooled));
    };
    auto need = [&](const std::optional<MadeKernel>& k, const char* name) -> const MadeKernel& {
      if (!k) throw StageError(std::string("no trained network for '") + name + "'; rerun 'train-made'");
      return *k;
    };
    if (cfg.wants("qaoa-nmc")) run("qaoa-nmc", ChainUpdate::with_kernel(need(opt_kernel, "qaoa-nmc")));
    if (cfg.wants("qaoa-hmc")) run("qaoa-hmc", ChainUpdate::hybrid(need(opt_kernel, "qaoa-hmc")));
    if (cfg.wants("qaoa-nmc-fixed")) {
      run("qaoa-nmc-fixed", ChainUpdate::with_kernel(need(fixed_kernel, "qaoa-nmc-fixed")));
    }
    if (cfg.wants("qaoa-hmc-fixed")) run("qaoa-hmc-fixed", ChainUpdate::hybrid(need(fixed_kernel, "qaoa-hmc-fixed")));
    if (cfg.wants("qe-mcmc")) run("qe-mcmc", ChainUpdate::with_kernel(*qe));
    if (cfg.wants("ssf")) run("ssf", ChainUpdate::ssf());
  });
  std::vector<ResultRow> out;
  for (auto& r : fair) out.insert(out.end(), r.begin(), r.end());
  for (auto& r : counting) out.insert(out.end(), r.begin(), r.end());
  return out;
}

inline PtIcmConfig pt_config_for(const ExperimentConfig& cfg, std::uint64_t seed) {
  PtIcmConfig pc;
  pc.betas = PtIcmConfig::geometric_ladder(cfg.pt_beta_min, cfg.beta, cfg.pt_temperatures);
  pc.replicas_per_temperature = cfg.pt_replicas;
  pc.seed = seed;
  return pc;
}

inline WalkSatConfig walksat_config_for(const ExperimentConfig& cfg, WalkSatVariant variant, std::uint64_t seed) {
  WalkSatConfig wc;
  wc.noise = cfg.walksat_noise;
  wc.max_flips = cfg.walksat_max_flips;
  wc.variant = variant;
  wc.lm_w1 = cfg.walksat_lm_w1;
  wc.lm_w2 = cfg.walksat_lm_w2;
  wc.seed = seed;
  return wc;
}

/// PT-ICM (fairness of the coldest traced replica plus one counting row)
/// and WalkSAT enumeration (`initial_states` independent runs).
inline std::vector<ResultRow> run_baselines(const ExperimentConfig& cfg, const InstanceSet& set) {
  const std::size_t count = set.entries.size();
  std::vector<std::vector<ResultRow>> fair(count), counting(count);
  parallel_for(count, cfg.threads, [&](std::size_t i) {
    const auto& e = set.entries[i];
    if (cfg.wants("pt-icm")) {
      const auto model = to_ising(e.formula);
      const std::uint64_t seed = derive_seed(cfg.seed, 600, i);
      const auto pt = pt_icm_run(model, pt_config_for(cfg, seed), cfg.resolved_pt_rounds());
      fair[i].push_back(fairness_row(cfg, e, i, "pt-icm", seed, histogram(pt.trace, e.solutions)));
      counting[i].push_back(counting_row(cfg, e, i, "pt-icm", 1, seed,
                                         steps_to_enumerate(pt.trace, e.solutions, Accounting::kTransitions)));
    }
    for (auto [name, variant, tag] : {std::tuple{"walksat", WalkSatVariant::kPlain, 601},
                                      std::tuple{"walksatlm", WalkSatVariant::kLm, 602}}) {
      if (!cfg.wants(name)) continue;
      for (std::size_t trial = 0; trial < cfg.initial_states; ++trial) {
        const std::uint64_t seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(tag), i * 1000 + trial);
        const auto r = walksat_enumerate(e.formula, walksat_config_for(cfg, variant, seed));
        std::optional<std::uint64_t> steps;
        if (r.complete) steps = r.flips_at_discovery.empty() ? 0 : r.flips_at_discovery.back();
        counting[i].push_back(counting_row(cfg, e, i, name, trial + 1, seed, steps));
      }
    }
  });
  std::vector<ResultRow> out;
  for (auto& r : fair) out.insert(out.end(), r.begin(), r.end());
  for (auto& r : counting) out.insert(out.end(), r.begin(), r.end());
  return out;
}

/// Inverse of write_rows_csv.
inline std::vector<ResultRow> read_rows_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "k,n,algorithm,instance,trial,seed,n_g,ratio,all_found,tvd,steps") {
    throw FormatError("unexpected result-row header");
  }
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 11) throw FormatError("result row needs 11 fields: " + line);
    try {
      ResultRow r;
      r.k = std::stoul(f[0]);
      r.n = std::stoul(f[1]);
      r.algorithm = f[2];
      r.instance = std::stoul(f[3]);
      r.trial = std::stoul(f[4]);
      r.seed = std::stoull(f[5]);
      r.n_g = std::stoul(f[6]);
      if (!f[7].empty()) r.ratio = std::stod(f[7]);
      r.all_found = f[8] == "1";
      if (!f[9].empty()) r.tvd = std::stod(f[9]);
      if (!f[10].empty()) r.steps = std::stod(f[10]);
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw FormatError("malformed result row: " + line);
    }
  }
  return rows;
}

inline std::string rows_to_csv(std::span<const ResultRow> rows) {
  std::ostringstream out;
  write_rows_csv(out, rows);
  return out.str();
}

inline std::vector<ResultRow> load_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path.string());
  return read_rows_csv(in);
}

struct MetricsTables {
  std::vector<GroupSummary> fairness;
  std::vector<GroupSummary> counting;
  /// (algorithm, reference, k, n) -> comparison over instances of that size
  std::vector<std::tuple<std::string, std::string, std::size_t, std::size_t, Superiority>> superiority;
};

/// Fairness rows are trial 0; counting rows are trial >= 1.
inline MetricsTables compute_metrics(std::span<const ResultRow> rows, const std::string& reference = "walksatlm") {
  MetricsTables t;
  std::vector<ResultRow> fair, counting;
  for (const auto& r : rows) (r.trial == 0 ? fair : counting).push_back(r);
  if (!fair.empty()) t.fairness = aggregate(fair);
  if (!counting.empty()) {
    t.counting = aggregate(counting);
    std::set<std::string> algos;
    std::set<std::pair<std::size_t, std::size_t>> sizes;
    for (const auto& r : counting) {
      algos.insert(r.algorithm);
      sizes.insert({r.k, r.n});
    }
    if (algos.count(reference)) {
      for (const auto& a : algos) {
        if (a == reference) continue;
        for (const auto& [k, n] : sizes) {
          std::vector<ResultRow> subset;
          for (const auto& r : counting) {
            if (r.k == k && r.n == n) subset.push_back(r);
          }
          t.superiority.emplace_back(a, reference, k, n, superiority(subset, a, reference));
        }
      }
    }
  }
  return t;
}

inline void write_superiority_csv(std::ostream& out, const MetricsTables& t) {
  out << "algorithm,reference,k,n,compared,wins,losses,ties,win_fraction\n";
  for (const auto& [a, b, k, n, s] : t.superiority) {
    out << a << ',' << b << ',' << k << ',' << n << ',' << s.compared << ',' << s.a_wins << ',' << s.b_wins << ','
        << s.ties << ',';
    if (s.compared > 0) out << static_cast<double>(s.a_wins) / static_cast<double>(s.compared);
    out << '\n';
  }
}

}  // namespace fairsample

#endif  // FAIRSAMPLE_EXPERIMENT_HPP
