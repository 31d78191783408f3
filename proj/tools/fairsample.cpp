// Command-line driver: pipeline stages over a run directory plus figure
// presets that run a whole pipeline.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fairsample/fairsample.hpp"
#include "fairsample/validation.hpp"

namespace fs = std::filesystem;
using namespace fairsample;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::string out;
};

ExperimentConfig apply_overrides(ExperimentConfig cfg, const Globals& g) {
  if (g.seed) cfg.seed = *g.seed;
  if (g.threads) cfg.threads = *g.threads;
  if (cfg.fixture_dir.empty()) cfg.fixture_dir = std::string(FAIRSAMPLE_DATA_DIR) + "/fixtures";
  cfg.validate();
  return cfg;
}

/// Everything except the thread count, which never changes results.
nlohmann::json result_relevant(const ExperimentConfig& cfg) {
  auto j = config_to_json(cfg);
  j.erase("threads");
  return j;
}

class RunDir {
 public:
  explicit RunDir(fs::path root) : paths_{std::move(root)} {}

  const RunPaths& paths() const { return paths_; }

  /// Stores the resolved config, or checks it against a stored one.
  void bind(const ExperimentConfig& cfg) {
    if (fs::exists(paths_.config())) {
      const auto stored = apply_overrides(config_from_json(read_json(paths_.config())), {});
      if (result_relevant(stored) != result_relevant(cfg)) {
        throw ConfigError("run directory " + paths_.root.string() +
                          " holds a different config; use a fresh --out directory");
      }
    }
    write_text(paths_.config(), config_to_json(cfg).dump(2) + "\n");
  }

  /// Config of an existing run; --config and --seed must agree with it.
  ExperimentConfig stored(const Globals& g) const {
    require_stage(paths_.config(), "gen-instances");
    auto cfg = apply_overrides(config_from_json(read_json(paths_.config())), {});
    if (!g.config.empty()) {
      const auto given = apply_overrides(load_config(g.config), g);
      if (result_relevant(given) != result_relevant(cfg)) {
        throw ConfigError("--config differs from the run's stored config.json");
      }
    }
    if (g.seed && *g.seed != cfg.seed) throw ConfigError("--seed differs from the run's stored seed");
    if (g.threads) cfg.threads = *g.threads;
    return cfg;
  }

  /// Appends a stage record to run.json (timings live only here, so CSV
  /// outputs stay byte-identical across reruns).
  void record(const ExperimentConfig& cfg, const std::string& stage, double seconds) const {
    nlohmann::json run;
    const auto path = paths_.root / "run.json";
    if (fs::exists(path)) run = read_json(path);
    run["version"] = kVersion;
    run["git"] = FAIRSAMPLE_GIT_REV;
    run["seed"] = cfg.seed;
    run["seed_derivation"] = "splitmix64 derive_seed(seed, stage_tag, instance[, trial])";
    run["threads"] = cfg.threads;
    run["stages"][stage] = {{"seconds", seconds}};
    write_text(path, run.dump(2) + "\n");
  }

 private:
  RunPaths paths_;
};

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void require_ksat(const ExperimentConfig& cfg) {
  if (cfg.kind != ExperimentKind::kKsatFairness && cfg.kind != ExperimentKind::kKsatCounting) {
    throw ConfigError(std::string("this stage needs a k-SAT config, got kind ") + kind_name(cfg.kind));
  }
}

// ---------------------------------------------------------------------------
// Stages

void stage_gen_instances(const ExperimentConfig& cfg, const RunDir& run) {
  Timer timer;
  const auto set = build_instances(cfg);
  save_instance_set(set, run.paths().instances());
  std::ostringstream csv;
  write_degeneracy_csv(csv, set);
  write_text(run.paths().degeneracy(), csv.str());
  run.record(cfg, "gen-instances", timer.seconds());
  std::cout << "instances: " << set.entries.size() << " -> " << run.paths().instances().string() << '\n';
}

InstanceSet load_instances(const RunDir& run) {
  require_stage(run.paths().instances() / "manifest.json", "gen-instances");
  return load_instance_set(run.paths().instances());
}

void stage_optimize(const ExperimentConfig& cfg, const RunDir& run) {
  Timer timer;
  const auto set = load_instances(run);
  const auto schedules = optimize_schedules(cfg, set);
  write_text(run.paths().schedules(), schedules_to_json(schedules).dump(1) + "\n");
  run.record(cfg, "optimize-qaoa", timer.seconds());
  std::cout << "schedules: " << schedules.per_instance.size() << " -> " << run.paths().schedules().string() << '\n';
}

void stage_train(const ExperimentConfig& cfg, const RunDir& run) {
  Timer timer;
  const auto set = load_instances(run);
  require_stage(run.paths().schedules(), "optimize-qaoa");
  const auto schedules = schedules_from_json(read_json(run.paths().schedules()));
  TrainedNets nets;
  const auto rows = train_nets(cfg, set, schedules, nets);
  for (std::size_t i = 0; i < set.entries.size(); ++i) {
    if (nets.optimized[i]) write_text(run.paths().net(i, false), to_checkpoint(*nets.optimized[i]).dump() + "\n");
    if (nets.fixed[i]) write_text(run.paths().net(i, true), to_checkpoint(*nets.fixed[i]).dump() + "\n");
  }
  write_text(run.paths().made_rows(), rows_to_csv(rows));
  run.record(cfg, "train-made", timer.seconds());
  std::cout << "networks -> " << run.paths().nets().string() << '\n';
}

TrainedNets load_nets(const ExperimentConfig& cfg, const RunDir& run, std::size_t count) {
  TrainedNets nets;
  nets.optimized.assign(count, std::nullopt);
  nets.fixed.assign(count, std::nullopt);
  const bool need_opt = cfg.wants("qaoa-nmc") || cfg.wants("qaoa-hmc");
  const bool need_fixed = cfg.wants("qaoa-nmc-fixed") || cfg.wants("qaoa-hmc-fixed");
  for (std::size_t i = 0; i < count; ++i) {
    if (need_opt) {
      require_stage(run.paths().net(i, false), "train-made");
      nets.optimized[i] = from_checkpoint(read_json(run.paths().net(i, false)));
    }
    if (need_fixed) {
      require_stage(run.paths().net(i, true), "train-made");
      nets.fixed[i] = from_checkpoint(read_json(run.paths().net(i, true)));
    }
  }
  return nets;
}

void stage_chains(const ExperimentConfig& cfg, const RunDir& run) {
  Timer timer;
  const auto set = load_instances(run);
  const auto nets = load_nets(cfg, run, set.entries.size());
  const auto rows = run_chains(cfg, set, nets);
  write_text(run.paths().chain_rows(), rows_to_csv(rows));
  run.record(cfg, "run-chains", timer.seconds());
  std::cout << "chain rows: " << rows.size() << " -> " << run.paths().chain_rows().string() << '\n';
}

void stage_baselines(const ExperimentConfig& cfg, const RunDir& run) {
  Timer timer;
  const auto set = load_instances(run);
  const auto rows = run_baselines(cfg, set);
  write_text(run.paths().baseline_rows(), rows_to_csv(rows));
  run.record(cfg, "run-baselines", timer.seconds());
  std::cout << "baseline rows: " << rows.size() << " -> " << run.paths().baseline_rows().string() << '\n';
}

std::vector<ResultRow> collect_rows(const RunDir& run) {
  std::vector<ResultRow> rows;
  bool any = false;
  for (const auto& p : {run.paths().made_rows(), run.paths().chain_rows(), run.paths().baseline_rows()}) {
    if (!fs::exists(p)) continue;
    any = true;
    auto part = load_rows(p);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  if (!any) throw StageError("no result rows; run 'train-made', 'run-chains' or 'run-baselines' first");
  return rows;
}

void print_summary(std::ostream& out, const std::vector<GroupSummary>& groups, bool counting) {
  for (const auto& g : groups) {
    out << "  k=" << g.key.k << " n=" << g.key.n << ' ' << g.key.algorithm << ": all_found " << g.all_found << '/'
        << g.rows;
    if (!counting && g.ratio) out << ", median ratio " << g.ratio->median;
    if (counting && g.steps) out << ", median steps " << g.steps->median;
    out << '\n';
  }
}

MetricsTables stage_metrics(const ExperimentConfig& cfg, const RunDir& run) {
  Timer timer;
  const auto rows = collect_rows(run);
  const auto tables = compute_metrics(rows);
  const auto dir = run.paths().metrics();
  write_text(dir / "rows.csv", rows_to_csv(rows));
  std::ostringstream fair, count, sup;
  write_summary_csv(fair, tables.fairness);
  write_summary_csv(count, tables.counting);
  write_superiority_csv(sup, tables);
  write_text(dir / "fairness_summary.csv", fair.str());
  write_text(dir / "counting_summary.csv", count.str());
  write_text(dir / "superiority.csv", sup.str());
  run.record(cfg, "metrics", timer.seconds());
  if (!tables.fairness.empty()) {
    std::cout << "fairness:\n";
    print_summary(std::cout, tables.fairness, false);
  }
  if (!tables.counting.empty()) {
    std::cout << "counting:\n";
    print_summary(std::cout, tables.counting, true);
  }
  return tables;
}

// ---------------------------------------------------------------------------
// Figure presets

ExperimentConfig preset_config(const Globals& g, const std::string& figure) {
  const fs::path path = g.config.empty() ? fs::path(FAIRSAMPLE_CONFIG_DIR) / (figure + ".json") : fs::path(g.config);
  return apply_overrides(load_config(path), g);
}

fs::path out_dir(const Globals& g, const std::string& figure) {
  return g.out.empty() ? fs::path("runs") / figure : fs::path(g.out);
}

void expect_kind(const ExperimentConfig& cfg, ExperimentKind kind, const std::string& figure) {
  if (cfg.kind != kind) {
    throw ConfigError(figure + " needs kind " + kind_name(kind) + ", got " + kind_name(cfg.kind));
  }
}

void run_fig1(const Globals& g) {
  const auto cfg = preset_config(g, "fig1");
  expect_kind(cfg, ExperimentKind::kSmallInstances, "fig1");
  RunDir run(out_dir(g, "fig1"));
  run.bind(cfg);
  Timer timer;
  const auto results = run_small_instances(cfg);
  std::ostringstream csv;
  write_fixture_csv(csv, results);
  write_text(run.paths().root / "fig1.csv", csv.str());
  run.record(cfg, "fig1", timer.seconds());
  for (const auto& r : results) {
    std::cout << r.name << " (N_g=" << r.ground_states.size() << ", T_QAOA=" << r.t_qaoa << ")\n";
    for (const auto& m : r.methods) {
      const auto f = fairness(m.hist);
      double lo = 1.0;
      double total = 0.0;
      for (double c : m.hist.counts) total += c;
      for (double c : m.hist.counts) lo = std::min(lo, total > 0.0 ? c / total : 0.0);
      std::cout << "  " << m.method << ": all_found=" << f.all_found << " p_min*N_g=" << lo * f.n_g
                << " ratio=" << (f.ratio ? std::to_string(*f.ratio) : "inf") << '\n';
    }
  }
}

void run_fig2(const Globals& g) {
  const auto cfg = preset_config(g, "fig2");
  expect_kind(cfg, ExperimentKind::kAnnealSweep, "fig2");
  RunDir run(out_dir(g, "fig2"));
  run.bind(cfg);
  Timer timer;
  const auto r = run_anneal_sweep(cfg);
  std::ostringstream csv;
  write_sweep_csv(csv, r);
  write_text(run.paths().root / "fig2.csv", csv.str());
  nlohmann::json marker = {{"fixture", r.fixture},
                           {"t_qaoa", r.t_qaoa},
                           {"fair_limit", r.fair_limit},
                           {"qaoa", {{"params", params_to_json(r.qaoa.params)}, {"expectation", r.qaoa.expectation}}}};
  write_text(run.paths().root / "fig2_marker.json", marker.dump(2) + "\n");
  run.record(cfg, "fig2", timer.seconds());
  for (const auto& p : r.points) {
    std::cout << "T_a=" << p.anneal_time << " ratio=" << (p.ratio ? std::to_string(*p.ratio) : "inf") << '\n';
  }
  std::cout << "T_QAOA=" << r.t_qaoa << " fair up to T_a=" << r.fair_limit << '\n';
}

/// N_g versus N for both clause widths.
void run_fig3(const Globals& g) {
  const auto base = preset_config(g, "fig3");
  require_ksat(base);
  if (base.alpha_c) throw ConfigError("fig3 covers k = 2 and 3 at their default alpha_c; leave alpha_c unset");
  const auto root = out_dir(g, "fig3");
  std::ostringstream all;
  all << "k,n,instance,n_g,clauses,seed\n";
  for (std::size_t k : {2, 3}) {
    auto cfg = base;
    cfg.k = k;
    cfg.algorithms.clear();
    RunDir run(root / ("k" + std::to_string(k)));
    run.bind(cfg);
    stage_gen_instances(cfg, run);
    std::ifstream in(run.paths().degeneracy());
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) all << line << '\n';
  }
  write_text(root / "fig3.csv", all.str());
}

/// Full k-SAT pipeline, skipping stages whose outputs already exist.
void run_ksat_figure(const Globals& g, const std::string& figure) {
  const auto cfg = preset_config(g, figure);
  require_ksat(cfg);
  RunDir run(out_dir(g, figure));
  run.bind(cfg);
  const auto& p = run.paths();
  if (!fs::exists(p.instances() / "manifest.json")) stage_gen_instances(cfg, run);
  const bool needs_qaoa = cfg.wants("qaoa") || cfg.wants("qaoa-fixed") || cfg.wants("made") ||
                          cfg.wants("made-fixed") || cfg.wants("qaoa-nmc") || cfg.wants("qaoa-hmc") ||
                          cfg.wants("qaoa-nmc-fixed") || cfg.wants("qaoa-hmc-fixed");
  if (needs_qaoa) {
    if (!fs::exists(p.schedules())) stage_optimize(cfg, run);
    if (!fs::exists(p.made_rows())) stage_train(cfg, run);
  }
  const bool needs_chains = cfg.wants("qaoa-nmc") || cfg.wants("qaoa-hmc") || cfg.wants("qaoa-nmc-fixed") ||
                            cfg.wants("qaoa-hmc-fixed") || cfg.wants("qe-mcmc") || cfg.wants("ssf");
  if (needs_chains && !fs::exists(p.chain_rows())) stage_chains(cfg, run);
  const bool needs_baselines = cfg.wants("pt-icm") || cfg.wants("walksat") || cfg.wants("walksatlm");
  if (needs_baselines && !fs::exists(p.baseline_rows())) stage_baselines(cfg, run);
  stage_metrics(cfg, run);
  fs::copy_file(p.metrics() / "rows.csv", p.root / (figure + ".csv"), fs::copy_options::overwrite_existing);
}

int run_validate() {
  Timer timer;
  auto checks = oracle_suite(1);
  checks.push_back(made_mask_negative_control(1));
  std::cout << "status,check,value,limit\n";
  bool ok = true;
  for (const auto& c : checks) {
    std::cout << (c.passed ? "PASS" : "FAIL") << ",\"" << c.name << "\"," << c.value << ',' << c.limit << '\n';
    ok = ok && c.passed;
  }
  std::cerr << checks.size() << " checks in " << timer.seconds() << " s\n";
  return ok ? kExitOk : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fair sampling of degenerate ground states: samplers, baselines and figure pipelines"};
  app.set_version_flag("--version", std::string(kVersion) + " (" + FAIRSAMPLE_GIT_REV + ")");
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  app.add_option("--config", g.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "Base seed");
  auto* threads_opt = app.add_option("--threads", threads, "Worker threads (1 is bit-reproducible)")
                          ->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "Run directory");
  app.fallthrough();

  auto* validate = app.add_subcommand("validate", "Run the exact-oracle suite");
  std::vector<std::pair<CLI::App*, std::string>> stages;
  for (const auto& [name, help] : std::vector<std::pair<std::string, std::string>>{
           {"gen-instances", "Generate and filter random k-SAT instances"},
           {"optimize-qaoa", "Optimize linear QAOA schedules and derive fixed angles"},
           {"train-made", "Sample QAOA circuits and train MADE networks"},
           {"run-chains", "Run the configured MCMC samplers"},
           {"run-baselines", "Run PT-ICM and WalkSAT baselines"},
           {"metrics", "Aggregate result rows into summary tables"}}) {
    stages.emplace_back(app.add_subcommand(name, help), name);
  }
  std::vector<std::pair<CLI::App*, std::string>> figures;
  for (int f = 1; f <= 7; ++f) {
    const auto name = "fig" + std::to_string(f);
    figures.emplace_back(app.add_subcommand(name, "Run the " + name + " preset pipeline"), name);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  if (*seed_opt) g.seed = seed;
  if (*threads_opt) g.threads = threads;

  try {
    if (*validate) return run_validate();
    for (const auto& [cmd, name] : stages) {
      if (!*cmd) continue;
      if (g.out.empty()) throw ConfigError(name + " needs --out <run directory>");
      RunDir run{fs::path(g.out)};
      ExperimentConfig cfg;
      if (name == "gen-instances") {
        cfg = apply_overrides(g.config.empty() ? ExperimentConfig{} : load_config(g.config), g);
        require_ksat(cfg);
        run.bind(cfg);
        stage_gen_instances(cfg, run);
        return kExitOk;
      }
      cfg = run.stored(g);
      require_ksat(cfg);
      if (name == "optimize-qaoa") stage_optimize(cfg, run);
      if (name == "train-made") stage_train(cfg, run);
      if (name == "run-chains") stage_chains(cfg, run);
      if (name == "run-baselines") stage_baselines(cfg, run);
      if (name == "metrics") stage_metrics(cfg, run);
      return kExitOk;
    }
    for (const auto& [cmd, name] : figures) {
      if (!*cmd) continue;
      if (name == "fig1") run_fig1(g);
      if (name == "fig2") run_fig2(g);
      if (name == "fig3") run_fig3(g);
      if (name == "fig4" || name == "fig5" || name == "fig6" || name == "fig7") run_ksat_figure(g, name);
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}
