#ifndef FAIRSAMPLE_METRICS_HPP
#define FAIRSAMPLE_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "fairsample/error.hpp"
#include "fairsample/mcmc.hpp"
#include "fairsample/qsim.hpp"
#include "fairsample/spin_config.hpp"

namespace fairsample {

/// Counts (or probability mass) on each ground state. For exact
/// distributions the bins are renormalized over the ground manifold.
struct GroundStateHistogram {
  std::vector<SpinConfig> ground_states;
  std::vector<double> counts;
  double total = 0.0;
};

namespace detail {

inline GroundStateHistogram empty_histogram(std::span<const SpinConfig> ground_states) {
  if (ground_states.empty()) throw ContractError("histogram needs at least one ground state");
  GroundStateHistogram h;
  h.ground_states.assign(ground_states.begin(), ground_states.end());
  h.counts.assign(ground_states.size(), 0.0);
  return h;
}

inline std::unordered_map<SpinConfig, std::size_t, SpinConfigHash> index_of(
    std::span<const SpinConfig> ground_states) {
  std::unordered_map<SpinConfig, std::size_t, SpinConfigHash> idx;
  for (std::size_t i = 0; i < ground_states.size(); ++i) idx.emplace(ground_states[i], i);
  return idx;
}

}  // namespace detail

inline GroundStateHistogram histogram(std::span<const SpinConfig> samples,
                                      std::span<const SpinConfig> ground_states) {
  auto h = detail::empty_histogram(ground_states);
  const auto idx = detail::index_of(ground_states);
  for (const auto& s : samples) {
    if (auto it = idx.find(s); it != idx.end()) {
      h.counts[it->second] += 1.0;
      h.total += 1.0;
    }
  }
  return h;
}

/// Over the recorded states of a chain trace.
inline GroundStateHistogram histogram(const ChainTrace& trace, std::span<const SpinConfig> ground_states) {
  auto h = detail::empty_histogram(ground_states);
  const auto idx = detail::index_of(ground_states);
  for (const auto& r : trace.records) {
    if (auto it = idx.find(r.state); it != idx.end()) {
      h.counts[it->second] += 1.0;
      h.total += 1.0;
    }
  }
  return h;
}

/// Exact probabilities restricted to the ground states and renormalized.
inline GroundStateHistogram histogram(const OutputDistribution& dist, std::span<const SpinConfig> ground_states) {
  auto h = detail::empty_histogram(ground_states);
  double mass = 0.0;
  for (std::size_t i = 0; i < ground_states.size(); ++i) {
    h.counts[i] = dist[ground_states[i]];
    mass += h.counts[i];
  }
  if (mass > 0.0) {
    for (auto& c : h.counts) c /= mass;
  }
  h.total = mass > 0.0 ? 1.0 : 0.0;
  return h;
}

struct FairnessReport {
  std::optional<double> ratio;  // p_max / p_min; empty when some state is missing
  bool all_found = false;
  std::optional<double> tvd_to_uniform;  // empty when the histogram is empty
  std::size_t n_g = 0;
  double samples_used = 0.0;
};

inline FairnessReport fairness(const GroundStateHistogram& h) {
  FairnessReport r;
  r.n_g = h.counts.size();
  r.samples_used = h.total;
  if (h.counts.empty()) return r;
  const auto [lo, hi] = std::minmax_element(h.counts.begin(), h.counts.end());
  r.all_found = *lo > 0.0;
  if (r.all_found) r.ratio = *hi / *lo;
  double total = 0.0;
  for (double c : h.counts) total += c;
  if (total > 0.0) {
    const double u = 1.0 / static_cast<double>(r.n_g);
    double tvd = 0.0;
    for (double c : h.counts) tvd += std::abs(c / total - u);
    r.tvd_to_uniform = 0.5 * tvd;
  }
  return r;
}

enum class Accounting { kTransitions, kSteps };

/// Index at which the last ground state was first occupied, or empty if the
/// chain never reached one of them. Uses the trace's first-visit table, which
/// includes states passed through inside composite steps.
inline std::optional<std::uint64_t> steps_to_enumerate(const ChainTrace& trace,
                                                       std::span<const SpinConfig> ground_states,
                                                       Accounting accounting = Accounting::kTransitions) {
  if (ground_states.empty()) throw ContractError("steps_to_enumerate needs ground states");
  std::uint64_t last = 0;
  for (const auto& g : ground_states) {
    auto it = trace.first_visits.find(g);
    if (it == trace.first_visits.end()) return std::nullopt;
    last = std::max(last, accounting == Accounting::kTransitions ? it->second.transitions : it->second.step);
  }
  return last;
}

/// 1-based length of the shortest prefix of `sequence` containing every
/// ground state.
inline std::optional<std::uint64_t> steps_to_enumerate(std::span<const SpinConfig> sequence,
                                                       std::span<const SpinConfig> ground_states) {
  if (ground_states.empty()) throw ContractError("steps_to_enumerate needs ground states");
  const auto idx = detail::index_of(ground_states);
  std::vector<std::uint8_t> seen(ground_states.size(), 0);
  std::size_t remaining = ground_states.size();
  for (std::size_t i = 0; i < sequence.size(); ++i) {
    auto it = idx.find(sequence[i]);
    if (it == idx.end() || seen[it->second]) continue;
    seen[it->second] = 1;
    if (--remaining == 0) return i + 1;
  }
  return std::nullopt;
}

/// Distinct ground states ever occupied (elementary transitions included).
inline std::size_t distinct_ground_states(const ChainTrace& trace, std::span<const SpinConfig> ground_states) {
  std::size_t n = 0;
  for (const auto& g : ground_states) n += trace.first_visits.count(g);
  return n;
}

// ---------------------------------------------------------------------------
// Aggregation

/// One (instance, trial, algorithm) outcome.
struct ResultRow {
  std::size_t k = 0;
  std::size_t n = 0;
  std::string algorithm;
  std::size_t instance = 0;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  std::size_t n_g = 0;
  std::optional<double> ratio;
  bool all_found = false;
  std::optional<double> tvd;
  std::optional<double> steps;  // empty when enumeration was incomplete
};

struct Stats {
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
};

/// Linear-interpolation quantile of sorted data.
inline double quantile_sorted(const std::vector<double>& v, double q) {
  if (v.empty()) throw ContractError("quantile of empty list");
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline std::optional<Stats> describe(std::vector<double> v) {
  if (v.empty()) return std::nullopt;
  std::sort(v.begin(), v.end());
  Stats s;
  s.count = v.size();
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  s.median = quantile_sorted(v, 0.5);
  s.q25 = quantile_sorted(v, 0.25);
  s.q75 = quantile_sorted(v, 0.75);
  return s;
}

struct GroupKey {
  std::size_t k = 0;
  std::size_t n = 0;
  std::string algorithm;
  friend auto operator<=>(const GroupKey&, const GroupKey&) = default;
};

struct GroupSummary {
  GroupKey key;
  std::size_t rows = 0;
  std::size_t all_found = 0;
  std::optional<Stats> ratio;  // over rows with a defined ratio
  std::optional<Stats> tvd;
  std::optional<Stats> steps;  // over rows with complete enumeration
};

/// Groups by (k, N, algorithm). Rows without a ratio or without a step
/// count are left out of that statistic for every algorithm alike.
inline std::vector<GroupSummary> aggregate(std::span<const ResultRow> rows) {
  if (rows.empty()) throw ContractError("aggregate needs at least one row");
  std::map<GroupKey, std::vector<const ResultRow*>> groups;
  for (const auto& r : rows) groups[{r.k, r.n, r.algorithm}].push_back(&r);
  std::vector<GroupSummary> out;
  for (const auto& [key, members] : groups) {
    GroupSummary g;
    g.key = key;
    g.rows = members.size();
    std::vector<double> ratios, tvds, steps;
    for (const auto* r : members) {
      g.all_found += r->all_found;
      if (r->ratio) ratios.push_back(*r->ratio);
      if (r->tvd) tvds.push_back(*r->tvd);
      if (r->steps) steps.push_back(*r->steps);
    }
    g.ratio = describe(ratios);
    g.tvd = describe(tvds);
    g.steps = describe(steps);
    out.push_back(std::move(g));
  }
  return out;
}

struct Superiority {
  std::size_t a_wins = 0;
  std::size_t b_wins = 0;
  std::size_t ties = 0;
  std::size_t compared = 0;  // instances where both have a step count
};

/// Per instance (k, N, instance), compares mean steps over trials of two
/// algorithms; instances where either never completes are skipped.
inline Superiority superiority(std::span<const ResultRow> rows, const std::string& a, const std::string& b) {
  using Key = std::tuple<std::size_t, std::size_t, std::size_t>;
  std::map<Key, std::pair<std::vector<double>, std::vector<double>>> per;
  for (const auto& r : rows) {
    if (!r.steps) continue;
    auto& slot = per[{r.k, r.n, r.instance}];
    if (r.algorithm == a) slot.first.push_back(*r.steps);
    if (r.algorithm == b) slot.second.push_back(*r.steps);
  }
  Superiority s;
  auto mean = [](const std::vector<double>& v) {
    double t = 0.0;
    for (double x : v) t += x;
    return t / static_cast<double>(v.size());
  };
  for (const auto& [key, pair] : per) {
    if (pair.first.empty() || pair.second.empty()) continue;
    ++s.compared;
    const double ma = mean(pair.first), mb = mean(pair.second);
    if (ma < mb) {
      ++s.a_wins;
    } else if (mb < ma) {
      ++s.b_wins;
    } else {
      ++s.ties;
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline void put_optional(std::ostream& out, const std::optional<double>& v) {
  if (v) out << *v;
}

inline void put_stats(std::ostream& out, const std::optional<Stats>& s) {
  if (s) {
    out << s->count << ',' << s->mean << ',' << s->median << ',' << s->q25 << ',' << s->q75;
  } else {
    out << "0,,,,";
  }
}

}  // namespace detail

inline void write_rows_csv(std::ostream& out, std::span<const ResultRow> rows) {
  out.precision(10);
  out << "k,n,algorithm,instance,trial,seed,n_g,ratio,all_found,tvd,steps\n";
  for (const auto& r : rows) {
    out << r.k << ',' << r.n << ',' << r.algorithm << ',' << r.instance << ',' << r.trial << ',' << r.seed << ','
        << r.n_g << ',';
    detail::put_optional(out, r.ratio);
    out << ',' << (r.all_found ? 1 : 0) << ',';
    detail::put_optional(out, r.tvd);
    out << ',';
    detail::put_optional(out, r.steps);
    out << '\n';
  }
}

inline void write_summary_csv(std::ostream& out, std::span<const GroupSummary> groups) {
  out.precision(10);
  out << "k,n,algorithm,rows,all_found,"
         "ratio_count,ratio_mean,ratio_median,ratio_q25,ratio_q75,"
         "tvd_count,tvd_mean,tvd_median,tvd_q25,tvd_q75,"
         "steps_count,steps_mean,steps_median,steps_q25,steps_q75\n";
  for (const auto& g : groups) {
    out << g.key.k << ',' << g.key.n << ',' << g.key.algorithm << ',' << g.rows << ',' << g.all_found << ',';
    detail::put_stats(out, g.ratio);
    out << ',';
    detail::put_stats(out, g.tvd);
    out << ',';
    detail::put_stats(out, g.steps);
    out << '\n';
  }
}

}  // namespace fairsample

#endif  // FAIRSAMPLE_METRICS_HPP
