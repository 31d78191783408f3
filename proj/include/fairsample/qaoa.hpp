#ifndef FAIRSAMPLE_QAOA_HPP
#define FAIRSAMPLE_QAOA_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fairsample/error.hpp"
#include "fairsample/ising.hpp"
#include "fairsample/optimize.hpp"
#include "fairsample/parallel.hpp"
#include "fairsample/qsim.hpp"
#include "fairsample/random.hpp"

namespace fairsample {

struct QaoaParams {
  std::vector<double> gammas;
  std::vector<double> betas;

  std::size_t p() const noexcept { return gammas.size(); }

  void validate() const {
    if (gammas.empty() || gammas.size() != betas.size()) {
      throw ContractError("QaoaParams needs p >= 1 gammas and betas of equal length");
    }
  }
};

/// beta_l = beta_slope * l/p + beta_intcp, gamma_l = gamma_slope * l/p + gamma_intcp
/// for l = 1..p.
struct LinearSchedule {
  double beta_slope = 0.0;
  double beta_intcp = 0.0;
  double gamma_slope = 0.0;
  double gamma_intcp = 0.0;

  std::array<double, 4> to_array() const { return {beta_slope, beta_intcp, gamma_slope, gamma_intcp}; }
  static LinearSchedule from_array(std::span<const double> v) { return {v[0], v[1], v[2], v[3]}; }

  friend bool operator==(const LinearSchedule&, const LinearSchedule&) = default;
};

/// Instance-independent schedule reused across an instance set.
struct FixedAngles {
  LinearSchedule schedule;
};

inline QaoaParams expand(const LinearSchedule& s, std::size_t p) {
  if (p == 0) throw ContractError("depth p must be >= 1");
  QaoaParams q;
  for (std::size_t l = 1; l <= p; ++l) {
    const double frac = static_cast<double>(l) / static_cast<double>(p);
    q.gammas.push_back(s.gamma_slope * frac + s.gamma_intcp);
    q.betas.push_back(s.beta_slope * frac + s.beta_intcp);
  }
  return q;
}

/// sum_l (beta_l + gamma_l): the angles read as evolution times.
inline double effective_time(const QaoaParams& params) {
  double t = 0.0;
  for (double g : params.gammas) t += g;
  for (double b : params.betas) t += b;
  return t;
}

inline StateVector qaoa_state(const IsingModel& model, const QaoaParams& params) {
  params.validate();
  return run_qaoa(model, params.gammas, params.betas);
}

inline double expectation(std::size_t n_qubits, std::span<const double> energies,
                          const QaoaParams& params) {
  params.validate();
  const auto state = run_qaoa(n_qubits, energies, params.gammas, params.betas);
  return expectation_value(state, energies);
}

/// <psi(gamma, beta)| H_P |psi(gamma, beta)>.
inline double expectation(const IsingModel& model, const QaoaParams& params) {
  const auto table = model.energy_table();
  return expectation(model.n_sites(), table, params);
}

struct OptimizeOptions {
  MinimizeOptions minimizer{};
  double init_low = -2.0;
  double init_high = 2.0;
  std::size_t threads = 1;
};

struct StartTrace {
  std::size_t start = 0;
  std::vector<MinimizePoint> iterates;
};

template <typename Params>
struct QaoaOptimum {
  Params params;
  double expectation = 0.0;
  std::size_t best_start = 0;
  std::vector<StartTrace> trace;
};

namespace detail {

/// Shared multi-start driver: starting points are drawn up front from rng so
/// the outcome does not depend on the thread count. Ties go to the lowest
/// start index.
template <typename Objective>
QaoaOptimum<std::vector<double>> multi_start(Objective&& objective, std::size_t dims,
                                             std::size_t starts, Rng& rng,
                                             const OptimizeOptions& options) {
  if (starts == 0) throw ContractError("need at least one optimization start");
  std::vector<std::vector<double>> inits(starts, std::vector<double>(dims));
  for (auto& x : inits) {
    for (auto& v : x) v = uniform_real(rng, options.init_low, options.init_high);
  }
  std::vector<MinimizeResult> results(starts);
  parallel_for(starts, options.threads, [&](std::size_t i) {
    results[i] = bfgs_minimize(objective, inits[i], options.minimizer);
  });
  QaoaOptimum<std::vector<double>> best;
  best.expectation = std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t i = 0; i < starts; ++i) {
    best.trace.push_back({i, results[i].trace});
    if (std::isfinite(results[i].value) && (!any || results[i].value < best.expectation)) {
      any = true;
      best.params = results[i].x;
      best.expectation = results[i].value;
      best.best_start = i;
    }
  }
  if (!any) throw OptimizationError("every optimization start produced non-finite values");
  return best;
}

}  // namespace detail

/// Angle shifts that change the state only by a global phase. The mixer has
/// period pi in beta; the phase layer has period 2 pi / g in gamma when all
/// energy gaps are integer multiples of g.
struct AnglePeriods {
  double beta = std::numbers::pi;
  std::optional<double> gamma;
};

inline AnglePeriods angle_periods(std::span<const double> energies) {
  AnglePeriods out;
  if (energies.empty()) return out;
  for (double scale : {1.0, 2.0, 4.0, 8.0}) {
    std::int64_t g = 0;
    bool integral = true;
    for (double e : energies) {
      const double d = (e - energies[0]) * scale;
      const double r = std::round(d);
      if (std::abs(d - r) > 1e-9 || std::abs(r) > 1e15) {
        integral = false;
        break;
      }
      g = std::gcd(g, static_cast<std::int64_t>(std::abs(r)));
    }
    if (integral) {
      if (g > 0) out.gamma = 2.0 * std::numbers::pi * scale / static_cast<double>(g);
      return out;
    }
  }
  return out;
}

namespace detail {

/// x shifted by a multiple of `period` into [-period/2, period/2].
inline double wrap_angle(double x, double period) { return x - period * std::round(x / period); }

}  // namespace detail

/// Replaces every angle by its smallest-magnitude equivalent.
inline QaoaParams reduce_angles(QaoaParams params, const AnglePeriods& periods) {
  for (auto& b : params.betas) b = detail::wrap_angle(b, periods.beta);
  if (periods.gamma) {
    for (auto& g : params.gammas) g = detail::wrap_angle(g, *periods.gamma);
  }
  return params;
}

namespace detail {

/// Shifts (slope, intercept) by whole periods of the layer angles
/// slope * l/p + intercept so that sum_l |angle_l| is smallest.
inline std::pair<double, double> reduce_linear(double slope, double intcp, std::size_t p, double period) {
  const double pd = static_cast<double>(p);
  slope = wrap_angle(slope, period * pd);
  intcp = wrap_angle(intcp, period);
  auto cost = [&](double sl, double ic) {
    double c = 0.0;
    for (std::size_t l = 1; l <= p; ++l) c += std::abs(sl * static_cast<double>(l) / pd + ic);
    return c;
  };
  double best_slope = slope, best_intcp = intcp, best = cost(slope, intcp);
  const int span = 2 * static_cast<int>(p);
  for (int b = -2; b <= 2; ++b) {
    for (int a = -span; a <= span; ++a) {
      const double sl = slope + period * pd * b, ic = intcp + period * a;
      const double c = cost(sl, ic);
      if (c < best - 1e-12) {
        best = c;
        best_slope = sl;
        best_intcp = ic;
      }
    }
  }
  return {best_slope, best_intcp};
}

}  // namespace detail

/// Shifting an intercept by one period, or a slope by p periods, moves every
/// layer angle by a whole number of periods.
inline LinearSchedule reduce_angles(const LinearSchedule& s, std::size_t p, const AnglePeriods& periods) {
  LinearSchedule r = s;
  std::tie(r.beta_slope, r.beta_intcp) = detail::reduce_linear(s.beta_slope, s.beta_intcp, p, periods.beta);
  if (periods.gamma) {
    std::tie(r.gamma_slope, r.gamma_intcp) = detail::reduce_linear(s.gamma_slope, s.gamma_intcp, p, *periods.gamma);
  }
  return r;
}

/// Negating every angle conjugates the state (H_P and H_d are real), leaving
/// the measurement distribution unchanged. Picks the representative with
/// non-negative effective time.
inline QaoaParams canonical_sign(QaoaParams params) {
  if (effective_time(params) < 0.0) {
    for (auto& g : params.gammas) g = -g;
    for (auto& b : params.betas) b = -b;
  }
  return params;
}

inline LinearSchedule canonical_sign(const LinearSchedule& s, std::size_t p) {
  if (effective_time(expand(s, p)) < 0.0) {
    return {-s.beta_slope, -s.beta_intcp, -s.gamma_slope, -s.gamma_intcp};
  }
  return s;
}

/// Minimizes the cost expectation over the four linear-schedule parameters.
inline QaoaOptimum<LinearSchedule> optimize(const IsingModel& model, std::size_t p,
                                            std::size_t starts, Rng& rng,
                                            const OptimizeOptions& options = {}) {
  if (p == 0) throw ContractError("depth p must be >= 1");
  const auto table = model.energy_table();
  const auto n = model.n_sites();
  auto objective = [&](const std::vector<double>& x) {
    return expectation(n, table, expand(LinearSchedule::from_array(x), p));
  };
  auto raw = detail::multi_start(objective, 4, starts, rng, options);
  QaoaOptimum<LinearSchedule> out;
  out.params = canonical_sign(reduce_angles(LinearSchedule::from_array(raw.params), p, angle_periods(table)), p);
  out.expectation = raw.expectation;
  out.best_start = raw.best_start;
  out.trace = std::move(raw.trace);
  return out;
}

/// Minimizes over all 2p angles (gammas first, then betas).
inline QaoaOptimum<QaoaParams> optimize_free(const IsingModel& model, std::size_t p,
                                             std::size_t starts, Rng& rng,
                                             const OptimizeOptions& options = {}) {
  if (p == 0) throw ContractError("depth p must be >= 1");
  const auto table = model.energy_table();
  const auto n = model.n_sites();
  auto split = [p](const std::vector<double>& x) {
    return QaoaParams{{x.begin(), x.begin() + static_cast<std::ptrdiff_t>(p)},
                      {x.begin() + static_cast<std::ptrdiff_t>(p), x.end()}};
  };
  auto objective = [&](const std::vector<double>& x) { return expectation(n, table, split(x)); };
  auto raw = detail::multi_start(objective, 2 * p, starts, rng, options);
  QaoaOptimum<QaoaParams> out;
  out.params = canonical_sign(reduce_angles(split(raw.params), angle_periods(table)));
  out.expectation = raw.expectation;
  out.best_start = raw.best_start;
  out.trace = std::move(raw.trace);
  return out;
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw ContractError("median of empty list");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Component-wise median of optimized schedules.
inline FixedAngles fixed_angles_from_set(std::span<const LinearSchedule> schedules) {
  if (schedules.empty()) throw ContractError("fixed angles need at least one schedule");
  std::array<std::vector<double>, 4> cols;
  for (const auto& s : schedules) {
    const auto a = s.to_array();
    for (std::size_t i = 0; i < 4; ++i) cols[i].push_back(a[i]);
  }
  std::array<double, 4> med{};
  for (std::size_t i = 0; i < 4; ++i) med[i] = median(cols[i]);
  return {LinearSchedule::from_array(med)};
}

// JSON {beta_slope, beta_intcp, gamma_slope, gamma_intcp, expectation, p}

inline nlohmann::json schedule_to_json(const LinearSchedule& s, double expectation_value, std::size_t p) {
  return {{"beta_slope", s.beta_slope},   {"beta_intcp", s.beta_intcp},
          {"gamma_slope", s.gamma_slope}, {"gamma_intcp", s.gamma_intcp},
          {"expectation", expectation_value}, {"p", p}};
}

inline LinearSchedule schedule_from_json(const nlohmann::json& j) {
  try {
    return {j.at("beta_slope").get<double>(), j.at("beta_intcp").get<double>(),
            j.at("gamma_slope").get<double>(), j.at("gamma_intcp").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed schedule JSON: ") + e.what());
  }
}

inline nlohmann::json params_to_json(const QaoaParams& q) {
  return {{"gammas", q.gammas}, {"betas", q.betas}, {"p", q.p()}, {"effective_time", effective_time(q)}};
}

inline QaoaParams params_from_json(const nlohmann::json& j) {
  try {
    QaoaParams q{j.at("gammas").get<std::vector<double>>(), j.at("betas").get<std::vector<double>>()};
    q.validate();
    return q;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed QAOA parameter JSON: ") + e.what());
  }
}

}  // namespace fairsample

#endif  // FAIRSAMPLE_QAOA_HPP
