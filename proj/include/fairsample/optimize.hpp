#ifndef FAIRSAMPLE_OPTIMIZE_HPP
#define FAIRSAMPLE_OPTIMIZE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace fairsample {

struct MinimizeOptions {
  double fd_step = 1e-4;  // central-difference step
  std::size_t max_iterations = 200;
  double gradient_tolerance = 1e-6;
  double value_tolerance = 1e-13;  // stop when relative decrease stalls
};

struct MinimizePoint {
  std::vector<double> x;
  double value = 0.0;
};

struct MinimizeResult {
  std::vector<double> x;
  double value = std::numeric_limits<double>::infinity();
  double initial_value = std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;
  std::vector<MinimizePoint> trace;  // accepted iterates, starting point first
};

/// Quasi-Newton (BFGS inverse-Hessian update) minimization with
/// central-difference gradients and Armijo backtracking. The returned value
/// never exceeds the starting value. A non-finite starting value returns
/// immediately with value = +inf.
template <typename F>
MinimizeResult bfgs_minimize(F&& f, std::vector<double> x0, const MinimizeOptions& opt = {}) {
  const std::size_t n = x0.size();
  MinimizeResult r;
  auto eval = [&](const std::vector<double>& x) {
    ++r.evaluations;
    return f(x);
  };
  auto gradient = [&](const std::vector<double>& x) {
    std::vector<double> g(n);
    auto probe = x;
    for (std::size_t i = 0; i < n; ++i) {
      probe[i] = x[i] + opt.fd_step;
      const double up = eval(probe);
      probe[i] = x[i] - opt.fd_step;
      const double down = eval(probe);
      probe[i] = x[i];
      g[i] = (up - down) / (2.0 * opt.fd_step);
    }
    return g;
  };
  auto inf_norm = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double e : v) m = std::max(m, std::abs(e));
    return m;
  };

  std::vector<double> x = std::move(x0);
  double fx = eval(x);
  r.initial_value = fx;
  r.x = x;
  r.value = fx;
  if (!std::isfinite(fx)) {
    r.value = std::numeric_limits<double>::infinity();
    return r;
  }
  r.trace.push_back({x, fx});
  std::vector<double> g = gradient(x);
  // Inverse Hessian approximation, row-major.
  std::vector<double> hinv(n * n, 0.0);
  auto reset = [&] {
    std::fill(hinv.begin(), hinv.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) hinv[i * n + i] = 1.0;
  };
  reset();

  for (std::size_t it = 0; it < opt.max_iterations; ++it) {
    r.iterations = it + 1;
    if (inf_norm(g) < opt.gradient_tolerance) {
      r.converged = true;
      break;
    }
    std::vector<double> d(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) d[i] -= hinv[i * n + j] * g[j];
    }
    double slope = 0.0;
    for (std::size_t i = 0; i < n; ++i) slope += d[i] * g[i];
    if (!(slope < 0.0)) {
      reset();
      for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
      slope = 0.0;
      for (std::size_t i = 0; i < n; ++i) slope += d[i] * g[i];
    }
    double step = 1.0;
    std::vector<double> xn(n);
    double fn = fx;
    bool moved = false;
    for (int ls = 0; ls < 50; ++ls) {
      for (std::size_t i = 0; i < n; ++i) xn[i] = x[i] + step * d[i];
      fn = eval(xn);
      if (std::isfinite(fn) && fn <= fx + 1e-4 * step * slope) {
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved || !(fn < fx)) {
      r.converged = true;
      break;
    }
    const std::vector<double> gn = gradient(xn);
    std::vector<double> s(n), y(n);
    double sy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = xn[i] - x[i];
      y[i] = gn[i] - g[i];
      sy += s[i] * y[i];
    }
    const double decrease = fx - fn;
    x = xn;
    fx = fn;
    g = gn;
    r.trace.push_back({x, fx});
    if (sy > 1e-12) {
      std::vector<double> hy(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) hy[i] += hinv[i * n + j] * y[j];
      }
      double yhy = 0.0;
      for (std::size_t i = 0; i < n; ++i) yhy += y[i] * hy[i];
      const double rho = 1.0 / sy;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          hinv[i * n + j] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
        }
      }
    } else {
      reset();
    }
    if (decrease <= opt.value_tolerance * std::max(1.0, std::abs(fx))) {
      r.converged = true;
      break;
    }
  }
  r.x = x;
  r.value = fx;
  return r;
}

}  // namespace fairsample

#endif  // FAIRSAMPLE_OPTIMIZE_HPP
