#pragma once

// Derivative-free global search (differential evolution, rand/1/bin) and a
// quasi-Newton local refiner (BFGS). Both maximize.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "cellbp/error.hpp"
#include "cellbp/parallel.hpp"
#include "cellbp/random.hpp"

namespace cellbp {

using Vector = std::vector<double>;

inline double dot(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const Vector& a) { return std::sqrt(dot(a, a)); }

struct DEConfig {
  std::size_t population = 60;
  std::size_t generations = 300;
  double mutation = 0.8;   // F
  double crossover = 0.9;  // CR
  double tolerance = 1e-6;
  std::size_t stall_generations = 30;
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

struct DEResult {
  Vector best;
  double best_value = -std::numeric_limits<double>::infinity();
  bool converged = false;
  std::size_t generations_used = 0;
  std::vector<double> trace;  // best value after each generation, index 0 = initial population
  std::vector<Vector> population;  // final generation
  std::vector<double> values;
};

namespace detail {

inline double finite_or_neg_inf(double v) {
  return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
}

// Standard deviation of the population values; infinite while any member is
// infeasible.
inline double spread(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) {
    if (!std::isfinite(x)) return std::numeric_limits<double>::infinity();
    mean += x;
  }
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

}  // namespace detail

// Objective is called concurrently on distinct candidates and must be pure.
// The search stops early once the best value has gained less than `tolerance`
// over `stall_generations` and the population values have collapsed to within
// tolerance * (1 + |best|) of each other.
// Non-finite values count as -inf. Trials are generated sequentially from one
// stream and selection happens after the whole generation is evaluated, so
// results do not depend on the thread count.
template <class Objective>
DEResult differential_evolution(const Objective& objective, const Vector& lower, const Vector& upper,
                                const DEConfig& cfg) {
  const std::size_t dim = lower.size();
  const std::size_t np = cfg.population;
  if (np < 4) throw Error(ErrorKind::InvalidArgument, "population must be >= 4");
  if (upper.size() != dim) throw Error(ErrorKind::InvalidArgument, "bounds dimension mismatch");
  for (std::size_t j = 0; j < dim; ++j) {
    if (!(lower[j] <= upper[j])) throw Error(ErrorKind::InvalidArgument, "empty box bounds");
  }
  if (!(cfg.mutation > 0.0 && cfg.mutation < 2.0)) throw Error(ErrorKind::InvalidArgument, "F must lie in (0,2)");
  if (!(cfg.crossover >= 0.0 && cfg.crossover <= 1.0)) throw Error(ErrorKind::InvalidArgument, "CR must lie in [0,1]");

  Rng rng(cfg.seed);
  std::vector<Vector> pop(np, Vector(dim));
  for (auto& x : pop) {
    for (std::size_t j = 0; j < dim; ++j) x[j] = rng.uniform(lower[j], upper[j]);
  }
  std::vector<double> fit(np);
  parallel_for(np, [&](std::size_t i) { fit[i] = detail::finite_or_neg_inf(objective(pop[i])); }, cfg.threads);

  DEResult res;
  auto update_best = [&] {
    for (std::size_t i = 0; i < np; ++i) {
      if (fit[i] > res.best_value || res.best.empty()) {
        res.best_value = fit[i];
        res.best = pop[i];
      }
    }
  };
  update_best();
  res.trace.push_back(res.best_value);

  std::vector<Vector> trial(np, Vector(dim));
  std::vector<double> trial_fit(np);
  for (std::size_t gen = 1; gen <= cfg.generations; ++gen) {
    for (std::size_t i = 0; i < np; ++i) {
      std::size_t a, b, c;
      do { a = rng.below(np); } while (a == i);
      do { b = rng.below(np); } while (b == i || b == a);
      do { c = rng.below(np); } while (c == i || c == a || c == b);
      const std::size_t forced = rng.below(dim);
      for (std::size_t j = 0; j < dim; ++j) {
        const double u = rng.uniform();
        if (u < cfg.crossover || j == forced) {
          double v = pop[a][j] + cfg.mutation * (pop[b][j] - pop[c][j]);
          if (v < lower[j] || v > upper[j]) v = rng.uniform(lower[j], upper[j]);
          trial[i][j] = v;
        } else {
          trial[i][j] = pop[i][j];
        }
      }
    }
    parallel_for(
        np, [&](std::size_t i) { trial_fit[i] = detail::finite_or_neg_inf(objective(trial[i])); }, cfg.threads);
    for (std::size_t i = 0; i < np; ++i) {
      if (trial_fit[i] >= fit[i]) {
        pop[i].swap(trial[i]);
        fit[i] = trial_fit[i];
      }
    }
    update_best();
    res.trace.push_back(res.best_value);
    res.generations_used = gen;
    if (gen >= cfg.stall_generations && std::isfinite(res.best_value) &&
        res.best_value - res.trace[gen - cfg.stall_generations] < cfg.tolerance &&
        detail::spread(fit) <= cfg.tolerance * (1.0 + std::abs(res.best_value))) {
      res.converged = true;
      break;
    }
  }
  res.population = std::move(pop);
  res.values = std::move(fit);
  return res;
}

struct BFGSConfig {
  std::size_t max_iterations = 200;
  // Converged when |projected gradient| < gradient_tolerance * (1 + |f|).
  double gradient_tolerance = 1e-8;
  double armijo = 1e-4;
  double backtrack = 0.5;
  std::size_t max_backtracks = 60;
  double max_step = 2.0;  // largest coordinate move on the first iteration
  std::size_t stall_iterations = 20;
};

struct BFGSResult {
  Vector x;
  double value = -std::numeric_limits<double>::infinity();
  Vector gradient;
  std::size_t iterations = 0;
  bool converged = false;
  bool line_search_failed = false;
};

namespace detail {

// Gradient with the components that point out of the box at an active bound
// removed; its norm is the first-order stationarity measure on a box.
inline Vector projected_gradient(const Vector& x, const Vector& g, const Vector& lower, const Vector& upper) {
  Vector pg = g;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if ((x[i] <= lower[i] && g[i] < 0.0) || (x[i] >= upper[i] && g[i] > 0.0)) pg[i] = 0.0;
  }
  return pg;
}

}  // namespace detail

// Box-constrained quasi-Newton maximization. value_grad(x) returns {value,
// gradient}. Variables sitting on a bound with the gradient pointing outward
// are held fixed for the iteration; trial points are projected onto the box.
// Steps are only accepted when they satisfy the Armijo condition, so the
// returned value never falls below the starting value. Infinite bounds give
// plain BFGS.
template <class ValueGrad>
BFGSResult bfgs_maximize(const ValueGrad& value_grad, Vector x0, const Vector& lower, const Vector& upper,
                         const BFGSConfig& cfg = {}) {
  const std::size_t n = x0.size();
  if (lower.size() != n || upper.size() != n) throw Error(ErrorKind::InvalidArgument, "bounds dimension mismatch");
  BFGSResult res;
  res.x = std::move(x0);
  for (std::size_t i = 0; i < n; ++i) res.x[i] = std::clamp(res.x[i], lower[i], upper[i]);
  {
    auto [v, g] = value_grad(res.x);
    res.value = v;
    res.gradient = std::move(g);
  }
  if (!std::isfinite(res.value)) {
    res.line_search_failed = true;
    return res;
  }
  auto stationary = [&] {
    return norm2(detail::projected_gradient(res.x, res.gradient, lower, upper)) <
           cfg.gradient_tolerance * (1.0 + std::abs(res.value));
  };
  if (n == 0 || stationary()) {
    res.converged = true;
    return res;
  }
  // Inverse Hessian of -f, row-major.
  std::vector<double> h(n * n, 0.0);
  auto reset = [&] {
    std::fill(h.begin(), h.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) h[i * n + i] = 1.0;
  };
  reset();
  bool scaled = false;

  Vector dir(n), x_new(n), s(n), y(n), hy(n), gf(n);
  std::vector<double> history{res.value};
  std::vector<char> fixed(n);
  for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
    res.iterations = it + 1;
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const char f = (res.x[i] <= lower[i] && res.gradient[i] < 0.0) || (res.x[i] >= upper[i] && res.gradient[i] > 0.0);
      changed = changed || f != fixed[i];
      fixed[i] = f;
      gf[i] = f ? 0.0 : res.gradient[i];
    }
    // The curvature estimate mixes in the held variables; start over when
    // the active set changes.
    if (changed) {
      reset();
      scaled = false;
    }
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      if (!fixed[i]) {
        for (std::size_t j = 0; j < n; ++j) acc += h[i * n + j] * gf[j];
      }
      dir[i] = acc;
    }
    double slope = dot(gf, dir);
    if (!(slope > 0.0)) {
      reset();
      scaled = false;
      dir = gf;
      slope = dot(gf, dir);
    }
    double step = 1.0;
    if (!scaled) {
      double biggest = 0.0;
      for (double d : dir) biggest = std::max(biggest, std::abs(d));
      if (biggest > cfg.max_step) step = cfg.max_step / biggest;
    }

    bool accepted = false;
    double v_new = 0.0;
    Vector g_new;
    for (std::size_t bt = 0; bt < cfg.max_backtracks; ++bt) {
      double gain = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        x_new[i] = std::clamp(res.x[i] + step * dir[i], lower[i], upper[i]);
        gain += res.gradient[i] * (x_new[i] - res.x[i]);
      }
      auto [v, g] = value_grad(x_new);
      if (std::isfinite(v) && v >= res.value + cfg.armijo * gain) {
        v_new = v;
        g_new = std::move(g);
        accepted = true;
        break;
      }
      step *= cfg.backtrack;
    }
    if (!accepted) {
      res.line_search_failed = true;
      break;
    }

    for (std::size_t i = 0; i < n; ++i) {
      s[i] = x_new[i] - res.x[i];
      y[i] = -(g_new[i] - res.gradient[i]);  // gradient change of -f
    }
    res.x = x_new;
    res.value = v_new;
    res.gradient = std::move(g_new);
    if (stationary()) {
      res.converged = true;
      break;
    }
    // Give up once the value has stopped moving at rounding level.
    history.push_back(res.value);
    if (history.size() > cfg.stall_iterations &&
        res.value - history[history.size() - 1 - cfg.stall_iterations] <= 1e-13 * (1.0 + std::abs(res.value))) {
      break;
    }

    const double sy = dot(s, y);
    if (!(sy > 1e-12 * norm2(s) * norm2(y))) {
      reset();  // curvature condition violated
      scaled = false;
      continue;
    }
    if (!scaled) {
      const double gamma = sy / dot(y, y);
      for (std::size_t i = 0; i < n * n; ++i) h[i] *= gamma;
      scaled = true;
    }
    // H <- (I - rho s y') H (I - rho y s') + rho s s'
    const double rho = 1.0 / sy;
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += h[i * n + j] * y[j];
      hy[i] = acc;
    }
    const double yhy = dot(y, hy);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        h[i * n + j] += -rho * (s[i] * hy[j] + hy[i] * s[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
      }
    }
  }
  return res;
}

template <class ValueGrad>
BFGSResult bfgs_maximize(const ValueGrad& value_grad, Vector x0, const BFGSConfig& cfg = {}) {
  const Vector lo(x0.size(), -std::numeric_limits<double>::infinity());
  const Vector hi(x0.size(), std::numeric_limits<double>::infinity());
  return bfgs_maximize(value_grad, std::move(x0), lo, hi, cfg);
}

}  // namespace cellbp
