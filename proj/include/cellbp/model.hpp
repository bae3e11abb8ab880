#pragma once

// Time-varying branching process for stem-cell proliferation.
//
// A viable stem cell divides at rate r. At a division occurring at time t the
// outcome is one of
//
//   1  symmetric self-renewal      SC -> SC + SC    probability p1(t)
//   2  asymmetric division         SC -> SC + FC    probability p2(t)
//   3  symmetric differentiation   SC -> FC + FC    probability p3(t)
//   4  self-renewal with a dud     SC -> SC + DC    probability p4(t)
//
// where p1, p2, p4 are Lorentzian bumps p/(1 + c (t - m)^2) and p3 is the
// complement. X(t) counts viable cells; E[X(t)] = S0 exp(r P(t)) with
// P(t) = int_0^t (p1 - p3).

#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "cellbp/error.hpp"
#include "cellbp/quadrature.hpp"

namespace cellbp {

struct LorentzianParams {
  double p = 0.0;  // peak height
  double c = 0.0;  // decay rate, 1/time^2
  double m = 0.0;  // peak location

  double operator()(double t) const {
    const double d = t - m;
    return p / (1.0 + c * d * d);
  }

  // int_0^t p / (1 + c (u - m)^2) du
  double integral(double t) const {
    if (c == 0.0) return p * t;
    const double sc = std::sqrt(c);
    return p / sc * (std::atan(sc * (t - m)) + std::atan(sc * m));
  }

  // d/d(p, c, m) of the value at t.
  std::array<double, 3> gradient(double t) const {
    const double d = t - m;
    const double denom = 1.0 + c * d * d;
    const double denom2 = denom * denom;
    return {1.0 / denom, -p * d * d / denom2, 2.0 * p * c * d / denom2};
  }
};

struct Probabilities {
  double p1 = 0.0;
  double p2 = 0.0;
  double p3 = 0.0;
  double p4 = 0.0;

  double operator[](int event) const {
    switch (event) {
      case 1: return p1;
      case 2: return p2;
      case 3: return p3;
      default: return p4;
    }
  }
};

struct ModelParams {
  LorentzianParams lor1;
  LorentzianParams lor2;
  LorentzianParams lor4;
  double r = 1.0;
  std::int64_t s0 = 0;

  Probabilities probabilities_at(double t) const {
    const double a = lor1(t);
    const double b = lor2(t);
    const double d = lor4(t);
    return {a, b, 1.0 - a - b - d, d};
  }

  // P(t) = int_0^t [p1(u) - p3(u)] du = int_0^t [2 p1 + p2 + p4 - 1] du
  double cumulative_drift(double t) const {
    return 2.0 * lor1.integral(t) + lor2.integral(t) + lor4.integral(t) - t;
  }

  double rate() const { return r; }
  std::int64_t initial_count() const { return s0; }

  // Returns an empty string when valid, otherwise names the violated invariant.
  std::string violation() const {
    const LorentzianParams* lors[] = {&lor1, &lor2, &lor4};
    const char* names[] = {"1", "2", "4"};
    for (int i = 0; i < 3; ++i) {
      const auto& l = *lors[i];
      if (!(l.p >= 0.0 && l.p <= 1.0)) return std::string("p") + names[i] + " must lie in [0,1]";
      if (!(l.c >= 0.0) || !std::isfinite(l.c)) return std::string("c") + names[i] + " must be >= 0";
      if (!std::isfinite(l.m)) return std::string("m") + names[i] + " must be finite";
    }
    if (lor1.p + lor2.p + lor4.p > 1.0 + 1e-12) return "p1 + p2 + p4 must be <= 1";
    if (!(r > 0.0) || !std::isfinite(r)) return "r must be > 0";
    if (s0 < 0) return "s0 must be >= 0";
    return {};
  }

  void validate() const {
    if (auto v = violation(); !v.empty()) throw Error(ErrorKind::InvalidParams, v);
  }
};

// Any family of time-varying outcome probabilities with a closed-form or
// otherwise cheap drift integral can drive the moment formulas and simulator.
template <class M>
concept ProbabilityModel = requires(const M& m, double t) {
  { m.probabilities_at(t) } -> std::same_as<Probabilities>;
  { m.cumulative_drift(t) } -> std::convertible_to<double>;
  { m.rate() } -> std::convertible_to<double>;
  { m.initial_count() } -> std::convertible_to<std::int64_t>;
};

static_assert(ProbabilityModel<ModelParams>);

template <ProbabilityModel M>
Probabilities probabilities_at(const M& model, double t) {
  return model.probabilities_at(t);
}

template <ProbabilityModel M>
double cumulative_drift(const M& model, double t) {
  return model.cumulative_drift(t);
}

template <ProbabilityModel M>
double mean_count(const M& model, double t) {
  return static_cast<double>(model.initial_count()) *
         std::exp(model.rate() * model.cumulative_drift(t));
}

// V(t) = r S(t)^2 int_0^t (p1 + p3)(u) / S(u) du
template <ProbabilityModel M>
double variance_count(const M& model, double t, QuadratureOptions opts = {}) {
  if (t <= 0.0 || model.initial_count() == 0) return 0.0;
  const double r = model.rate();
  const double s0 = static_cast<double>(model.initial_count());
  const double drift_t = model.cumulative_drift(t);
  // Integrate (p1+p3)/S(u) * S0 so the integrand is O(1).
  auto integrand = [&](double u) {
    const auto p = model.probabilities_at(u);
    return (p.p1 + p.p3) * std::exp(-r * model.cumulative_drift(u));
  };
  const double integral = integrate(integrand, 0.0, t, opts);
  const double v = r * s0 * std::exp(2.0 * r * drift_t) * integral;
  return v < 0.0 ? 0.0 : v;
}

// Cov(X(t), X(u)) = S(t)/S(u) V(u) for u <= t; symmetric otherwise.
template <ProbabilityModel M>
double autocovariance(const M& model, double t, double u) {
  if (u > t) std::swap(t, u);
  if (model.initial_count() == 0) return 0.0;
  const double ratio = std::exp(model.rate() * (model.cumulative_drift(t) - model.cumulative_drift(u)));
  return ratio * variance_count(model, u);
}

template <ProbabilityModel M>
double autocorrelation(const M& model, double t, double u) {
  const double vt = variance_count(model, t);
  const double vu = variance_count(model, u);
  return autocovariance(model, t, u) / std::sqrt(vt * vu);
}

struct MomentCurve {
  std::vector<double> times;
  std::vector<double> mean;
  std::vector<double> variance;
};

template <ProbabilityModel M>
MomentCurve moment_curve(const M& model, const std::vector<double>& times) {
  MomentCurve curve;
  curve.times = times;
  curve.mean.reserve(times.size());
  curve.variance.reserve(times.size());
  for (double t : times) {
    curve.mean.push_back(mean_count(model, t));
    curve.variance.push_back(variance_count(model, t));
  }
  return curve;
}

inline std::vector<double> uniform_grid(double t_max, std::size_t points) {
  std::vector<double> grid;
  if (points == 0) return grid;
  if (points == 1) return {0.0};
  grid.reserve(points);
  for (std::size_t i = 0; i < points; ++i) {
    grid.push_back(t_max * static_cast<double>(i) / static_cast<double>(points - 1));
  }
  return grid;
}

// Expected extinction time of the pure-death chain started from S0, which
// lower-bounds the expected extinction time of the full process.
struct StoppingTimeBound {
  double exact = 0.0;             // (1/r) * H_{S0}
  double approx_as_printed = 0.0;  // (1/r) log(S0) + gamma
  double approx_harmonic = 0.0;   // (log(S0) + gamma) / r
  double log_only = 0.0;          // log(S0) / r
};

template <ProbabilityModel M>
StoppingTimeBound min_expected_stopping_time(const M& model) {
  const auto s0 = model.initial_count();
  if (s0 < 1) {
    throw Error(ErrorKind::InvalidArgument, "stopping time undefined: s0 = 0 (already extinct)");
  }
  const double r = model.rate();
  // Sum smallest terms first.
  double harmonic = 0.0;
  for (auto k = s0; k >= 1; --k) harmonic += 1.0 / static_cast<double>(k);
  const double log_s0 = std::log(static_cast<double>(s0));
  constexpr double gamma = std::numbers::egamma;
  return {harmonic / r, log_s0 / r + gamma, (log_s0 + gamma) / r, log_s0 / r};
}

// Right-hand side of the mean-field system for (S, D, F): viable, dud and
// differentiated cells.
template <ProbabilityModel M>
std::array<double, 3> mean_field_ode_rhs(const M& model, double t, const std::array<double, 3>& state) {
  const auto p = model.probabilities_at(t);
  const double rs = model.rate() * state[0];
  return {rs * (p.p1 - p.p3), rs * p.p4, rs * (p.p2 + 2.0 * p.p3)};
}

}  // namespace cellbp
