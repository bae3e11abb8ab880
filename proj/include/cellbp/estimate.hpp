#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cellbp/error.hpp"
#include "cellbp/likelihood.hpp"
#include "cellbp/model.hpp"
#include "cellbp/optim.hpp"
#include "cellbp/quadrature.hpp"
#include "cellbp/sim.hpp"

namespace cellbp {

using Pins = std::array<std::optional<double>, kNumParams>;

// Maps the free parameters of theta to R^k and back.
//
//   (p1, p2, p4, slack)  <->  logits z_j = log(p_j / slack) for each free p_j,
//                             slack = 1 - p1 - p2 - p4 (pinned p's reduce the
//                             mass shared by the free ones)
//   c, r                 <->  log scale
//   m                    <->  identity
//
// Pinned parameters are held at their values and do not appear in the vector.
class ParameterTransform {
 public:
  ParameterTransform() : ParameterTransform(Pins{}) {}

  explicit ParameterTransform(const Pins& pins) : pins_(pins) {
    pinned_mass_ = 0.0;
    for (auto j : {kP1, kP2, kP4}) {
      if (pins_[j]) pinned_mass_ += *pins_[j];
    }
    if (pinned_mass_ > 1.0 + 1e-12) throw Error(ErrorKind::InvalidParams, "pinned p's sum above 1");
    for (std::size_t i = 0; i < kNumParams; ++i) {
      if (!pins_[i]) free_.push_back(static_cast<Param>(i));
    }
  }

  const Pins& pins() const { return pins_; }
  const std::vector<Param>& free_params() const { return free_; }
  std::size_t dimension() const { return free_.size(); }
  double free_mass() const { return 1.0 - pinned_mass_; }

  Vector to_unconstrained(const ThetaVector& theta) const {
    const double slack = 1.0 - theta[kP1] - theta[kP2] - theta[kP4];
    if (has_free_p() && !(slack > 0.0)) {
      throw Error(ErrorKind::InvalidArgument, "theta on the simplex boundary (p1 + p2 + p4 = 1)");
    }
    Vector out;
    out.reserve(free_.size());
    for (Param j : free_) {
      const double v = theta[j];
      switch (j) {
        case kP1:
        case kP2:
        case kP4:
          if (!(v > 0.0)) throw Error(ErrorKind::InvalidArgument, std::string(kParamNames[j]) + " on the boundary 0");
          out.push_back(std::log(v / slack));
          break;
        case kC1:
        case kC2:
        case kC4:
        case kR:
          if (!(v > 0.0)) throw Error(ErrorKind::InvalidArgument, std::string(kParamNames[j]) + " must be > 0");
          out.push_back(std::log(v));
          break;
        default:
          out.push_back(v);
      }
    }
    return out;
  }

  ThetaVector from_unconstrained(const Vector& z) const {
    if (z.size() != free_.size()) throw Error(ErrorKind::InvalidArgument, "unconstrained vector has wrong size");
    ThetaVector theta;
    for (std::size_t i = 0; i < kNumParams; ++i) {
      if (pins_[i]) theta[i] = *pins_[i];
    }
    double top = 0.0;  // slack logit
    for (std::size_t k = 0; k < free_.size(); ++k) {
      if (is_p(free_[k])) top = std::max(top, z[k]);
    }
    double denom = std::exp(-top);
    for (std::size_t k = 0; k < free_.size(); ++k) {
      if (is_p(free_[k])) denom += std::exp(z[k] - top);
    }
    const double mass = free_mass();
    for (std::size_t k = 0; k < free_.size(); ++k) {
      const Param j = free_[k];
      if (is_p(j)) {
        theta[j] = mass * std::exp(z[k] - top) / denom;
      } else if (j == kM1 || j == kM2 || j == kM4) {
        theta[j] = z[k];
      } else {
        theta[j] = std::exp(z[k]);
      }
    }
    return theta;
  }

  // Gradient w.r.t. the unconstrained vector given the gradient w.r.t. theta.
  Vector chain_gradient(const ThetaVector& theta, const Gradient& grad_theta) const {
    const double mass = free_mass();
    double weighted = 0.0;  // sum_j grad_p_j * p_j over free p's
    for (Param j : free_) {
      if (is_p(j)) weighted += grad_theta[j] * theta[j];
    }
    Vector out;
    out.reserve(free_.size());
    for (Param j : free_) {
      if (is_p(j)) {
        out.push_back(theta[j] * (grad_theta[j] - weighted / mass));
      } else if (j == kM1 || j == kM2 || j == kM4) {
        out.push_back(grad_theta[j]);
      } else {
        out.push_back(grad_theta[j] * theta[j]);
      }
    }
    return out;
  }

 private:
  static bool is_p(Param j) { return j == kP1 || j == kP2 || j == kP4; }
  bool has_free_p() const {
    return std::any_of(free_.begin(), free_.end(), [](Param j) { return is_p(j); });
  }

  Pins pins_{};
  double pinned_mass_ = 0.0;
  std::vector<Param> free_;
};

inline Vector transform_to_unconstrained(const ThetaVector& theta) {
  return ParameterTransform{}.to_unconstrained(theta);
}

inline ThetaVector transform_from_unconstrained(const Vector& z) {
  return ParameterTransform{}.from_unconstrained(z);
}

// Natural-scale box bounds. An m upper bound of NaN means 1.5 x the last
// observed event time.
struct BoxBounds {
  std::array<double, kNumParams> lower{1e-4, 1e-4, 1e-4, 1e-6, 1e-6, 1e-6, 0.0, 0.0, 0.0, 1e-4};
  std::array<double, kNumParams> upper{1 - 1e-4, 1 - 1e-4, 1 - 1e-4, 10.0, 10.0, 10.0,
                                       std::numeric_limits<double>::quiet_NaN(),
                                       std::numeric_limits<double>::quiet_NaN(),
                                       std::numeric_limits<double>::quiet_NaN(), 10.0};

  BoxBounds resolved(double last_event_time) const {
    BoxBounds b = *this;
    for (auto j : {kM1, kM2, kM4}) {
      if (std::isnan(b.upper[j])) b.upper[j] = 1.5 * last_event_time;
    }
    return b;
  }
};

struct FitConfig {
  DEConfig de;
  BFGSConfig bfgs;
  BoxBounds bounds;
  Pins pins{};
  // Run the BFGS stage after DE for fully observed data as well.
  bool polish_full = true;
  // Number of DE members (best first) used as BFGS starting points.
  std::size_t polish_starts = 3;

  void validate() const {
    if (de.population < 4) throw Error(ErrorKind::InvalidArgument, "population must be >= 4");
    for (std::size_t j = 0; j < kNumParams; ++j) {
      if (bounds.lower[j] > bounds.upper[j]) {
        throw Error(ErrorKind::InvalidArgument, "empty bounds for " + std::string(kParamNames[j]));
      }
    }
  }
};

struct FitResult {
  ThetaVector theta_hat;
  double loglik = -std::numeric_limits<double>::infinity();
  bool converged = false;
  std::size_t generations_used = 0;
  double gradient_norm_at_opt = std::numeric_limits<double>::quiet_NaN();
  double de_loglik = -std::numeric_limits<double>::infinity();
  std::size_t bfgs_iterations = 0;
  bool bfgs_line_search_failed = false;
  bool bfgs_improved = false;
  BoxBounds bounds;
  Pins pins{};
  std::vector<double> trace;  // DE best loglik per generation
};

namespace detail {

// Pins c and m of any event whose peak probability is pinned at zero: they do
// not enter the likelihood.
inline Pins complete_pins(Pins pins) {
  const std::array<std::array<Param, 3>, 3> groups{{{kP1, kC1, kM1}, {kP2, kC2, kM2}, {kP4, kC4, kM4}}};
  for (const auto& g : groups) {
    if (pins[g[0]] && *pins[g[0]] == 0.0) {
      if (!pins[g[1]]) pins[g[1]] = 0.0;
      if (!pins[g[2]]) pins[g[2]] = 0.0;
    }
  }
  return pins;
}

inline void unconstrained_box(const ParameterTransform& tr, const BoxBounds& b, Vector& lo, Vector& hi) {
  lo.clear();
  hi.clear();
  for (Param j : tr.free_params()) {
    switch (j) {
      case kP1:
      case kP2:
      case kP4: {
        auto logit = [](double p) { return std::log(p / (1.0 - p)); };
        lo.push_back(logit(b.lower[j]));
        hi.push_back(logit(b.upper[j]));
        break;
      }
      case kM1:
      case kM2:
      case kM4:
        lo.push_back(b.lower[j]);
        hi.push_back(b.upper[j]);
        break;
      default:
        lo.push_back(std::log(b.lower[j]));
        hi.push_back(std::log(b.upper[j]));
    }
  }
}

// Runs DE then (optionally) BFGS over the free parameters of `tr`.
template <class Value, class ValueGrad>
FitResult hybrid_fit(const ParameterTransform& tr, const BoxBounds& bounds, const FitConfig& cfg,
                     const Value& value, const ValueGrad& value_grad, bool run_bfgs) {
  Vector lo, hi;
  unconstrained_box(tr, bounds, lo, hi);
  FitResult res;
  res.bounds = bounds;
  res.pins = tr.pins();

  if (tr.dimension() == 0) {
    res.theta_hat = tr.from_unconstrained({});
    res.loglik = value(res.theta_hat);
    res.de_loglik = res.loglik;
    res.converged = true;
    return res;
  }

  auto objective = [&](const Vector& z) { return value(tr.from_unconstrained(z)); };
  const DEResult de = differential_evolution(objective, lo, hi, cfg.de);
  res.trace = de.trace;
  res.generations_used = de.generations_used;
  res.converged = de.converged;
  res.de_loglik = de.best_value;
  res.theta_hat = tr.from_unconstrained(de.best);
  res.loglik = de.best_value;
  if (!std::isfinite(de.best_value)) {
    throw Error(ErrorKind::NonFiniteLikelihood, "no feasible parameter found by differential evolution");
  }

  // The BFGS stage works in the same box as DE.
  auto vg = [&](const Vector& z) -> std::pair<double, Vector> {
    const ThetaVector th = tr.from_unconstrained(z);
    try {
      const LoglikGradient lg = value_grad(th);
      if (!std::isfinite(lg.loglik)) return {-std::numeric_limits<double>::infinity(), Vector(z.size(), 0.0)};
      return {lg.loglik, tr.chain_gradient(th, lg.grad)};
    } catch (const Error&) {
      return {-std::numeric_limits<double>::infinity(), Vector(z.size(), 0.0)};
    }
  };

  Vector best_z = de.best;
  if (run_bfgs) {
    // Polish the best few distinct members; the top one alone can sit in a
    // boundary basin (some c_j at its lower bound) next to the real optimum.
    std::vector<std::size_t> order(de.values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return de.values[a] > de.values[b]; });
    std::vector<Vector> starts{de.best};
    for (std::size_t i : order) {
      if (starts.size() >= std::max<std::size_t>(cfg.polish_starts, 1)) break;
      if (!std::isfinite(de.values[i])) break;
      if (std::find(starts.begin(), starts.end(), de.population[i]) == starts.end()) starts.push_back(de.population[i]);
    }
    for (const auto& z0 : starts) {
      const BFGSResult bf = bfgs_maximize(vg, z0, lo, hi, cfg.bfgs);
      res.bfgs_iterations += bf.iterations;
      if (bf.value > res.loglik) {
        best_z = bf.x;
        res.theta_hat = tr.from_unconstrained(bf.x);
        res.loglik = bf.value;
        res.bfgs_improved = true;
        res.bfgs_line_search_failed = bf.line_search_failed;
        res.converged = de.converged || bf.converged;
      }
    }
    // A fresh curvature estimate often finishes what a stalled run could not.
    for (std::size_t restart = 0; restart < 1 && res.bfgs_improved && !res.converged; ++restart) {
      const BFGSResult bf = bfgs_maximize(vg, best_z, lo, hi, cfg.bfgs);
      res.bfgs_iterations += bf.iterations;
      if (bf.value >= res.loglik) {
        best_z = bf.x;
        res.theta_hat = tr.from_unconstrained(bf.x);
        res.loglik = bf.value;
        res.bfgs_line_search_failed = bf.line_search_failed;
      }
      res.converged = bf.converged;
    }
    res.converged = res.converged || de.converged;
  }
  res.gradient_norm_at_opt = norm2(detail::projected_gradient(best_z, vg(best_z).second, lo, hi));
  return res;
}

}  // namespace detail

// Maximizes the pooled full-data log-likelihood. The rate has a closed form
// and is fixed at rate_mle; shape parameters are searched by DE and then
// refined with BFGS when cfg.polish_full is set.
inline FitResult fit_full(std::span<const Trajectory> trajs, const FitConfig& cfg,
                          const LikelihoodOptions& lopts = {}) {
  cfg.validate();
  double last_t = 0.0;
  std::size_t events = 0;
  for (const auto& t : trajs) {
    events += t.size();
    if (!t.empty()) last_t = std::max(last_t, t.events.back().t);
  }
  if (events == 0) throw Error(ErrorKind::NoEvents, "no events in any trajectory");

  Pins pins = detail::complete_pins(cfg.pins);
  if (!pins[kR]) {
    pins[kR] = rate_mle(trajs, lopts.censor_time);
  }
  const ParameterTransform tr(pins);
  const BoxBounds bounds = cfg.bounds.resolved(last_t);

  auto value = [&](const ThetaVector& th) {
    double total = 0.0;
    for (const auto& t : trajs) {
      total += detail::full_loglik_impl<false>(th, t, nullptr, lopts.censor_time);
      if (!std::isfinite(total)) break;
    }
    return total;
  };
  auto value_grad = [&](const ThetaVector& th) {
    LoglikGradient acc;
    for (const auto& t : trajs) {
      const auto lg = full_loglik_grad(th, t, lopts);
      acc.loglik += lg.loglik;
      for (std::size_t j = 0; j < kNumParams; ++j) acc.grad[j] += lg.grad[j];
    }
    return acc;
  };
  return detail::hybrid_fit(tr, bounds, cfg, value, value_grad, cfg.polish_full);
}

inline FitResult fit_full(const Trajectory& traj, const FitConfig& cfg, const LikelihoodOptions& lopts = {}) {
  return fit_full(std::span<const Trajectory>(&traj, 1), cfg, lopts);
}

// Maximizes the pooled forward-algorithm log-likelihood over all free
// parameters: DE for the global search, then BFGS with the analytic gradient
// started from the DE optimum. The better of the two stages is returned.
inline FitResult fit_forward(std::span<const PartialTrajectory> ptrajs, const FitConfig& cfg,
                             const ForwardOptions& fopts = {}) {
  cfg.validate();
  double last_t = 0.0;
  std::size_t events = 0;
  for (const auto& p : ptrajs) {
    events += p.size();
    if (!p.empty()) last_t = std::max(last_t, p.records.back().t);
  }
  if (events == 0) throw Error(ErrorKind::NoEvents, "no events in any partial trajectory");
  // Reject malformed data up front rather than as -inf inside the optimizer.
  for (const auto& p : ptrajs) {
    for (std::size_t k = 0; k < p.size(); ++k) detail::checked_step(p, k);
  }

  const ParameterTransform tr(detail::complete_pins(cfg.pins));
  const BoxBounds bounds = cfg.bounds.resolved(last_t);

  auto value = [&](const ThetaVector& th) {
    double total = 0.0;
    ForwardOptions o = fopts;
    o.with_gradient = false;
    try {
      for (const auto& p : ptrajs) total += forward_pass(th, p, o).loglik;
    } catch (const Error&) {
      return -std::numeric_limits<double>::infinity();
    }
    return total;
  };
  auto value_grad = [&](const ThetaVector& th) {
    LoglikGradient acc;
    for (const auto& p : ptrajs) {
      const auto lg = forward_loglik_grad(th, p, fopts);
      acc.loglik += lg.loglik;
      for (std::size_t j = 0; j < kNumParams; ++j) acc.grad[j] += lg.grad[j];
    }
    return acc;
  };
  return detail::hybrid_fit(tr, bounds, cfg, value, value_grad, true);
}

inline FitResult fit_forward(const PartialTrajectory& ptraj, const FitConfig& cfg, const ForwardOptions& fopts = {}) {
  return fit_forward(std::span<const PartialTrajectory>(&ptraj, 1), cfg, fopts);
}

// Mean-field expected counts: viable X, dud Z, stem total M = X + Z and
// differentiated Y.
struct PredictedCounts {
  std::vector<double> times;
  std::vector<double> x;
  std::vector<double> z;
  std::vector<double> m;
  std::vector<double> y;
};

inline PredictedCounts predict_counts(const ThetaVector& theta, std::int64_t s0, const std::vector<double>& times) {
  const ModelParams mp = theta.to_params(s0);
  PredictedCounts out;
  out.times = times;
  const std::size_t n = times.size();
  out.x.resize(n);
  out.z.resize(n);
  out.m.resize(n);
  out.y.resize(n);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return times[a] < times[b]; });

  const QuadratureOptions qopts{1e-8, 50};
  auto dud_rate = [&](double u) { return mp.r * mp.lor4(u) * mean_count(mp, u); };
  auto diff_rate = [&](double u) {
    const auto p = mp.probabilities_at(u);
    return mp.r * (p.p2 + 2.0 * p.p3) * mean_count(mp, u);
  };
  double t_prev = 0.0;
  double z_acc = 0.0;
  double y_acc = 0.0;
  for (std::size_t idx : order) {
    const double t = times[idx];
    if (t < 0.0) throw Error(ErrorKind::InvalidArgument, "prediction times must be >= 0");
    if (mp.lor4.p != 0.0) z_acc += integrate(dud_rate, t_prev, t, qopts);
    y_acc += integrate(diff_rate, t_prev, t, qopts);
    t_prev = t;
    out.x[idx] = mean_count(mp, t);
    out.z[idx] = z_acc;
    out.y[idx] = y_acc;
    out.m[idx] = out.x[idx] + z_acc;
  }
  return out;
}

}  // namespace cellbp
