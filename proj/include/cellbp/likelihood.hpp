#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cellbp/error.hpp"
#include "cellbp/model.hpp"
#include "cellbp/sim.hpp"

namespace cellbp {

// Parameter order used by every gradient, transform and file format.
enum Param : std::size_t { kP1, kP2, kP4, kC1, kC2, kC4, kM1, kM2, kM4, kR, kNumParams };

inline constexpr std::array<std::string_view, kNumParams> kParamNames = {
    "p1", "p2", "p4", "c1", "c2", "c4", "m1", "m2", "m4", "r"};

inline std::optional<Param> param_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNumParams; ++i) {
    if (kParamNames[i] == name) return static_cast<Param>(i);
  }
  return std::nullopt;
}

using Gradient = std::array<double, kNumParams>;

struct ThetaVector {
  std::array<double, kNumParams> values{};

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  static ThetaVector from_params(const ModelParams& p) {
    return {{p.lor1.p, p.lor2.p, p.lor4.p, p.lor1.c, p.lor2.c, p.lor4.c, p.lor1.m, p.lor2.m, p.lor4.m, p.r}};
  }

  ModelParams to_params(std::int64_t s0) const {
    const auto& v = values;
    return {{v[kP1], v[kC1], v[kM1]}, {v[kP2], v[kC2], v[kM2]}, {v[kP4], v[kC4], v[kM4]}, v[kR], s0};
  }

  friend bool operator==(const ThetaVector&, const ThetaVector&) = default;
};

namespace detail {

struct ProbabilityJet {
  Probabilities p;
  // d p_j / d theta for j = 1..4 (index 0 unused); the r entry is always 0.
  std::array<Gradient, 5> grad{};
};

inline ProbabilityJet probability_jet(const ModelParams& mp, double t) {
  ProbabilityJet jet;
  jet.p = mp.probabilities_at(t);
  const auto g1 = mp.lor1.gradient(t);
  const auto g2 = mp.lor2.gradient(t);
  const auto g4 = mp.lor4.gradient(t);
  jet.grad[1][kP1] = g1[0];
  jet.grad[1][kC1] = g1[1];
  jet.grad[1][kM1] = g1[2];
  jet.grad[2][kP2] = g2[0];
  jet.grad[2][kC2] = g2[1];
  jet.grad[2][kM2] = g2[2];
  jet.grad[4][kP4] = g4[0];
  jet.grad[4][kC4] = g4[1];
  jet.grad[4][kM4] = g4[2];
  for (std::size_t i = 0; i < kNumParams; ++i) {
    jet.grad[3][i] = -(jet.grad[1][i] + jet.grad[2][i] + jet.grad[4][i]);
  }
  return jet;
}

template <bool WithGradient>
double full_loglik_impl(const ThetaVector& theta, const Trajectory& traj, Gradient* grad,
                        std::optional<double> censor_time) {
  const ModelParams mp = theta.to_params(traj.s0);
  const double r = mp.r;
  const double log_r = std::log(r);
  double ll = 0.0;
  double exposure = 0.0;  // sum X_{i-1} dT_i
  for (std::size_t i = 0; i < traj.events.size(); ++i) {
    const auto& e = traj.events[i];
    const double x_prev = static_cast<double>(traj.viable_before(i));
    const double dt = e.t - traj.time_before(i);
    const int j = event_index(e.kind);
    double pj;
    if constexpr (WithGradient) {
      const auto jet = probability_jet(mp, e.t);
      pj = jet.p[j];
      if (pj > 0.0) {
        for (std::size_t q = 0; q < kR; ++q) (*grad)[q] += jet.grad[j][q] / pj;
      }
    } else {
      pj = mp.probabilities_at(e.t)[j];
    }
    if (!(pj > 0.0)) return -std::numeric_limits<double>::infinity();
    ll += std::log(pj) + log_r + std::log(x_prev) - r * x_prev * dt;
    exposure += x_prev * dt;
  }
  const double n = static_cast<double>(traj.events.size());
  if (censor_time && !traj.events.empty() && traj.events.back().x > 0) {
    const double tail = *censor_time - traj.events.back().t;
    if (tail > 0.0) {
      const double x_last = static_cast<double>(traj.events.back().x);
      ll -= r * x_last * tail;
      exposure += x_last * tail;
    }
  }
  if constexpr (WithGradient) (*grad)[kR] += n / r - exposure;
  return ll;
}

}  // namespace detail

struct LikelihoodOptions {
  // When set, adds the survival factor exp(-r X_n (censor_time - T_n)) for a
  // process still alive at the end of the observation window.
  std::optional<double> censor_time;
};

// sum_i [log p_{kind_i}(T_i) + log r + log X_{i-1} - r X_{i-1} dT_i]
inline double full_loglik(const ThetaVector& theta, const Trajectory& traj, LikelihoodOptions opts = {}) {
  const double ll = detail::full_loglik_impl<false>(theta, traj, nullptr, opts.censor_time);
  if (!std::isfinite(ll)) {
    throw Error(ErrorKind::NonFiniteLikelihood, "an observed event has probability zero under theta");
  }
  return ll;
}

struct LoglikGradient {
  double loglik = 0.0;
  Gradient grad{};
};

inline LoglikGradient full_loglik_grad(const ThetaVector& theta, const Trajectory& traj,
                                       LikelihoodOptions opts = {}) {
  LoglikGradient out;
  out.loglik = detail::full_loglik_impl<true>(theta, traj, &out.grad, opts.censor_time);
  if (!std::isfinite(out.loglik)) {
    throw Error(ErrorKind::NonFiniteLikelihood, "an observed event has probability zero under theta");
  }
  return out;
}

// r_hat = n / sum_i X_{i-1} dT_i, pooled over trajectories. With a censoring
// time the exposure of the surviving population after the last event is added.
inline double rate_mle(std::span<const Trajectory> trajs, std::optional<double> censor_time = std::nullopt) {
  double n = 0.0;
  double exposure = 0.0;
  for (const auto& traj : trajs) {
    for (std::size_t i = 0; i < traj.events.size(); ++i) {
      exposure += static_cast<double>(traj.viable_before(i)) * (traj.events[i].t - traj.time_before(i));
    }
    if (censor_time && !traj.events.empty() && traj.events.back().x > 0) {
      exposure += static_cast<double>(traj.events.back().x) * std::max(0.0, *censor_time - traj.events.back().t);
    }
    n += static_cast<double>(traj.events.size());
  }
  if (n == 0.0) throw Error(ErrorKind::NoEvents, "rate_mle needs at least one event");
  return n / exposure;
}

inline double rate_mle(const Trajectory& traj) { return rate_mle(std::span<const Trajectory>(&traj, 1)); }

// Normalized forward variables over the hidden dud count u in [0, weights.size()).
struct ForwardState {
  std::size_t k = 0;
  std::size_t offset = 0;        // weights[i] is the weight of u = offset + i
  std::vector<double> weights;
  double loglik = 0.0;
  std::vector<Gradient> grad_weights;  // empty unless a gradient was requested
  Gradient grad_loglik{};
};

struct ForwardOptions {
  bool with_gradient = false;
  std::optional<double> censor_time;
  // Weights below trim * (largest weight) are dropped from the ends of the
  // support after each step. 0 keeps every reachable state.
  double trim = 1e-20;
};

namespace detail {

inline StepClass checked_step(const PartialTrajectory& pt, std::size_t k) {
  const std::int64_t m_prev = k == 0 ? pt.m0 : pt.records[k - 1].m;
  const std::int64_t y_prev = k == 0 ? 0 : pt.records[k - 1].y;
  const double t_prev = k == 0 ? 0.0 : pt.records[k - 1].t;
  const auto& rec = pt.records[k];
  const auto cls = classify_step(rec.m - m_prev, rec.y - y_prev);
  if (!cls) {
    throw Error(ErrorKind::MalformedObservation,
                "step " + std::to_string(k + 1) + ": (dm, dy) = (" + std::to_string(rec.m - m_prev) + ", " +
                    std::to_string(rec.y - y_prev) + ") is not an observable event");
  }
  if (!(rec.t > t_prev) || !std::isfinite(rec.t)) {
    throw Error(ErrorKind::MalformedObservation,
                "step " + std::to_string(k + 1) + ": event times must be strictly increasing");
  }
  return *cls;
}

}  // namespace detail

// Runs the normalized forward recursion over all observed steps.
//
// With X = M_k - u viable cells, the transition weight of a step is
//   h(u, v) = r X exp(-r X dT) p_j(T_{k+1})
// where j ranges over the events consistent with the observed (dm, dy); only
// event 4 moves u to u + 1. Each step factors out exp(-r X_min dT), X_min being
// the smallest viable count on the current support, so the per-state factors
// are <= r X and never overflow.
inline ForwardState forward_pass(const ThetaVector& theta, const PartialTrajectory& pt, ForwardOptions opts = {}) {
  const ModelParams mp = theta.to_params(pt.m0);
  const double r = mp.r;
  const bool grad = opts.with_gradient;
  ForwardState st;
  st.weights = {1.0};
  if (grad) st.grad_weights.assign(1, Gradient{});

  std::vector<double> next_w;
  std::vector<Gradient> next_gw;
  std::vector<double> gtil;  // scaled r X exp(-r (X - X_min) dT) per u
  const auto fail = [](std::size_t k) {
    return Error(ErrorKind::NonFiniteLikelihood,
                 "step " + std::to_string(k + 1) + ": every hidden path has zero likelihood");
  };

  for (std::size_t k = 0; k < pt.records.size(); ++k) {
    const StepClass cls = detail::checked_step(pt, k);
    const std::int64_t m_prev = k == 0 ? pt.m0 : pt.records[k - 1].m;
    const double t_prev = k == 0 ? 0.0 : pt.records[k - 1].t;
    const auto& rec = pt.records[k];
    const double dt = rec.t - t_prev;
    const std::size_t width = st.weights.size();
    const std::int64_t lo = static_cast<std::int64_t>(st.offset);
    const std::int64_t u_max = lo + static_cast<std::int64_t>(width) - 1;
    const double x_min = static_cast<double>(m_prev - u_max);

    detail::ProbabilityJet jet;
    if (grad) {
      jet = detail::probability_jet(mp, rec.t);
    } else {
      jet.p = mp.probabilities_at(rec.t);
    }
    double p_stay = 0.0;
    double p_shift = 0.0;
    const Gradient* dp_stay = nullptr;
    const Gradient* dp_shift = nullptr;
    switch (cls) {
      case StepClass::GainStem:
        p_stay = jet.p.p1;
        p_shift = jet.p.p4;
        dp_stay = &jet.grad[1];
        dp_shift = &jet.grad[4];
        break;
      case StepClass::Asym:
        p_stay = jet.p.p2;
        dp_stay = &jet.grad[2];
        break;
      case StepClass::Diff:
        p_stay = jet.p.p3;
        dp_stay = &jet.grad[3];
        break;
    }

    // New support covers u in [lo, new_hi]; states with u > M_{k+1} would
    // leave a negative viable count.
    const bool grows = cls == StepClass::GainStem;
    const std::int64_t new_hi = std::min<std::int64_t>(u_max + (grows ? 1 : 0), rec.m);
    if (new_hi < lo) throw fail(k);
    const std::size_t new_width = static_cast<std::size_t>(new_hi - lo + 1);
    next_w.assign(new_width, 0.0);
    if (grad) gtil.resize(width);

    // Walk down from the top of the support, where X = X_min and the scaled
    // survival factor is 1.
    const double q = std::exp(-r * dt);
    double decay = r;
    double x = x_min;
    double mass = 0.0;
    for (std::size_t i = width; i-- > 0;) {
      const double g = x * decay;
      if (grad) gtil[i] = g;
      const double base = st.weights[i] * g;
      mass += base;
      if (i < new_width) next_w[i] += base * p_stay;
      if (i + 1 < new_width) next_w[i + 1] += base * p_shift;
      decay *= q;
      x += 1.0;
    }
    const double d = mass * (p_stay + p_shift);
    if (!(d > 0.0) || !std::isfinite(d)) throw fail(k);
    const double inv_d = 1.0 / d;
    double w_max = 0.0;
    for (auto& w : next_w) {
      w *= inv_d;
      w_max = std::max(w_max, w);
    }
    st.loglik += std::log(d) - r * x_min * dt;

    if (grad) {
      next_gw.assign(new_width, Gradient{});
      Gradient dd{};
      const Gradient zero{};
      const Gradient& dps = *dp_stay;
      const Gradient& dpf = dp_shift ? *dp_shift : zero;
      for (std::size_t i = 0; i < width; ++i) {
        const double w = st.weights[i];
        const double g = gtil[i];
        if (g == 0.0) continue;
        const auto& gw = st.grad_weights[i];
        const double x = static_cast<double>(m_prev - lo - static_cast<std::int64_t>(i));
        const double wdg_dr = w * g * (1.0 / r - (x - x_min) * dt);
        const double wg = w * g;
        Gradient stay;
        Gradient shift;
        for (std::size_t j = 0; j < kNumParams; ++j) {
          const double dbase = gw[j] * g;
          stay[j] = dbase * p_stay + wg * dps[j];
          shift[j] = dbase * p_shift + wg * dpf[j];
        }
        stay[kR] += wdg_dr * p_stay;
        shift[kR] += wdg_dr * p_shift;
        for (std::size_t j = 0; j < kNumParams; ++j) dd[j] += stay[j] + shift[j];
        if (i < new_width) {
          auto& out = next_gw[i];
          for (std::size_t j = 0; j < kNumParams; ++j) out[j] += stay[j];
        }
        if (p_shift != 0.0 && i + 1 < new_width) {
          auto& out = next_gw[i + 1];
          for (std::size_t j = 0; j < kNumParams; ++j) out[j] += shift[j];
        }
      }
      // Quotient rule: (a / d)' = a' / d - (a / d) d' / d.
      Gradient dd_d;
      for (std::size_t j = 0; j < kNumParams; ++j) dd_d[j] = dd[j] * inv_d;
      for (std::size_t v = 0; v < new_width; ++v) {
        for (std::size_t j = 0; j < kNumParams; ++j) {
          next_gw[v][j] = next_gw[v][j] * inv_d - next_w[v] * dd_d[j];
        }
      }
      for (std::size_t j = 0; j < kNumParams; ++j) st.grad_loglik[j] += dd[j] / d;
      st.grad_loglik[kR] -= x_min * dt;
    }

    std::size_t first = 0;
    std::size_t last = new_width;
    if (opts.trim > 0.0) {
      const double cut = opts.trim * w_max;
      while (first + 1 < last && next_w[first] < cut) ++first;
      while (last - 1 > first && next_w[last - 1] < cut) --last;
    }
    const auto drop = [first, last](auto& v) {
      v.erase(v.begin() + static_cast<std::ptrdiff_t>(last), v.end());
      v.erase(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(first));
    };
    drop(next_w);
    st.weights.swap(next_w);
    if (grad) {
      drop(next_gw);
      st.grad_weights.swap(next_gw);
    }
    st.offset += first;
    st.k = k + 1;
  }

  if (opts.censor_time && !pt.records.empty()) {
    const double tail = *opts.censor_time - pt.records.back().t;
    const std::int64_t m_last = pt.records.back().m;
    if (tail > 0.0) {
      // Survival of the final hidden state: sum_u w(u) exp(-r (M_n - u) tail).
      const std::size_t width = st.weights.size();
      const std::int64_t lo = static_cast<std::int64_t>(st.offset);
      const double x_min = static_cast<double>(m_last - lo) - static_cast<double>(width - 1);
      double s = 0.0;
      Gradient ds{};
      for (std::size_t i = 0; i < width; ++i) {
        const double x = static_cast<double>(m_last - lo - static_cast<std::int64_t>(i));
        const double f = std::exp(-r * (x - x_min) * tail);
        s += st.weights[i] * f;
        if (grad) {
          for (std::size_t j = 0; j < kNumParams; ++j) ds[j] += st.grad_weights[i][j] * f;
          ds[kR] += st.weights[i] * f * (-(x - x_min) * tail);
        }
      }
      if (!(s > 0.0)) throw fail(pt.records.size() - 1);
      st.loglik += std::log(s) - r * x_min * tail;
      if (grad) {
        for (std::size_t j = 0; j < kNumParams; ++j) st.grad_loglik[j] += ds[j] / s;
        st.grad_loglik[kR] -= x_min * tail;
      }
    }
  }
  return st;
}

inline double forward_loglik(const ThetaVector& theta, const PartialTrajectory& pt, ForwardOptions opts = {}) {
  opts.with_gradient = false;
  return forward_pass(theta, pt, opts).loglik;
}

inline LoglikGradient forward_loglik_grad(const ThetaVector& theta, const PartialTrajectory& pt,
                                          ForwardOptions opts = {}) {
  opts.with_gradient = true;
  auto st = forward_pass(theta, pt, opts);
  return {st.loglik, st.grad_loglik};
}

inline constexpr std::size_t kMaxEnumerationEvents = 20;

// Sums the complete-data likelihood over every assignment of event 1 or 4 to
// the (+1, 0) steps. Exponential cost; used to check the forward recursion.
inline double enumerate_loglik(const ThetaVector& theta, const PartialTrajectory& pt) {
  const std::size_t n = pt.records.size();
  if (n > kMaxEnumerationEvents) {
    throw Error(ErrorKind::TooLarge, "enumeration limited to " + std::to_string(kMaxEnumerationEvents) + " events");
  }
  std::vector<StepClass> classes(n);
  std::vector<std::size_t> ambiguous;
  for (std::size_t k = 0; k < n; ++k) {
    classes[k] = detail::checked_step(pt, k);
    if (classes[k] == StepClass::GainStem) ambiguous.push_back(k);
  }
  const ModelParams mp = theta.to_params(pt.m0);
  const double r = mp.r;
  std::vector<double> path_logliks;
  const std::uint64_t n_paths = std::uint64_t{1} << ambiguous.size();
  path_logliks.reserve(n_paths);
  std::vector<int> event_of(n);
  for (std::uint64_t mask = 0; mask < n_paths; ++mask) {
    for (std::size_t k = 0; k < n; ++k) {
      event_of[k] = classes[k] == StepClass::Asym ? 2 : classes[k] == StepClass::Diff ? 3 : 1;
    }
    for (std::size_t b = 0; b < ambiguous.size(); ++b) {
      if (mask >> b & 1) event_of[ambiguous[b]] = 4;
    }
    double ll = 0.0;
    std::int64_t x = pt.m0;
    double t_prev = 0.0;
    for (std::size_t k = 0; k < n && std::isfinite(ll); ++k) {
      const auto& rec = pt.records[k];
      const double pj = mp.probabilities_at(rec.t)[event_of[k]];
      if (x <= 0 || !(pj > 0.0)) {
        ll = -std::numeric_limits<double>::infinity();
        break;
      }
      const double xd = static_cast<double>(x);
      ll += std::log(r * xd) - r * xd * (rec.t - t_prev) + std::log(pj);
      x += event_of[k] == 1 ? 1 : event_of[k] == 3 ? -1 : 0;
      t_prev = rec.t;
    }
    path_logliks.push_back(ll);
  }
  const double top = *std::max_element(path_logliks.begin(), path_logliks.end());
  if (!std::isfinite(top)) throw Error(ErrorKind::NonFiniteLikelihood, "every hidden path has zero likelihood");
  double sum = 0.0;
  for (double ll : path_logliks) sum += std::exp(ll - top);
  return top + std::log(sum);
}

}  // namespace cellbp
