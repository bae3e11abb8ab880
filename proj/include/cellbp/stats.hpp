#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cellbp/error.hpp"
#include "cellbp/estimate.hpp"
#include "cellbp/sim.hpp"

namespace cellbp {

// ---------------------------------------------------------------------------
// Ensemble summaries of X(t)

// Right-continuous lookup by binary search on event times.
inline CellCounts counts_at(const Trajectory& traj, double t) {
  auto it = std::upper_bound(traj.events.begin(), traj.events.end(), t,
                             [](double value, const EventRecord& e) { return value < e.t; });
  if (it == traj.events.begin()) return {traj.s0, 0, 0};
  --it;
  return {it->x, it->y, it->z};
}

inline std::int64_t stem_total_at(const PartialTrajectory& pt, double t) {
  auto it = std::upper_bound(pt.records.begin(), pt.records.end(), t,
                             [](double value, const PartialRecord& r) { return value < r.t; });
  if (it == pt.records.begin()) return pt.m0;
  return std::prev(it)->m;
}

inline std::int64_t differentiated_at(const PartialTrajectory& pt, double t) {
  auto it = std::upper_bound(pt.records.begin(), pt.records.end(), t,
                             [](double value, const PartialRecord& r) { return value < r.t; });
  if (it == pt.records.begin()) return 0;
  return std::prev(it)->y;
}

using CorrelationMatrix = std::vector<std::vector<std::optional<double>>>;

struct EmpiricalMoments {
  std::vector<double> times;
  std::vector<double> mean;
  std::vector<double> variance;  // unbiased
  // Pearson correlation of X across grid pairs; nullopt where either
  // variance is zero.
  CorrelationMatrix correlation;
};

inline EmpiricalMoments empirical_moments(std::span<const Trajectory> ensemble, const std::vector<double>& times) {
  if (ensemble.size() < 2) throw Error(ErrorKind::InvalidArgument, "empirical moments need >= 2 trajectories");
  for (double t : times) {
    if (t < 0.0) throw Error(ErrorKind::InvalidArgument, "grid time precedes time 0");
  }
  const std::size_t g = times.size();
  const std::size_t n = ensemble.size();
  std::vector<std::vector<double>> xs(g, std::vector<double>(n));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < g; ++i) xs[i][r] = static_cast<double>(counts_at(ensemble[r], times[i]).x);
  }
  EmpiricalMoments out;
  out.times = times;
  out.mean.resize(g);
  out.variance.resize(g);
  for (std::size_t i = 0; i < g; ++i) {
    double s = 0.0;
    for (double v : xs[i]) s += v;
    out.mean[i] = s / static_cast<double>(n);
    double ss = 0.0;
    for (double v : xs[i]) ss += (v - out.mean[i]) * (v - out.mean[i]);
    out.variance[i] = ss / static_cast<double>(n - 1);
  }
  out.correlation.assign(g, std::vector<std::optional<double>>(g));
  for (std::size_t i = 0; i < g; ++i) {
    for (std::size_t j = i; j < g; ++j) {
      if (out.variance[i] <= 0.0 || out.variance[j] <= 0.0) continue;
      double cov = 0.0;
      for (std::size_t r = 0; r < n; ++r) cov += (xs[i][r] - out.mean[i]) * (xs[j][r] - out.mean[j]);
      cov /= static_cast<double>(n - 1);
      const double rho = std::clamp(cov / std::sqrt(out.variance[i] * out.variance[j]), -1.0, 1.0);
      out.correlation[i][j] = rho;
      out.correlation[j][i] = rho;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normal distribution helpers

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// log Phi(x), accurate far into the lower tail.
inline double log_normal_cdf(double x) {
  if (x > -36.0) return std::log(normal_cdf(x));
  const double x2 = x * x;
  const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2) + 105.0 / (x2 * x2 * x2 * x2);
  return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(series);
}

// ---------------------------------------------------------------------------
// Stopping times and the inverse Gaussian

struct StoppingSample {
  std::vector<double> raw;
  double shift = 0.0;
  std::vector<double> shifted;
};

// Throws DegenerateSample when any shifted value is not strictly positive.
inline StoppingSample make_stopping_sample(std::vector<double> raw, double shift) {
  StoppingSample s;
  s.raw = std::move(raw);
  s.shift = shift;
  s.shifted.reserve(s.raw.size());
  for (double v : s.raw) {
    if (!(v - shift > 0.0)) {
      throw Error(ErrorKind::DegenerateSample,
                  "stopping time " + std::to_string(v) + " does not exceed the shift " + std::to_string(shift));
    }
    s.shifted.push_back(v - shift);
  }
  return s;
}

struct InverseGaussianFit {
  double mu = 1.0;
  double lambda = 1.0;
  std::size_t n = 0;
};

// mu_hat = mean, lambda_hat = n / sum (1/x_i - 1/mu_hat)
inline InverseGaussianFit ig_mle(std::span<const double> x) {
  if (x.size() < 2) throw Error(ErrorKind::InvalidArgument, "inverse Gaussian fit needs n >= 2");
  double sum = 0.0;
  for (double v : x) {
    if (!(v > 0.0)) throw Error(ErrorKind::DegenerateSample, "inverse Gaussian support is x > 0");
    sum += v;
  }
  const double n = static_cast<double>(x.size());
  const double mu = sum / n;
  double recip = 0.0;
  for (double v : x) recip += 1.0 / v - 1.0 / mu;
  if (!(recip > 0.0)) throw Error(ErrorKind::DegenerateSample, "all values equal; shape estimate is infinite");
  return {mu, n / recip, x.size()};
}

inline InverseGaussianFit ig_mle(const StoppingSample& s) { return ig_mle(std::span<const double>(s.shifted)); }

inline double ig_logpdf(const InverseGaussianFit& f, double x) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  const double d = x - f.mu;
  return 0.5 * std::log(f.lambda / (2.0 * std::numbers::pi * x * x * x)) - f.lambda * d * d / (2.0 * f.mu * f.mu * x);
}

inline double ig_loglik(const InverseGaussianFit& f, std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += ig_logpdf(f, v);
  return s;
}

// F(x) = Phi(sqrt(l/x)(x/mu - 1)) + exp(2 l / mu) Phi(-sqrt(l/x)(x/mu + 1))
inline double ig_cdf(const InverseGaussianFit& f, double x) {
  if (!(x > 0.0)) return 0.0;
  const double s = std::sqrt(f.lambda / x);
  const double a = s * (x / f.mu - 1.0);
  const double b = s * (x / f.mu + 1.0);
  const double second = std::exp(2.0 * f.lambda / f.mu + log_normal_cdf(-b));
  return std::clamp(normal_cdf(a) + second, 0.0, 1.0);
}

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// P(K > lambda) for the Kolmogorov distribution.
inline double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.18) {
    // Jacobi theta form converges quickly for small lambda.
    const double c = std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
    double s = 0.0;
    for (int k = 1; k <= 20; ++k) {
      const double m = 2.0 * k - 1.0;
      s += std::exp(-m * m * c);
    }
    return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * s, 0.0, 1.0);
  }
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 == 1 ? term : -term);
    if (term < 1e-18) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

template <class Cdf>
TestResult ks_test(std::vector<double> sample, const Cdf& cdf) {
  if (sample.size() < 5) throw Error(ErrorKind::InvalidArgument, "KS test needs n >= 5");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    const double hi = static_cast<double>(i + 1) / n - f;
    const double lo = f - static_cast<double>(i) / n;
    d = std::max({d, hi, lo});
  }
  return {d, kolmogorov_survival(std::sqrt(n) * d)};
}

inline TestResult ks_test(std::vector<double> sample, const InverseGaussianFit& fit) {
  return ks_test(std::move(sample), [&](double x) { return ig_cdf(fit, x); });
}

namespace detail {

// Asymptotic CDF of A^2 for a fully specified null (Marsaglia & Marsaglia 2004).
inline double ad_inf_cdf(double z) {
  if (z <= 0.0) return 0.0;
  if (z < 2.0) {
    return std::exp(-1.2337141 / z) / std::sqrt(z) *
           (2.00012 + (0.247105 - (0.0649821 - (0.0347962 - (0.011672 - 0.00168691 * z) * z) * z) * z) * z);
  }
  return std::exp(-std::exp(1.0776 - (2.30695 - (0.43424 - (0.082433 - (0.008056 - 0.0003146 * z) * z) * z) * z) * z));
}

// Finite-n correction to ad_inf_cdf, same source.
inline double ad_errfix(double n, double x) {
  const double c = 0.01265 + 0.1757 / n;
  if (x < c) {
    double t = x / c;
    t = std::sqrt(t) * (1.0 - t) * (49.0 * t - 102.0);
    return t * (0.0037 / (n * n * n) + 0.00078 / (n * n) + 0.00006 / n);
  }
  if (x < 0.8) {
    double t = (x - c) / (0.8 - c);
    t = -0.00022633 + (6.54034 - (14.6538 - (14.458 - (8.259 - 1.91864 * t) * t) * t) * t) * t;
    return t * (0.04213 / n + 0.01365 / (n * n));
  }
  return (-130.2137 + (745.2337 - (1705.091 - (1950.646 - (1116.360 - 255.7844 * x) * x) * x) * x) * x) / n;
}

}  // namespace detail

template <class Cdf>
TestResult ad_test(std::vector<double> sample, const Cdf& cdf) {
  if (sample.size() < 5) throw Error(ErrorKind::InvalidArgument, "AD test needs n >= 5");
  std::sort(sample.begin(), sample.end());
  const std::size_t n = sample.size();
  std::vector<double> f(n);
  for (std::size_t i = 0; i < n; ++i) {
    f[i] = cdf(sample[i]);
    if (f[i] <= 0.0 || f[i] >= 1.0) {
      throw Error(ErrorKind::DegenerateSample, "fitted CDF is exactly 0 or 1 at a sample point");
    }
  }
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s += (2.0 * static_cast<double>(i) + 1.0) * (std::log(f[i]) + std::log1p(-f[n - 1 - i]));
  }
  const double nd = static_cast<double>(n);
  const double a2 = -nd - s / nd;
  const double p_inf = detail::ad_inf_cdf(a2);
  const double cdf_n = std::clamp(p_inf + detail::ad_errfix(nd, p_inf), 0.0, 1.0);
  return {a2, 1.0 - cdf_n};
}

inline TestResult ad_test(std::vector<double> sample, const InverseGaussianFit& fit) {
  return ad_test(std::move(sample), [&](double x) { return ig_cdf(fit, x); });
}

// ---------------------------------------------------------------------------
// Observed / expected ratio curves

enum class Series : char { X = 'X', Z = 'Z', M = 'M', Y = 'Y' };

struct RatioPoint {
  std::size_t replicate = 0;
  double t = 0.0;
  Series series = Series::X;
  std::optional<double> ratio;  // missing when the expected count is not positive
};

namespace detail {

inline std::optional<double> safe_ratio(double observed, double expected) {
  if (!(expected > 0.0) || !std::isfinite(expected)) return std::nullopt;
  return observed / expected;
}

}  // namespace detail

inline std::vector<RatioPoint> gof_ratios(std::span<const Trajectory> ensemble, const PredictedCounts& expected) {
  std::vector<RatioPoint> out;
  out.reserve(ensemble.size() * expected.times.size() * 4);
  for (std::size_t r = 0; r < ensemble.size(); ++r) {
    for (std::size_t i = 0; i < expected.times.size(); ++i) {
      const double t = expected.times[i];
      const auto c = counts_at(ensemble[r], t);
      const double x = static_cast<double>(c.x);
      const double z = static_cast<double>(c.z);
      const double y = static_cast<double>(c.y);
      out.push_back({r, t, Series::X, detail::safe_ratio(x, expected.x[i])});
      out.push_back({r, t, Series::Z, detail::safe_ratio(z, expected.z[i])});
      out.push_back({r, t, Series::M, detail::safe_ratio(x + z, expected.m[i])});
      out.push_back({r, t, Series::Y, detail::safe_ratio(y, expected.y[i])});
    }
  }
  return out;
}

inline std::vector<RatioPoint> gof_ratios(std::span<const Trajectory> ensemble, const ThetaVector& theta,
                                          const std::vector<double>& times) {
  if (ensemble.empty()) return {};
  return gof_ratios(ensemble, predict_counts(theta, ensemble.front().s0, times));
}

// Partially observed data only supports the M and Y series.
inline std::vector<RatioPoint> gof_ratios(std::span<const PartialTrajectory> ensemble,
                                          const PredictedCounts& expected) {
  std::vector<RatioPoint> out;
  for (std::size_t r = 0; r < ensemble.size(); ++r) {
    for (std::size_t i = 0; i < expected.times.size(); ++i) {
      const double t = expected.times[i];
      out.push_back({r, t, Series::M,
                     detail::safe_ratio(static_cast<double>(stem_total_at(ensemble[r], t)), expected.m[i])});
      out.push_back({r, t, Series::Y,
                     detail::safe_ratio(static_cast<double>(differentiated_at(ensemble[r], t)), expected.y[i])});
    }
  }
  return out;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return m;
}

// Linear-interpolated percentile (type 7), q in [0, 1].
inline double percentile(std::vector<double> v, double q) {
  if (!(q >= 0.0 && q <= 1.0)) throw Error(ErrorKind::InvalidArgument, "percentile level must lie in [0, 1]");
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double h = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace cellbp
