#pragma once

#include <cmath>

namespace cellbp {

struct QuadratureOptions {
  double abs_tol = 1e-10;
  int max_depth = 50;
};

namespace detail {

template <class F>
double simpson_step(const F& f, double a, double b, double fa, double fm, double fb,
                    double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

// Adaptive Simpson with Richardson correction. The interval is pre-split into
// four panels so that a narrow feature cannot be missed by the first estimate.
template <class F>
double integrate(const F& f, double a, double b, QuadratureOptions opts = {}) {
  if (a == b) return 0.0;
  if (b < a) return -integrate(f, b, a, opts);
  constexpr int kPanels = 4;
  const double h = (b - a) / kPanels;
  double total = 0.0;
  double x0 = a;
  double f0 = f(a);
  for (int i = 0; i < kPanels; ++i) {
    const double x1 = (i + 1 == kPanels) ? b : a + (i + 1) * h;
    const double xm = 0.5 * (x0 + x1);
    const double fm = f(xm);
    const double f1 = f(x1);
    const double whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
    total += detail::simpson_step(f, x0, x1, f0, fm, f1, whole,
                                  opts.abs_tol / kPanels, opts.max_depth);
    x0 = x1;
    f0 = f1;
  }
  return total;
}

}  // namespace cellbp
