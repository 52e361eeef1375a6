// SPDX-License-Identifier: Apache-2.0
#pragma once

// Independent reference implementations used only by the tests. These
// favor brute-force methods (bisection, long-double series, adaptive
// quadrature) that cannot share bugs with the library's fast paths.

#include <cmath>
#include <functional>
#include <vector>

namespace oracles {

// Solves w e^w = x by bisection; valid for x >= -1/e on the principal
// branch (w >= -1). Roughly 1e-15 absolute accuracy.
inline double lambert_w0_bisect(double x) {
  double lo = -1.0;
  double hi = 1.0;
  while (hi * std::exp(hi) < x) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid * std::exp(mid) < x)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// Direct power-series sum in long double. Geometric convergence for
// x < 1; do not call at x = 1.
inline long double polylog_series(int s, long double x) {
  long double sum = 0.0L;
  long double xk = 1.0L;
  for (long k = 1; k < 20000000L; ++k) {
    xk *= x;
    long double term = xk;
    for (int j = 0; j < s; ++j) term /= static_cast<long double>(k);
    sum += term;
    if (term < 1e-24L) break;
  }
  return sum;
}

namespace detail {

inline double simpson(double a, double fa, double b, double fb, double fm) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_step(const std::function<double(double)>& f, double a, double fa,
                            double b, double fb, double m, double fm, double whole, double eps,
                            int depth) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson(a, fa, m, fm, flm);
  const double right = simpson(m, fm, b, fb, frm);
  if (depth <= 0 || std::fabs(left + right - whole) <= 15.0 * eps)
    return left + right + (left + right - whole) / 15.0;
  return adaptive_step(f, a, fa, m, fm, lm, flm, left, 0.5 * eps, depth - 1) +
         adaptive_step(f, m, fm, b, fb, rm, frm, right, 0.5 * eps, depth - 1);
}

}  // namespace detail

// Adaptive Simpson quadrature of f over [a, b] to absolute accuracy eps.
inline double adaptive_quad(const std::function<double(double)>& f, double a, double b,
                            double eps) {
  const double m = 0.5 * (a + b);
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(m);
  const double whole = detail::simpson(a, fa, b, fb, fm);
  return detail::adaptive_step(f, a, fa, b, fb, m, fm, whole, eps, 48);
}

// integral_u^inf t^2/(e^t - 1) dt. The tail beyond t = u + 80 is below
// e^-(u+80) (t^2 + ...), vastly under the quadrature tolerance.
inline double bracket_quad(double u, double eps = 1e-13) {
  const auto f = [](double t) {
    if (t < 1e-8) return t > 0.0 ? t : 0.0;
    return t * t / std::expm1(t);
  };
  const double upper = u + 80.0;
  return adaptive_quad(f, u, upper, eps);
}

// Sample mean and variance (for CLT-style statistical checks).
struct Moments {
  double mean = 0.0;
  double var = 0.0;
  std::size_t n = 0;
};

template <typename It>
Moments moments(It begin, It end) {
  Moments m;
  double sum = 0.0;
  for (It it = begin; it != end; ++it) {
    sum += static_cast<double>(*it);
    ++m.n;
  }
  if (m.n == 0) return m;
  m.mean = sum / static_cast<double>(m.n);
  double ss = 0.0;
  for (It it = begin; it != end; ++it) {
    const double d = static_cast<double>(*it) - m.mean;
    ss += d * d;
  }
  m.var = m.n > 1 ? ss / static_cast<double>(m.n - 1) : 0.0;
  return m;
}

// One-sample Kolmogorov-Smirnov statistic against an exponential
// distribution with the given mean; values must be sorted ascending.
inline double ks_exponential(const std::vector<double>& sorted, double mean) {
  const auto n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double cdf = 1.0 - std::exp(-sorted[i] / mean);
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n;
    d = std::max(d, std::max(std::fabs(cdf - lo), std::fabs(cdf - hi)));
  }
  return d;
}

}  // namespace oracles
