// SPDX-License-Identifier: Apache-2.0
#include "qptrap/specfun.hpp"

#include <cmath>
#include <stdexcept>

#include "qptrap/units.hpp"

namespace qptrap::specfun {

namespace {
constexpr double kInvE = 0.36787944117144232160;  // 1/e
constexpr double kBranchTol = 1e-12;
}  // namespace

double lambert_w0(double x) {
  if (!(x >= -kInvE - kBranchTol)) {
    throw std::domain_error("lambert_w0: argument below -1/e");
  }
  if (x <= -kInvE) return -1.0;  // clamped branch point
  if (x == 0.0) return 0.0;

  double w = (std::fabs(x) < 0.3) ? x : std::log(x + 1.0);
  for (int it = 0; it < 50; ++it) {
    const double ew = std::exp(w);
    const double f = w * ew - x;
    const double wp1 = w + 1.0;
    if (wp1 == 0.0) break;  // at the branch point the update is 0/0
    // Halley step for f(w) = w e^w - x.
    const double denom = ew * wp1 - (wp1 + 1.0) * f / (2.0 * wp1);
    double step = f / denom;
    double w_next = w - step;
    if (w_next < -1.0) w_next = -1.0 + 0.5 * (w + 1.0);  // stay on W0 branch
    const double dw = std::fabs(w_next - w);
    w = w_next;
    if (dw < 1e-14) break;
  }
  return w;
}

double polylog(int s, double x) {
  if (s != 2 && s != 3) throw std::domain_error("polylog: order must be 2 or 3");
  if (!(x >= 0.0 && x <= 1.0)) throw std::domain_error("polylog: argument outside [0,1]");
  if (x == 1.0) return s == 2 ? pi_sq_over_6 : zeta3;
  if (x == 0.0) return 0.0;

  // Direct series; the remaining tail after term_k is below term_k * x/(1-x).
  const double tail_scale = x / (1.0 - x);
  double sum = 0.0;
  double xk = 1.0;
  for (long k = 1; k < 4000000; ++k) {
    xk *= x;
    const double kd = static_cast<double>(k);
    const double term = (s == 2) ? xk / (kd * kd) : xk / (kd * kd * kd);
    sum += term;
    if (term * tail_scale < 1e-15) break;
  }
  return sum;
}

double debye_bracket(double u) {
  if (!(u >= 0.0)) throw std::domain_error("debye_bracket: u must be >= 0");
  if (u == 0.0) return 2.0 * zeta3;  // the u^2 ln term vanishes in the limit
  if (u > 700.0) return 0.0;
  const double x = std::exp(-u);
  const double log_term = -u * u * std::log1p(-x);
  return log_term + 2.0 * u * polylog(2, x) + 2.0 * polylog(3, x);
}

double debye_cutoff_term(double omega_d_rad_s, double temperature_k) {
  if (!(omega_d_rad_s > 0.0) || !(temperature_k > 0.0)) {
    throw std::domain_error("debye_cutoff_term: omega_D and T must be positive");
  }
  const double u = units::hbar_uev_s * omega_d_rad_s / (units::k_B * temperature_k);
  return debye_bracket(u);
}

}  // namespace qptrap::specfun
