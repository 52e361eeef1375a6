// SPDX-License-Identifier: Apache-2.0
#pragma once

// Special functions backing the rate models and the transition-probability
// inversion: principal-branch Lambert W, polylogarithms Li2/Li3 on [0,1],
// and the Debye tail bracket
//
//   bracket(u) = -u^2 ln(1-e^-u) + 2u Li2(e^-u) + 2 Li3(e^-u)
//              = integral_u^inf t^2/(e^t - 1) dt.
//
// All functions are pure and thread-safe.

namespace qptrap::specfun {

inline constexpr double zeta3 = 1.2020569031595942854;  // Li3(1)
inline constexpr double pi_sq_over_6 = 1.6449340668482264365;  // Li2(1)

// Principal branch W0, defined for x >= -1/e. Inputs within 1e-12 below
// the branch point are clamped to -1/e; anything lower throws
// std::domain_error. Relative accuracy ~1e-14 away from the branch point.
double lambert_w0(double x);

// Li_s(x) for s in {2,3}, 0 <= x <= 1. Throws std::domain_error outside
// that range or for unsupported s. Absolute accuracy better than 1e-12.
double polylog(int s, double x);

// bracket(u) above; u >= 0. bracket(0) = 2*zeta(3) analytically. Returns 0
// for u > 700 where every term underflows.
double debye_bracket(double u);

// The finite-Debye-cutoff boundary term f(omega_D, T): the same bracket
// evaluated at u = hbar*omega_D / (k_B T). omega_D in rad/s, T in kelvin.
double debye_cutoff_term(double omega_d_rad_s, double temperature_k);

}  // namespace qptrap::specfun
