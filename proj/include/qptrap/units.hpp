// SPDX-License-Identifier: Apache-2.0
#pragma once

// Canonical internal units: energy in ueV, temperature in K, rates in Hz,
// frequency in GHz. Conversions to other unit systems happen at call
// boundaries, never inside model formulas.

namespace qptrap::units {

// Boltzmann constant, ueV per kelvin.
inline constexpr double k_B = 86.173303;

// Planck constant, ueV per GHz (E = h * f).
inline constexpr double h_planck = 4.13566770;

// GHz per ueV, the inverse of h_planck.
inline constexpr double ghz_per_uev = 1.0 / h_planck;

// Reduced Planck constant, ueV * s (for angular frequencies in rad/s).
inline constexpr double hbar_uev_s = h_planck / (2.0 * 3.14159265358979323846) * 1e-9;

// SI values, used only where an absolute density (1/m^3) is required.
inline constexpr double k_B_si = 1.380649e-23;        // J/K
inline constexpr double hbar_si = 1.054571817e-34;    // J*s

inline constexpr double uev_from_ghz(double f_ghz) { return f_ghz * h_planck; }
inline constexpr double ghz_from_uev(double e_uev) { return e_uev * ghz_per_uev; }

// Rate-model scale factors. beta is quoted in MHz/eV^3 and trap depths in
// ueV, so beta * dA^3 carries a factor (1e-6 eV/ueV)^3 * 1e6 Hz/MHz.
inline constexpr double beta_uev3_to_hz = 1e-12;
// alpha is quoted in MHz/K^3; T^3 * bracket is dimensionless * K^3.
inline constexpr double mhz_to_hz = 1e6;

}  // namespace qptrap::units
