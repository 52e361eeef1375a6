// SPDX-License-Identifier: Apache-2.0
#pragma once

// Closed-form physics: ABS energy and trap depth from flux, bulk QP
// density, trap rate, above-threshold phonon density and the phonon
// clearing rate, total release rate, and the stationary mean occupation.
//
// Units follow qptrap/units.hpp: energies ueV, temperatures K, rates Hz.

#include <cstddef>
#include <vector>

namespace qptrap::phys {

// Junction/device constants. f0/kappa/chi are carried as metadata only
// and never enter rate computations.
struct DeviceParams {
  double gap_uev = 185.0;          // superconducting gap
  double transparency = 1.0;       // tau in [0,1]
  double base_resonance_ghz = 0.0;
  double linewidth_rad_s = 0.0;
  double dispersive_shift_rad_s = 0.0;
};

struct TrapModelParams {
  double beta_mhz_per_ev3 = 0.0;  // spontaneous-emission scale
  double x_ne = 0.0;              // non-equilibrium fractional QP density
  double gap_uev = 185.0;
};

struct PhononModelParams {
  double alpha_mhz_per_k3 = 0.0;   // clearing scale, combines C and nu
  double sound_speed_m_s = 0.0;    // informational
  double debye_omega_rad_s = 0.0;
  double coupling_rate_m3 = 0.0;   // C_ABS->bulk, informational
};

struct RateSet {
  double trap_hz = 0.0;
  double release_hz = 0.0;
  double readout_clear_hz = 0.0;
  double phonon_clear_hz = 0.0;
};

// Readout-photon clearing rate vs trap depth, piecewise-linear between
// knots and clamped flat outside them. The physics behind it is left free.
class GammaRoTable {
 public:
  GammaRoTable() = default;
  GammaRoTable(std::vector<double> delta_a_uev, std::vector<double> gamma_hz);

  double operator()(double delta_a_uev) const;
  bool empty() const { return knots_.empty(); }
  std::size_t size() const { return knots_.size(); }
  double knot(std::size_t i) const { return knots_.at(i); }
  double rate(std::size_t i) const { return rates_.at(i); }

 private:
  std::vector<double> knots_;   // ascending depths, ueV
  std::vector<double> rates_;   // Hz
};

// E_A = gap * sqrt(1 - tau sin^2(delta/2)), positive branch.
double abs_energy(double delta_phase_rad, double tau, double gap_uev);

// Delta_A = gap * (1 - |cos(pi phi / 2)|), the tau -> 1 limit with the
// symmetric phase bias delta = pi phi.
double trap_depth(double flux_quanta, double gap_uev);

// x(T) = x_ne + sqrt(2 pi k_B T / gap) exp(-gap / k_B T).
double qp_density(double temperature_k, const TrapModelParams& p);

// Gamma_trap = beta * Delta_A^3 * x(T), in Hz.
double trap_rate(double delta_a_uev, double temperature_k, const TrapModelParams& p);

// Density of phonons with energy >= Delta_A, in 1/m^3, including the
// finite-Debye-cutoff correction. Throws if hbar*omega_D <= Delta_A.
double phonon_density(double delta_a_uev, double temperature_k, double sound_speed_m_s,
                      double debye_omega_rad_s);

// Gamma_phonon = alpha * T^3 * bracket(Delta_A / k_B T), in Hz.
double phonon_release_rate(double delta_a_uev, double temperature_k, double alpha_mhz_per_k3);

// Gamma_release = Gamma_RO + Gamma_phonon; fills the full RateSet.
RateSet release_rate(double delta_a_uev, double temperature_k, double alpha_mhz_per_k3,
                     double gamma_ro_hz);

// Stationary two-state occupation n = Gamma_trap / (Gamma_trap + Gamma_release).
double mean_occupation(const RateSet& rates);

// ||n||(T): trap/release temperature factors with the low-T saturation
// divided out; alpha_m in 1/K^3.
double normalized_mean_occupation(double delta_a_uev, double temperature_k, double x_ne,
                                  double gap_uev, double alpha_m_per_k3);

}  // namespace qptrap::phys
