// SPDX-License-Identifier: Apache-2.0
#include "qptrap/physics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "qptrap/specfun.hpp"
#include "qptrap/units.hpp"

namespace qptrap::phys {

using std::numbers::pi;

GammaRoTable::GammaRoTable(std::vector<double> delta_a_uev, std::vector<double> gamma_hz)
    : knots_(std::move(delta_a_uev)), rates_(std::move(gamma_hz)) {
  if (knots_.size() != rates_.size() || knots_.empty()) {
    throw std::invalid_argument("GammaRoTable: knot/rate length mismatch or empty");
  }
  if (!std::is_sorted(knots_.begin(), knots_.end())) {
    throw std::invalid_argument("GammaRoTable: knots must be ascending");
  }
  for (double r : rates_) {
    if (!(r >= 0.0)) throw std::invalid_argument("GammaRoTable: rates must be >= 0");
  }
}

double GammaRoTable::operator()(double delta_a_uev) const {
  if (knots_.empty()) throw std::logic_error("GammaRoTable: empty table");
  if (delta_a_uev <= knots_.front()) return rates_.front();
  if (delta_a_uev >= knots_.back()) return rates_.back();
  const auto it = std::upper_bound(knots_.begin(), knots_.end(), delta_a_uev);
  const std::size_t hi = static_cast<std::size_t>(it - knots_.begin());
  const std::size_t lo = hi - 1;
  const double t = (delta_a_uev - knots_[lo]) / (knots_[hi] - knots_[lo]);
  return rates_[lo] + t * (rates_[hi] - rates_[lo]);
}

double abs_energy(double delta_phase_rad, double tau, double gap_uev) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::domain_error("abs_energy: tau outside [0,1]");
  const double s = std::sin(0.5 * delta_phase_rad);
  return gap_uev * std::sqrt(1.0 - tau * s * s);
}

double trap_depth(double flux_quanta, double gap_uev) {
  return gap_uev - std::fabs(abs_energy(pi * flux_quanta, 1.0, gap_uev));
}

double qp_density(double temperature_k, const TrapModelParams& p) {
  const double kbt = units::k_B * temperature_k;
  return p.x_ne + std::sqrt(2.0 * pi * kbt / p.gap_uev) * std::exp(-p.gap_uev / kbt);
}

double trap_rate(double delta_a_uev, double temperature_k, const TrapModelParams& p) {
  const double d3 = delta_a_uev * delta_a_uev * delta_a_uev;
  return p.beta_mhz_per_ev3 * d3 * units::beta_uev3_to_hz * qp_density(temperature_k, p);
}

double phonon_density(double delta_a_uev, double temperature_k, double sound_speed_m_s,
                      double debye_omega_rad_s) {
  const double cutoff_uev = units::hbar_uev_s * debye_omega_rad_s;
  if (!(cutoff_uev > delta_a_uev)) {
    throw std::domain_error("phonon_density: trap depth at or above the Debye cutoff");
  }
  const double kbt = units::k_B * temperature_k;
  const double u = delta_a_uev / kbt;
  // Finite upper integration limit removes the cutoff-tail contribution.
  const double tail = specfun::debye_bracket(u) - specfun::debye_cutoff_term(debye_omega_rad_s, temperature_k);
  const double kbt_si = units::k_B_si * temperature_k;
  const double scale = kbt_si / (units::hbar_si * sound_speed_m_s);
  return scale * scale * scale / (2.0 * pi * pi) * tail;
}

double phonon_release_rate(double delta_a_uev, double temperature_k, double alpha_mhz_per_k3) {
  const double u = delta_a_uev / (units::k_B * temperature_k);
  const double t3 = temperature_k * temperature_k * temperature_k;
  return alpha_mhz_per_k3 * units::mhz_to_hz * t3 * specfun::debye_bracket(u);
}

RateSet release_rate(double delta_a_uev, double temperature_k, double alpha_mhz_per_k3,
                     double gamma_ro_hz) {
  if (!(gamma_ro_hz >= 0.0)) throw std::domain_error("release_rate: Gamma_RO must be >= 0");
  RateSet r;
  r.readout_clear_hz = gamma_ro_hz;
  r.phonon_clear_hz = phonon_release_rate(delta_a_uev, temperature_k, alpha_mhz_per_k3);
  r.release_hz = r.readout_clear_hz + r.phonon_clear_hz;
  return r;
}

double mean_occupation(const RateSet& rates) {
  const double total = rates.trap_hz + rates.release_hz;
  if (!(total > 0.0)) throw std::domain_error("mean_occupation: both rates are zero");
  return rates.trap_hz / total;
}

double normalized_mean_occupation(double delta_a_uev, double temperature_k, double x_ne,
                                  double gap_uev, double alpha_m_per_k3) {
  const double kbt = units::k_B * temperature_k;
  const double thermal = std::sqrt(2.0 * pi * kbt / gap_uev) * std::exp(-gap_uev / kbt);
  const double numer = 1.0 + thermal / x_ne;
  const double t3 = temperature_k * temperature_k * temperature_k;
  const double denom = 1.0 + alpha_m_per_k3 * t3 * specfun::debye_bracket(delta_a_uev / kbt);
  return numer / denom;
}

}  // namespace qptrap::phys
