// SPDX-License-Identifier: Apache-2.0

#include "qptrap/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "linalg_internal.hpp"
#include "qptrap/errors.hpp"
#include "qptrap/kernels.hpp"
#include "qptrap/rng.hpp"
#include "qptrap/specfun.hpp"

namespace qptrap::sim {

namespace {

std::size_t sample_count(double f_s, double duration_s) {
  if (f_s <= 0.0) throw ConfigError("sample rate must be positive");
  if (duration_s <= 0.0) throw ConfigError("duration must be positive");
  return static_cast<std::size_t>(std::llround(f_s * duration_s));
}

// Stationary distribution of a CTMC generator built from off-diagonal
// rates: solve pi Q = 0 with sum(pi) = 1. Returns empty on a singular
// system (for example the all-zero generator).
std::vector<double> ctmc_stationary(const std::vector<double>& rates, int n) {
  std::vector<double> a(static_cast<std::size_t>(n) * n, 0.0);
  std::vector<double> b(n, 0.0);
  // Rows 0..n-2: columns of Q^T; last row: normalization.
  for (int j = 0; j < n - 1; ++j) {
    for (int i = 0; i < n; ++i) {
      double q_ij;
      if (i == j) {
        q_ij = 0.0;
        for (int k = 0; k < n; ++k)
          if (k != i) q_ij -= rates[static_cast<std::size_t>(i) * n + k];
      } else {
        q_ij = rates[static_cast<std::size_t>(i) * n + j];
      }
      a[static_cast<std::size_t>(j) * n + i] = q_ij;
    }
  }
  for (int i = 0; i < n; ++i) a[static_cast<std::size_t>(n - 1) * n + i] = 1.0;
  b[n - 1] = 1.0;
  if (!detail::solve_inplace(a, b, n, 1e-30)) return {};
  for (double& p : b) p = std::max(0.0, p);
  double total = 0.0;
  for (double p : b) total += p;
  if (total <= 0.0) return {};
  for (double& p : b) p /= total;
  return b;
}

// Stationary distribution of a row-stochastic matrix: pi (T - I) = 0.
std::vector<double> dtmc_stationary(const std::vector<double>& trans, int n) {
  std::vector<double> a(static_cast<std::size_t>(n) * n, 0.0);
  std::vector<double> b(n, 0.0);
  for (int j = 0; j < n - 1; ++j)
    for (int i = 0; i < n; ++i)
      a[static_cast<std::size_t>(j) * n + i] =
          trans[static_cast<std::size_t>(i) * n + j] - (i == j ? 1.0 : 0.0);
  for (int i = 0; i < n; ++i) a[static_cast<std::size_t>(n - 1) * n + i] = 1.0;
  b[n - 1] = 1.0;
  if (!detail::solve_inplace(a, b, n, 1e-30)) return {};
  for (double& p : b) p = std::max(0.0, p);
  double total = 0.0;
  for (double p : b) total += p;
  if (total <= 0.0) return {};
  for (double& p : b) p /= total;
  return b;
}

int draw_initial(rng::Stream& stream, const std::vector<double>& pi, int n) {
  if (pi.empty()) return 0;
  return stream.categorical(pi.data(), n);
}

}  // namespace

StateSequence simulate_states_ctmc(const std::vector<double>& rates, int n_states, double f_s,
                                   double duration_s, std::uint64_t seed,
                                   std::optional<int> initial_state,
                                   std::vector<std::pair<int, double>>* dwell_log) {
  if (n_states < 1 || rates.size() != static_cast<std::size_t>(n_states) * n_states)
    throw ConfigError("rate matrix size does not match n_states");
  for (int i = 0; i < n_states; ++i) {
    for (int j = 0; j < n_states; ++j) {
      if (i == j) continue;
      const double r = rates[static_cast<std::size_t>(i) * n_states + j];
      if (r < 0.0) throw ConfigError("negative transition rate");
      if (r >= 0.5 * f_s)
        throw ConfigError("transition rate " + std::to_string(r) +
                          " Hz reaches half the sample rate; increase f_s");
    }
  }
  const std::size_t n = sample_count(f_s, duration_s);

  rng::Stream stream(seed);
  int state = initial_state ? *initial_state : draw_initial(stream, ctmc_stationary(rates, n_states), n_states);
  if (state < 0 || state >= n_states) throw ConfigError("initial state out of range");

  StateSequence out;
  out.f_s = f_s;
  out.states.resize(n);

  const double dt = 1.0 / f_s;
  std::vector<double> exit_weights(n_states, 0.0);
  auto exit_rate = [&](int s) {
    double total = 0.0;
    for (int j = 0; j < n_states; ++j)
      if (j != s) total += rates[static_cast<std::size_t>(s) * n_states + j];
    return total;
  };

  double t_jump;  // absolute time of the next state change
  double dwell_start = 0.0;
  {
    const double ex = exit_rate(state);
    t_jump = ex > 0.0 ? stream.exponential(ex) : std::numeric_limits<double>::infinity();
  }
  for (std::size_t k = 0; k < n; ++k) {
    const double t_k = static_cast<double>(k) * dt;
    while (t_jump <= t_k) {
      for (int j = 0; j < n_states; ++j)
        exit_weights[j] = j == state ? 0.0 : rates[static_cast<std::size_t>(state) * n_states + j];
      const int next = stream.categorical(exit_weights.data(), n_states);
      if (dwell_log) dwell_log->push_back({state, t_jump - dwell_start});
      dwell_start = t_jump;
      state = next;
      const double ex = exit_rate(state);
      t_jump += ex > 0.0 ? stream.exponential(ex) : std::numeric_limits<double>::infinity();
    }
    out.states[k] = static_cast<std::uint8_t>(state);
  }
  return out;
}

StateSequence simulate_states_discrete(const std::vector<double>& trans, int n_states, double f_s,
                                       double duration_s, std::uint64_t seed,
                                       std::optional<int> initial_state) {
  if (n_states < 1 || trans.size() != static_cast<std::size_t>(n_states) * n_states)
    throw ConfigError("transition matrix size does not match n_states");
  for (int i = 0; i < n_states; ++i) {
    double row = 0.0;
    for (int j = 0; j < n_states; ++j) {
      const double p = trans[static_cast<std::size_t>(i) * n_states + j];
      if (p < 0.0 || p > 1.0) throw ConfigError("transition probability outside [0,1]");
      row += p;
    }
    if (std::fabs(row - 1.0) > 1e-9)
      throw ConfigError("transition matrix row " + std::to_string(i) + " sums to " +
                        std::to_string(row));
  }
  const std::size_t n = sample_count(f_s, duration_s);

  rng::Stream stream(seed);
  int state = initial_state ? *initial_state : draw_initial(stream, dtmc_stationary(trans, n_states), n_states);
  if (state < 0 || state >= n_states) throw ConfigError("initial state out of range");

  StateSequence out;
  out.f_s = f_s;
  out.states.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    out.states[k] = static_cast<std::uint8_t>(state);
    state = stream.categorical(trans.data() + static_cast<std::size_t>(state) * n_states, n_states);
  }
  return out;
}

Record emit_iq(const StateSequence& states, const std::vector<GaussianEmission>& emissions,
               std::uint64_t seed) {
  for (std::uint8_t s : states.states) {
    if (s >= emissions.size()) throw ConfigError("state without an emission definition");
  }
  Record out;
  out.f_s = states.f_s;
  out.meta.seed = seed;
  out.iq.resize(states.size() * 2);
  rng::Stream stream(seed);
  for (std::size_t t = 0; t < states.size(); ++t) {
    const GaussianEmission& e = emissions[states.states[t]];
    const auto [zi, zq] = stream.normal_pair();
    out.iq[2 * t] = static_cast<float>(e.center_i + e.sigma_i * zi);
    out.iq[2 * t + 1] = static_cast<float>(e.center_q + e.sigma_q * zq);
  }
  return out;
}

Record boxcar_downsample(const Record& record, int k) {
  if (k < 1) throw ConfigError("downsample factor must be >= 1");
  if (static_cast<std::size_t>(k) > record.size())
    throw ConfigError("downsample factor exceeds sample count");
  if (k == 1) return record;
  Record out;
  out.f_s = record.f_s / k;
  out.meta = record.meta;
  const std::size_t n_out = record.size() / static_cast<std::size_t>(k);
  out.iq.resize(n_out * 2);
  kernels::boxcar_mean(record.iq.data(), record.size(), k, out.iq.data());
  return out;
}

double EmissionPlan::snr_at(double power_dbm) const {
  return snr_ref * std::pow(10.0, (power_dbm - power_ref_dbm) / 10.0);
}

std::vector<GaussianEmission> EmissionPlan::emissions_at(double power_dbm, int n_states) const {
  const double separation = sigma_v * std::sqrt(snr_at(power_dbm));
  std::vector<GaussianEmission> out(n_states);
  for (int s = 0; s < n_states; ++s) {
    out[s].center_i = separation * s;
    out[s].center_q = 0.0;
    out[s].sigma_i = sigma_v;
    out[s].sigma_q = sigma_v;
  }
  return out;
}

std::size_t sweep_record_count(const SweepSpec& spec) {
  std::size_t total = 0;
  for (std::size_t ti = 0; ti < spec.temperatures_k.size(); ++ti) {
    const int segs = spec.segments.empty()
                         ? 1
                         : spec.segments.size() == 1 ? spec.segments[0] : spec.segments.at(ti);
    total += spec.fluxes.size() * std::max<std::size_t>(spec.powers_dbm.size(), 1) *
             static_cast<std::size_t>(segs);
  }
  return total;
}

void synthesize_sweep(const SweepSpec& spec, const std::function<void(SweepPoint&&)>& sink) {
  if (spec.temperatures_k.empty() || spec.fluxes.empty())
    throw ConfigError("sweep grid must list at least one temperature and one flux");
  if (!spec.segments.empty() && spec.segments.size() != 1 &&
      spec.segments.size() != spec.temperatures_k.size())
    throw ConfigError("segments must be scalar or one entry per temperature");
  if (spec.n_states != 2)
    throw ConfigError("sweep synthesis models the two occupancy states 0 and 1");
  const std::vector<double> powers =
      spec.powers_dbm.empty() ? std::vector<double>{spec.plan.power_ref_dbm} : spec.powers_dbm;

  std::size_t index = 0;
  for (std::size_t ti = 0; ti < spec.temperatures_k.size(); ++ti) {
    const double temp = spec.temperatures_k[ti];
    const int segs = spec.segments.empty()
                         ? 1
                         : spec.segments.size() == 1 ? spec.segments[0] : spec.segments[ti];
    for (double flux : spec.fluxes) {
      const double delta_a = phys::trap_depth(flux, spec.trap.gap_uev);
      const double g_trap = phys::trap_rate(delta_a, temp, spec.trap);
      const phys::RateSet rates =
          phys::release_rate(delta_a, temp, spec.alpha_mhz_per_k3, spec.gamma_ro(delta_a));
      for (double power : powers) {
        const auto emissions = spec.plan.emissions_at(power, spec.n_states);
        for (int seg = 0; seg < segs; ++seg, ++index) {
          const std::uint64_t state_seed = rng::mix(spec.base_seed, 2 * index);
          const std::uint64_t noise_seed = rng::mix(spec.base_seed, 2 * index + 1);

          StateSequence truth;
          if (spec.mode == GeneratorMode::ctmc) {
            const std::vector<double> rmat = {0.0, g_trap, rates.release_hz, 0.0};
            truth = simulate_states_ctmc(rmat, 2, spec.f_s, spec.duration_s, state_seed);
          } else {
            const double a = g_trap / spec.f_s;
            const double b = rates.release_hz / spec.f_s;
            const double t01 = a * std::exp(-a);
            const double t10 = b * std::exp(-b);
            const std::vector<double> tmat = {1.0 - t01, t01, t10, 1.0 - t10};
            truth = simulate_states_discrete(tmat, 2, spec.f_s, spec.duration_s, state_seed);
          }

          SweepPoint point;
          point.record = emit_iq(truth, emissions, noise_seed);
          point.record.meta.temperature_k = temp;
          point.record.meta.flux = flux;
          point.record.meta.power_dbm = power;
          point.record.meta.seed = state_seed;
          point.truth = std::move(truth);
          point.delta_a_uev = delta_a;
          point.gamma_trap_hz = g_trap;
          point.gamma_release_hz = rates.release_hz;
          point.plan_snr = spec.plan.snr_at(power);
          point.index = index;
          sink(std::move(point));
        }
      }
    }
  }
}

}  // namespace qptrap::sim
