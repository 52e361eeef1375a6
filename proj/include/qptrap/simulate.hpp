// SPDX-License-Identifier: Apache-2.0
#pragma once

// Synthetic telegraph-signal generation: hidden-state chains (continuous
// time or per-step discrete), Gaussian IQ emission, boxcar downsampling,
// and full (temperature x flux x power) sweep synthesis driven by the
// physics model.

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "qptrap/physics.hpp"
#include "qptrap/record.hpp"

namespace qptrap::sim {

// Continuous-time Markov chain with exponential dwell times, sampled and
// held at f_s. rates is row-major n x n with off-diagonal entries in Hz
// (diagonal ignored). The initial state is drawn from the stationary
// distribution unless initial_state is given; if every rate is zero the
// chain starts in state 0. Throws ConfigError if any rate is negative or
// at least f_s/2. If dwell_log is non-null it receives the exact
// (state, dwell seconds) pairs of every completed dwell.
StateSequence simulate_states_ctmc(const std::vector<double>& rates, int n_states, double f_s,
                                   double duration_s, std::uint64_t seed,
                                   std::optional<int> initial_state = {},
                                   std::vector<std::pair<int, double>>* dwell_log = nullptr);

// Discrete Markov chain stepping once per sample with the given
// row-stochastic transition matrix. Initial state from the chain's
// stationary distribution unless given. Throws ConfigError if a row does
// not sum to 1 within 1e-9 or has entries outside [0,1].
StateSequence simulate_states_discrete(const std::vector<double>& trans, int n_states, double f_s,
                                       double duration_s, std::uint64_t seed,
                                       std::optional<int> initial_state = {});

// Per-sample independent Gaussian IQ draws conditioned on the state.
Record emit_iq(const StateSequence& states, const std::vector<GaussianEmission>& emissions,
               std::uint64_t seed);

// Non-overlapping k-sample means; the trailing partial window is dropped
// and f_s divides by k. Throws ConfigError if k < 1 or k > sample count.
Record boxcar_downsample(const Record& record, int k);

// How measurement power maps to emission SNR: snr_ref at power_ref_dbm,
// one decade of SNR per 10 dBm.
struct EmissionPlan {
  double sigma_v = 1.0;          // per-axis emission width, both I and Q
  double snr_ref = 9.0;
  double power_ref_dbm = -133.0;

  double snr_at(double power_dbm) const;
  // State s sits at I = s * separation, Q = 0.
  std::vector<GaussianEmission> emissions_at(double power_dbm, int n_states) const;
};

enum class GeneratorMode { ctmc, discrete };

struct SweepSpec {
  std::vector<double> temperatures_k;
  std::vector<double> fluxes;
  std::vector<double> powers_dbm;
  // Records per grid point; either one entry per temperature or a single
  // entry applied to all.
  std::vector<int> segments;

  phys::TrapModelParams trap;
  double alpha_mhz_per_k3 = 0.0;
  phys::GammaRoTable gamma_ro;

  EmissionPlan plan;
  double f_s = 1e6;
  double duration_s = 3.0;
  GeneratorMode mode = GeneratorMode::ctmc;
  int n_states = 2;
  std::uint64_t base_seed = 1;
};

struct SweepPoint {
  Record record;
  StateSequence truth;
  double delta_a_uev = 0.0;
  double gamma_trap_hz = 0.0;     // generator ground truth
  double gamma_release_hz = 0.0;
  double plan_snr = 0.0;
  std::size_t index = 0;          // position in deterministic grid order
};

// Generates every (T, flux, power, segment) record and hands each to the
// sink in deterministic grid order. Seeds derive from base_seed and the
// grid index, so any subset regenerates identically.
void synthesize_sweep(const SweepSpec& spec, const std::function<void(SweepPoint&&)>& sink);

std::size_t sweep_record_count(const SweepSpec& spec);

}  // namespace qptrap::sim
