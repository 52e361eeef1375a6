// SPDX-License-Identifier: Apache-2.0
#pragma once

// Gaussian-emission hidden Markov model fitting (Baum-Welch), Viterbi
// decoding, the Poisson link between per-step transition probabilities
// and physical rates, and the gated record-analysis loop that enforces
// the SNR and mode-lifetime constraints with optional power
// bootstrapping.

#include <cstdint>
#include <optional>
#include <vector>

#include "qptrap/record.hpp"

namespace qptrap::hmm {

struct HmmModel {
  int n_states = 0;
  std::vector<double> trans;                // row-major n x n, row-stochastic
  std::vector<GaussianEmission> emissions;  // one per state, diagonal covariance
  std::vector<double> initial;              // length n
  double f_s = 0.0;
};

struct FitOptions {
  int max_iter = 50;
  double tol = 1e-3;          // stop when the log-likelihood gain drops below this
  double mass_floor = 20.0;   // minimum responsibility mass (samples) per state
};

struct FitInfo {
  double log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> state_mass;     // responsibility mass at the last M step
  std::vector<double> ll_history;     // log-likelihood after each E step
};

// Maximum-likelihood fit via EM with scaled forward-backward passes.
// Starts from init when given, otherwise from a deterministic clustering
// of the IQ samples. Throws StateCollapseError when a state's
// responsibility mass falls below the floor.
HmmModel fit_hmm(const Record& record, int n_states, const std::optional<HmmModel>& init = {},
                 const FitOptions& opt = {}, FitInfo* info = nullptr);

// Globally most likely state path; optionally reports its joint
// log-probability.
StateSequence viterbi(const HmmModel& model, const Record& record,
                      double* path_log_prob = nullptr);

// T = (Gamma/f_s) exp(-Gamma/f_s); maximum 1/e at Gamma = f_s.
double transition_prob_from_rate(double gamma_hz, double f_s);

// Gamma_ij = -f_s W0(-T_ij) for i != j (diagonal left 0). Off-diagonal
// probabilities above 1/e by more than 1e-9 throw IdentifiabilityError;
// smaller excursions clamp to the branch point.
std::vector<double> rates_from_transition_matrix(const std::vector<double>& trans, int n_states,
                                                 double f_s);

// lifetime_i = -1 / (f_s ln T_ii); infinity for T_ii = 1, error for 0.
std::vector<double> mode_lifetimes(const std::vector<double>& trans, int n_states, double f_s);

enum AnalysisFlags : std::uint32_t {
  flag_gate_failure = 1u << 0,       // SNR and lifetime constraints conflict
  flag_state_collapsed = 1u << 1,    // fewer modes than requested survive
  flag_rate_unresolvable = 1u << 2,  // some T_ij beyond 1/e, rate clamped to f_s
  flag_not_converged = 1u << 3,      // EM hit max_iter
};

struct AnalyzeOptions {
  int n_states = 3;
  double snr_min = 3.0;
  FitOptions fit;
  int max_downsample_steps = 12;
  std::size_t min_samples = 64;      // refuse to downsample below this
};

struct AnalysisResult {
  HmmModel model;
  StateSequence decoded;
  std::vector<double> rates_hz;      // n x n, off-diagonal entries
  double gamma_trap_hz = 0.0;        // 0 -> 1
  double gamma_release_hz = 0.0;     // 1 -> 0
  double n_bar = 0.0;                // decoded-path mean
  double effective_f_s = 0.0;
  double achieved_snr = 0.0;
  double log_likelihood = 0.0;
  std::uint32_t flags = 0;
  int downsample_factor = 1;
};

// Fit / gate / downsample loop: fits at the current rate, and while the
// fitted SNR is below snr_min boxcar-downsamples by 2 and refits, unless
// that would violate the lifetime guard 1/f_s <= lifetime_min/2. State
// collapse retries first without the init model, then with one state
// fewer. States are relabeled by ascending I center before rates are
// read off.
AnalysisResult analyze_record(const Record& record, const std::optional<HmmModel>& init = {},
                              const AnalyzeOptions& opt = {});

// Analyzes records in descending-power order, seeding each fit with the
// previous model; stops after the first gate failure and returns what
// was completed (the failed result included).
std::vector<AnalysisResult> bootstrap_powers(const std::vector<Record>& records,
                                             const AnalyzeOptions& opt = {});

}  // namespace qptrap::hmm
