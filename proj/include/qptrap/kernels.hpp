// SPDX-License-Identifier: Apache-2.0
#pragma once

// Data-parallel inner loops shared by the simulator and the HMM: per-sample
// Gaussian log-densities, shifted exponentials, M-step moment sums, and
// boxcar window means. Each operation has a scalar reference kernel and,
// on x86-64, an AVX2 variant selected at runtime. Backends are
// equivalence-tested against each other; callers never see which one ran.
//
// Layout conventions: IQ records are interleaved float32 pairs
// [i0 q0 i1 q1 ...]; per-state tables are planar, table[k * n + t].

#include <cstddef>

namespace qptrap::kernels {

enum class Backend { scalar = 0, avx2 = 1 };

const char* backend_name(Backend b);

// Backend currently in use (resolved on first call from CPU features).
Backend active_backend();

// Force a specific backend, e.g. to test equivalence. Returns false and
// leaves the selection unchanged if the backend is unavailable here.
bool force_backend(Backend b);

// Diagonal 2D Gaussian in the form needed by the log-density loop.
struct EmissionNat {
  double center_i = 0.0;
  double center_q = 0.0;
  double inv_two_var_i = 0.0;  // 1 / (2 sigma_i^2)
  double inv_two_var_q = 0.0;
  double log_norm = 0.0;       // -log(2 pi sigma_i sigma_q)
};

struct MomentSums {
  double w = 0.0;    // sum of weights
  double wi = 0.0;   // weighted I sum
  double wq = 0.0;
  double wii = 0.0;  // weighted I^2 sum
  double wqq = 0.0;
};

// out[k*n + t] = log_norm_k - (I_t-ci_k)^2/(2 var) - (Q_t-cq_k)^2/(2 var)
void emission_loglik(const float* iq, std::size_t n, const EmissionNat* states, int k_states,
                     double* out);

// shift[t] = max over k of table[k*n + t]
void rowwise_max(const double* table, std::size_t n, int k_states, double* shift);

// out[k*n + t] = exp(table[k*n + t] - shift[t]); out may alias table.
void exp_shift(const double* table, const double* shift, std::size_t n, int k_states,
               double* out);

// Per-state weighted first/second moments of the IQ samples under the
// planar weight table (responsibilities).
void weighted_moments(const double* weights, const float* iq, std::size_t n, int k_states,
                      MomentSums* out);

// Non-overlapping k-sample means of interleaved IQ; writes n/k output
// pairs, dropping a trailing partial window.
void boxcar_mean(const float* iq, std::size_t n, int k, float* out);

}  // namespace qptrap::kernels
