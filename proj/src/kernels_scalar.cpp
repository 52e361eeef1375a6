// SPDX-License-Identifier: Apache-2.0

// Reference kernels. Straight-line portable code; the SIMD backends must
// agree with these within floating-point reassociation tolerance.

#include <cmath>
#include <cstddef>

#include "kernels_internal.hpp"

namespace qptrap::kernels::scalar_impl {

namespace {

void emission_loglik(const float* iq, std::size_t n, const EmissionNat* states, int k_states,
                     double* out) {
  for (int k = 0; k < k_states; ++k) {
    const EmissionNat& s = states[k];
    double* row = out + static_cast<std::size_t>(k) * n;
    for (std::size_t t = 0; t < n; ++t) {
      const double di = static_cast<double>(iq[2 * t]) - s.center_i;
      const double dq = static_cast<double>(iq[2 * t + 1]) - s.center_q;
      row[t] = s.log_norm - di * di * s.inv_two_var_i - dq * dq * s.inv_two_var_q;
    }
  }
}

void rowwise_max(const double* table, std::size_t n, int k_states, double* shift) {
  for (std::size_t t = 0; t < n; ++t) shift[t] = table[t];
  for (int k = 1; k < k_states; ++k) {
    const double* row = table + static_cast<std::size_t>(k) * n;
    for (std::size_t t = 0; t < n; ++t) {
      if (row[t] > shift[t]) shift[t] = row[t];
    }
  }
}

void exp_shift(const double* table, const double* shift, std::size_t n, int k_states,
               double* out) {
  for (int k = 0; k < k_states; ++k) {
    const double* row = table + static_cast<std::size_t>(k) * n;
    double* orow = out + static_cast<std::size_t>(k) * n;
    for (std::size_t t = 0; t < n; ++t) {
      orow[t] = std::exp(row[t] - shift[t]);
    }
  }
}

void weighted_moments(const double* weights, const float* iq, std::size_t n, int k_states,
                      MomentSums* out) {
  for (int k = 0; k < k_states; ++k) {
    const double* w = weights + static_cast<std::size_t>(k) * n;
    MomentSums m;
    for (std::size_t t = 0; t < n; ++t) {
      const double i = static_cast<double>(iq[2 * t]);
      const double q = static_cast<double>(iq[2 * t + 1]);
      m.w += w[t];
      m.wi += w[t] * i;
      m.wq += w[t] * q;
      m.wii += w[t] * i * i;
      m.wqq += w[t] * q * q;
    }
    out[k] = m;
  }
}

void boxcar_mean(const float* iq, std::size_t n, int k, float* out) {
  const std::size_t n_out = n / static_cast<std::size_t>(k);
  const double inv_k = 1.0 / static_cast<double>(k);
  for (std::size_t w = 0; w < n_out; ++w) {
    const float* win = iq + 2 * w * static_cast<std::size_t>(k);
    double si = 0.0, sq = 0.0;
    for (int j = 0; j < k; ++j) {
      si += static_cast<double>(win[2 * j]);
      sq += static_cast<double>(win[2 * j + 1]);
    }
    out[2 * w] = static_cast<float>(si * inv_k);
    out[2 * w + 1] = static_cast<float>(sq * inv_k);
  }
}

}  // namespace

const KernelOps ops = {
    emission_loglik, rowwise_max, exp_shift, weighted_moments, boxcar_mean,
};

}  // namespace qptrap::kernels::scalar_impl
