// SPDX-License-Identifier: Apache-2.0

#include "qptrap/kernels.hpp"

#include <atomic>
#include <stdexcept>

#include "kernels_internal.hpp"

namespace qptrap::kernels {

namespace {

std::atomic<const KernelOps*> g_active{nullptr};

const KernelOps* best_available() {
#ifdef QPTRAP_WITH_AVX2
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
    return &avx2_impl::ops;
  }
#endif
  return &scalar_impl::ops;
}

const KernelOps* active() {
  const KernelOps* p = g_active.load(std::memory_order_acquire);
  if (p == nullptr) {
    p = best_available();
    g_active.store(p, std::memory_order_release);
  }
  return p;
}

}  // namespace

Backend active_backend() {
#ifdef QPTRAP_WITH_AVX2
  if (active() == &avx2_impl::ops) return Backend::avx2;
#endif
  active();
  return Backend::scalar;
}

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::scalar:
      return "scalar";
    case Backend::avx2:
      return "avx2";
  }
  return "unknown";
}

bool force_backend(Backend b) {
  switch (b) {
    case Backend::scalar:
      g_active.store(&scalar_impl::ops, std::memory_order_release);
      return true;
    case Backend::avx2:
#ifdef QPTRAP_WITH_AVX2
      if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
        g_active.store(&avx2_impl::ops, std::memory_order_release);
        return true;
      }
#endif
      return false;
  }
  return false;
}

void emission_loglik(const float* iq, std::size_t n, const EmissionNat* states, int k_states,
                     double* out) {
  active()->emission_loglik(iq, n, states, k_states, out);
}

void rowwise_max(const double* table, std::size_t n, int k_states, double* shift) {
  active()->rowwise_max(table, n, k_states, shift);
}

void exp_shift(const double* table, const double* shift, std::size_t n, int k_states,
               double* out) {
  active()->exp_shift(table, shift, n, k_states, out);
}

void weighted_moments(const double* weights, const float* iq, std::size_t n, int k_states,
                      MomentSums* out) {
  active()->weighted_moments(weights, iq, n, k_states, out);
}

void boxcar_mean(const float* iq, std::size_t n, int k, float* out) {
  if (k <= 0) throw std::invalid_argument("boxcar_mean: window must be positive");
  active()->boxcar_mean(iq, n, k, out);
}

}  // namespace qptrap::kernels
