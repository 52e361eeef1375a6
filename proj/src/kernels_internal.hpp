// SPDX-License-Identifier: Apache-2.0
#pragma once

// Shared between the kernel backends and the dispatcher. Not installed.

#include <cstddef>

#include "qptrap/kernels.hpp"

namespace qptrap::kernels {

struct KernelOps {
  void (*emission_loglik)(const float*, std::size_t, const EmissionNat*, int, double*);
  void (*rowwise_max)(const double*, std::size_t, int, double*);
  void (*exp_shift)(const double*, const double*, std::size_t, int, double*);
  void (*weighted_moments)(const double*, const float*, std::size_t, int, MomentSums*);
  void (*boxcar_mean)(const float*, std::size_t, int, float*);
};

namespace scalar_impl {
extern const KernelOps ops;
}

// Defined only when the AVX2 translation unit is part of the build; the
// dispatcher references it under QPTRAP_WITH_AVX2.
namespace avx2_impl {
extern const KernelOps ops;
}

}  // namespace qptrap::kernels
