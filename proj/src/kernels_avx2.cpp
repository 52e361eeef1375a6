// SPDX-License-Identifier: Apache-2.0

// AVX2+FMA kernel backend. Compiled with -mavx2 -mfma in its own
// translation unit; only the dispatcher may call into it, after checking
// CPU support at runtime.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>
#include <cstddef>

#include "kernels_internal.hpp"

namespace qptrap::kernels::avx2_impl {

namespace {

// exp on 4 doubles: round-to-nearest power-of-two reduction plus a
// degree-13 Taylor polynomial on |r| <= ln2/2. Matches std::exp to a few
// ulp over the clamped range; underflows to 0 below -708.
inline __m256d exp_pd(__m256d x) {
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634074);
  const __m256d ln2_hi = _mm256_set1_pd(6.93145751953125e-1);
  const __m256d ln2_lo = _mm256_set1_pd(1.42860682030941723212e-6);
  const __m256d lo_cut = _mm256_set1_pd(-708.0);
  const __m256d hi_cut = _mm256_set1_pd(708.0);

  const __m256d under = _mm256_cmp_pd(x, lo_cut, _CMP_LT_OQ);
  const __m256d over = _mm256_cmp_pd(x, hi_cut, _CMP_GT_OQ);
  __m256d xc = _mm256_max_pd(_mm256_min_pd(x, hi_cut), lo_cut);

  const __m256d n = _mm256_round_pd(_mm256_mul_pd(xc, log2e),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, ln2_hi, xc);
  r = _mm256_fnmadd_pd(n, ln2_lo, r);

  __m256d p = _mm256_set1_pd(1.6059043836821614599e-10);  // 1/13!
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.0876756987868098979e-9));   // 1/12!
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.5052108385441718775e-8));   // 1/11!
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.7557319223985890652e-7));   // 1/10!
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.7557319223985892511e-6));   // 1/9!
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.4801587301587301566e-5));   // 1/8!
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.9841269841269841253e-4));   // 1/7!
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.3888888888888889419e-3));   // 1/6!
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(8.3333333333333332177e-3));   // 1/5!
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(4.1666666666666664354e-2));   // 1/4!
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.6666666666666665741e-1));   // 1/3!
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(5.0e-1));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));

  // 2^n through the exponent field; n stays within +-1075 after clamping.
  const __m128i n32 = _mm256_cvtpd_epi32(n);
  const __m256i n64 = _mm256_cvtepi32_epi64(n32);
  const __m256i biased = _mm256_add_epi64(n64, _mm256_set1_epi64x(1023));
  const __m256d scale = _mm256_castsi256_pd(_mm256_slli_epi64(biased, 52));
  __m256d result = _mm256_mul_pd(p, scale);

  result = _mm256_andnot_pd(under, result);  // x < -708 -> 0
  result = _mm256_blendv_pd(result, _mm256_set1_pd(HUGE_VAL), over);
  return result;
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void emission_loglik(const float* iq, std::size_t n, const EmissionNat* states, int k_states,
                     double* out) {
  for (int k = 0; k < k_states; ++k) {
    const EmissionNat& s = states[k];
    double* row = out + static_cast<std::size_t>(k) * n;
    const __m256d center = _mm256_setr_pd(s.center_i, s.center_q, s.center_i, s.center_q);
    const __m256d itv = _mm256_setr_pd(s.inv_two_var_i, s.inv_two_var_q, s.inv_two_var_i,
                                       s.inv_two_var_q);
    const __m256d logn = _mm256_set1_pd(s.log_norm);
    std::size_t t = 0;
    for (; t + 4 <= n; t += 4) {
      const __m256 f = _mm256_loadu_ps(iq + 2 * t);
      const __m256d lo = _mm256_cvtps_pd(_mm256_castps256_ps128(f));
      const __m256d hi = _mm256_cvtps_pd(_mm256_extractf128_ps(f, 1));
      const __m256d dlo = _mm256_sub_pd(lo, center);
      const __m256d dhi = _mm256_sub_pd(hi, center);
      const __m256d elo = _mm256_mul_pd(_mm256_mul_pd(dlo, dlo), itv);
      const __m256d ehi = _mm256_mul_pd(_mm256_mul_pd(dhi, dhi), itv);
      // hadd yields [s0 s2 s1 s3]; permute back to sample order.
      const __m256d h = _mm256_hadd_pd(elo, ehi);
      const __m256d sum = _mm256_permute4x64_pd(h, _MM_SHUFFLE(3, 1, 2, 0));
      _mm256_storeu_pd(row + t, _mm256_sub_pd(logn, sum));
    }
    for (; t < n; ++t) {
      const double di = static_cast<double>(iq[2 * t]) - s.center_i;
      const double dq = static_cast<double>(iq[2 * t + 1]) - s.center_q;
      row[t] = s.log_norm - di * di * s.inv_two_var_i - dq * dq * s.inv_two_var_q;
    }
  }
}

void rowwise_max(const double* table, std::size_t n, int k_states, double* shift) {
  std::size_t t = 0;
  for (; t + 4 <= n; t += 4) {
    __m256d m = _mm256_loadu_pd(table + t);
    for (int k = 1; k < k_states; ++k) {
      m = _mm256_max_pd(m, _mm256_loadu_pd(table + static_cast<std::size_t>(k) * n + t));
    }
    _mm256_storeu_pd(shift + t, m);
  }
  for (; t < n; ++t) {
    double m = table[t];
    for (int k = 1; k < k_states; ++k) {
      const double v = table[static_cast<std::size_t>(k) * n + t];
      if (v > m) m = v;
    }
    shift[t] = m;
  }
}

void exp_shift(const double* table, const double* shift, std::size_t n, int k_states,
               double* out) {
  for (int k = 0; k < k_states; ++k) {
    const double* row = table + static_cast<std::size_t>(k) * n;
    double* orow = out + static_cast<std::size_t>(k) * n;
    std::size_t t = 0;
    for (; t + 4 <= n; t += 4) {
      const __m256d v = _mm256_sub_pd(_mm256_loadu_pd(row + t), _mm256_loadu_pd(shift + t));
      _mm256_storeu_pd(orow + t, exp_pd(v));
    }
    for (; t < n; ++t) orow[t] = std::exp(row[t] - shift[t]);
  }
}

void weighted_moments(const double* weights, const float* iq, std::size_t n, int k_states,
                      MomentSums* out) {
  for (int k = 0; k < k_states; ++k) {
    const double* w = weights + static_cast<std::size_t>(k) * n;
    __m256d acc_w = _mm256_setzero_pd();
    __m256d acc_x = _mm256_setzero_pd();   // paired [I Q I Q] weighted sums
    __m256d acc_xx = _mm256_setzero_pd();
    std::size_t t = 0;
    for (; t + 4 <= n; t += 4) {
      const __m256d g = _mm256_loadu_pd(w + t);
      const __m256 f = _mm256_loadu_ps(iq + 2 * t);
      const __m256d lo = _mm256_cvtps_pd(_mm256_castps256_ps128(f));
      const __m256d hi = _mm256_cvtps_pd(_mm256_extractf128_ps(f, 1));
      const __m256d glo = _mm256_permute4x64_pd(g, _MM_SHUFFLE(1, 1, 0, 0));
      const __m256d ghi = _mm256_permute4x64_pd(g, _MM_SHUFFLE(3, 3, 2, 2));
      acc_w = _mm256_add_pd(acc_w, g);
      acc_x = _mm256_fmadd_pd(glo, lo, acc_x);
      acc_x = _mm256_fmadd_pd(ghi, hi, acc_x);
      acc_xx = _mm256_fmadd_pd(_mm256_mul_pd(glo, lo), lo, acc_xx);
      acc_xx = _mm256_fmadd_pd(_mm256_mul_pd(ghi, hi), hi, acc_xx);
    }
    MomentSums m;
    m.w = hsum(acc_w);
    alignas(32) double x[4], xx[4];
    _mm256_store_pd(x, acc_x);
    _mm256_store_pd(xx, acc_xx);
    m.wi = x[0] + x[2];
    m.wq = x[1] + x[3];
    m.wii = xx[0] + xx[2];
    m.wqq = xx[1] + xx[3];
    for (; t < n; ++t) {
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
  if (k < 8) {  // window too short for the vector path to pay off
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
    return;
  }
  for (std::size_t w = 0; w < n_out; ++w) {
    const float* win = iq + 2 * w * static_cast<std::size_t>(k);
    __m256d acc = _mm256_setzero_pd();  // paired [I Q I Q]
    int j = 0;
    for (; j + 4 <= k; j += 4) {
      const __m256 f = _mm256_loadu_ps(win + 2 * j);
      acc = _mm256_add_pd(acc, _mm256_cvtps_pd(_mm256_castps256_ps128(f)));
      acc = _mm256_add_pd(acc, _mm256_cvtps_pd(_mm256_extractf128_ps(f, 1)));
    }
    alignas(32) double a[4];
    _mm256_store_pd(a, acc);
    double si = a[0] + a[2];
    double sq = a[1] + a[3];
    for (; j < k; ++j) {
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

}  // namespace qptrap::kernels::avx2_impl

#endif  // x86-64
