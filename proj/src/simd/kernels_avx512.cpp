// Compiled with -mavx512f -mfma; only reached after a CPUID check.
#include <immintrin.h>

#include "stegan/simd/kernels.hpp"

namespace stegan::simd::avx512 {
namespace {

constexpr int kMr = 12;
constexpr int kNr = 32;

void micro_kernel(std::int64_t kc, const float* a, const float* b, float* c,
                  std::int64_t ldc, bool accumulate) {
  __m512 acc[kMr][2];
#pragma GCC unroll 12
  for (int i = 0; i < kMr; ++i) {
    acc[i][0] = _mm512_setzero_ps();
    acc[i][1] = _mm512_setzero_ps();
  }
  for (std::int64_t p = 0; p < kc; ++p) {
    const __m512 b0 = _mm512_loadu_ps(b);
    const __m512 b1 = _mm512_loadu_ps(b + 16);
#pragma GCC unroll 12
    for (int i = 0; i < kMr; ++i) {
      const __m512 av = _mm512_set1_ps(a[i]);
      acc[i][0] = _mm512_fmadd_ps(av, b0, acc[i][0]);
      acc[i][1] = _mm512_fmadd_ps(av, b1, acc[i][1]);
    }
    a += kMr;
    b += kNr;
  }
#pragma GCC unroll 12
  for (int i = 0; i < kMr; ++i) {
    float* row = c + i * ldc;
    __m512 lo = acc[i][0];
    __m512 hi = acc[i][1];
    if (accumulate) {
      lo = _mm512_add_ps(lo, _mm512_loadu_ps(row));
      hi = _mm512_add_ps(hi, _mm512_loadu_ps(row + 16));
    }
    _mm512_storeu_ps(row, lo);
    _mm512_storeu_ps(row + 16, hi);
  }
}

inline __mmask16 tail_mask(std::size_t remaining) {
  return static_cast<__mmask16>((1u << remaining) - 1u);
}

void leaky_relu(const float* x, float* y, std::size_t n, float slope) {
  const __m512 s = _mm512_set1_ps(slope);
  const __m512 zero = _mm512_setzero_ps();
  for (std::size_t i = 0; i < n; i += 16) {
    const __mmask16 m = n - i >= 16 ? static_cast<__mmask16>(0xFFFF) : tail_mask(n - i);
    const __m512 v = _mm512_maskz_loadu_ps(m, x + i);
    const __mmask16 pos = _mm512_cmp_ps_mask(v, zero, _CMP_GT_OQ);
    _mm512_mask_storeu_ps(y + i, m, _mm512_mask_blend_ps(pos, _mm512_mul_ps(v, s), v));
  }
}

void leaky_relu_backward(const float* x, const float* gy, float* gx, std::size_t n,
                         float slope) {
  const __m512 s = _mm512_set1_ps(slope);
  const __m512 zero = _mm512_setzero_ps();
  for (std::size_t i = 0; i < n; i += 16) {
    const __mmask16 m = n - i >= 16 ? static_cast<__mmask16>(0xFFFF) : tail_mask(n - i);
    const __m512 g = _mm512_maskz_loadu_ps(m, gy + i);
    const __mmask16 pos = _mm512_cmp_ps_mask(_mm512_maskz_loadu_ps(m, x + i), zero, _CMP_GT_OQ);
    _mm512_mask_storeu_ps(gx + i, m, _mm512_mask_blend_ps(pos, _mm512_mul_ps(g, s), g));
  }
}

void axpy(float a, const float* x, float* y, std::size_t n) {
  const __m512 av = _mm512_set1_ps(a);
  for (std::size_t i = 0; i < n; i += 16) {
    const __mmask16 m = n - i >= 16 ? static_cast<__mmask16>(0xFFFF) : tail_mask(n - i);
    const __m512 r = _mm512_fmadd_ps(av, _mm512_maskz_loadu_ps(m, x + i), _mm512_maskz_loadu_ps(m, y + i));
    _mm512_mask_storeu_ps(y + i, m, r);
  }
}

double dot(const float* x, const float* y, std::size_t n) {
  __m512d acc0 = _mm512_setzero_pd();
  __m512d acc1 = _mm512_setzero_pd();
  for (std::size_t i = 0; i < n; i += 16) {
    const __mmask16 m = n - i >= 16 ? static_cast<__mmask16>(0xFFFF) : tail_mask(n - i);
    const __m512 p = _mm512_mul_ps(_mm512_maskz_loadu_ps(m, x + i), _mm512_maskz_loadu_ps(m, y + i));
    acc0 = _mm512_add_pd(acc0, _mm512_cvtps_pd(_mm512_castps512_ps256(p)));
    acc1 = _mm512_add_pd(acc1, _mm512_cvtps_pd(_mm256_castpd_ps(_mm512_extractf64x4_pd(_mm512_castps_pd(p), 1))));
  }
  return _mm512_reduce_add_pd(_mm512_add_pd(acc0, acc1));
}

void adam(float* param, const float* grad, float* m, float* v, std::size_t n,
          float step_size, float beta1, float beta2, float v_correction, float eps) {
  const __m512 b1 = _mm512_set1_ps(beta1), nb1 = _mm512_set1_ps(1.0f - beta1);
  const __m512 b2 = _mm512_set1_ps(beta2), nb2 = _mm512_set1_ps(1.0f - beta2);
  const __m512 vc = _mm512_set1_ps(v_correction), ev = _mm512_set1_ps(eps);
  const __m512 st = _mm512_set1_ps(step_size);
  for (std::size_t i = 0; i < n; i += 16) {
    const __mmask16 k = n - i >= 16 ? static_cast<__mmask16>(0xFFFF) : tail_mask(n - i);
    const __m512 g = _mm512_maskz_loadu_ps(k, grad + i);
    const __m512 mi = _mm512_add_ps(_mm512_mul_ps(b1, _mm512_maskz_loadu_ps(k, m + i)), _mm512_mul_ps(nb1, g));
    const __m512 vi = _mm512_add_ps(_mm512_mul_ps(b2, _mm512_maskz_loadu_ps(k, v + i)),
                                    _mm512_mul_ps(nb2, _mm512_mul_ps(g, g)));
    _mm512_mask_storeu_ps(m + i, k, mi);
    _mm512_mask_storeu_ps(v + i, k, vi);
    const __m512 denom = _mm512_add_ps(_mm512_sqrt_ps(_mm512_mul_ps(vi, vc)), ev);
    const __m512 upd = _mm512_div_ps(_mm512_mul_ps(st, mi), denom);
    _mm512_mask_storeu_ps(param + i, k, _mm512_sub_ps(_mm512_maskz_loadu_ps(k, param + i), upd));
  }
}

}  // namespace

const KernelTable table{
    {kMr, kNr, &micro_kernel}, &leaky_relu, &leaky_relu_backward, &axpy, &dot, &adam,
};

}  // namespace stegan::simd::avx512
