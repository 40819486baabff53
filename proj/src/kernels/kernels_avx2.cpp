// AVX2 variants. This translation unit is compiled with -mavx2 and is only
// called after a runtime CPUID check.

#include <immintrin.h>

#include <cmath>

#include "kernels_impl.hpp"

namespace qnopt::kernels::detail {
namespace {

constexpr std::size_t kLanes = 4;

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

inline __m256d abs_pd(__m256d v) {
  return _mm256_andnot_pd(_mm256_set1_pd(-0.0), v);
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double squared_distance_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d r = _mm256_add_pd(_mm256_loadu_pd(y + i), _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    _mm256_storeu_pd(y + i, r);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void linear_combination_avx2(double a, const double* x, double b, const double* y, double* out,
                             std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  const __m256d vb = _mm256_set1_pd(b);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d r = _mm256_add_pd(_mm256_mul_pd(va, _mm256_loadu_pd(x + i)),
                                    _mm256_mul_pd(vb, _mm256_loadu_pd(y + i)));
    _mm256_storeu_pd(out + i, r);
  }
  for (; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

void half_average_avx2(double* z, const double* t, std::size_t n) {
  const __m256d half = _mm256_set1_pd(0.5);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d r = _mm256_mul_pd(half, _mm256_add_pd(_mm256_loadu_pd(z + i), _mm256_loadu_pd(t + i)));
    _mm256_storeu_pd(z + i, r);
  }
  for (; i < n; ++i) z[i] = 0.5 * (z[i] + t[i]);
}

// Round half away from zero, matching std::round bit for bit (including
// the sign of zero): truncate, then step one unit outward where the
// discarded fraction is at least one half.
inline __m256d round_half_away(__m256d v) {
  const __m256d t = _mm256_round_pd(v, _MM_FROUND_TO_ZERO | _MM_FROUND_NO_EXC);
  const __m256d frac = abs_pd(_mm256_sub_pd(v, t));
  const __m256d bump = _mm256_cmp_pd(frac, _mm256_set1_pd(0.5), _CMP_GE_OQ);
  const __m256d one = _mm256_or_pd(_mm256_set1_pd(1.0), _mm256_and_pd(v, _mm256_set1_pd(-0.0)));
  return _mm256_blendv_pd(t, _mm256_add_pd(t, one), bump);
}

void quantize_round_avx2(const double* x, double delta, double* out, std::size_t n) {
  const __m256d vd = _mm256_set1_pd(delta);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d k = round_half_away(_mm256_div_pd(_mm256_loadu_pd(x + i), vd));
    _mm256_storeu_pd(out + i, _mm256_mul_pd(vd, k));
  }
  if (i < n) quantize_round_scalar(x + i, delta, out + i, n - i);
}

void quantize_floor_avx2(const double* x, double delta, double* out, std::size_t n) {
  const __m256d vd = _mm256_set1_pd(delta);
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d v = _mm256_loadu_pd(x + i);
    __m256d k = _mm256_floor_pd(_mm256_div_pd(v, vd));
    const __m256d over = _mm256_cmp_pd(_mm256_mul_pd(k, vd), v, _CMP_GT_OQ);
    const __m256d under = _mm256_cmp_pd(_mm256_mul_pd(_mm256_add_pd(k, one), vd), v, _CMP_LE_OQ);
    k = _mm256_blendv_pd(k, _mm256_sub_pd(k, one), over);
    k = _mm256_blendv_pd(k, _mm256_add_pd(k, one), _mm256_andnot_pd(over, under));
    _mm256_storeu_pd(out + i, _mm256_mul_pd(k, vd));
  }
  if (i < n) quantize_floor_scalar(x + i, delta, out + i, n - i);
}

void quantize_ceil_avx2(const double* x, double delta, double* out, std::size_t n) {
  const __m256d vd = _mm256_set1_pd(delta);
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d v = _mm256_loadu_pd(x + i);
    __m256d k = _mm256_ceil_pd(_mm256_div_pd(v, vd));
    const __m256d below = _mm256_cmp_pd(_mm256_mul_pd(k, vd), v, _CMP_LT_OQ);
    const __m256d slack = _mm256_cmp_pd(_mm256_mul_pd(_mm256_sub_pd(k, one), vd), v, _CMP_GE_OQ);
    k = _mm256_blendv_pd(k, _mm256_add_pd(k, one), below);
    k = _mm256_blendv_pd(k, _mm256_sub_pd(k, one), _mm256_andnot_pd(below, slack));
    _mm256_storeu_pd(out + i, _mm256_mul_pd(k, vd));
  }
  if (i < n) quantize_ceil_scalar(x + i, delta, out + i, n - i);
}

void sparsify_avx2(const double* x, double theta, double* out, std::size_t n) {
  const __m256d vt = _mm256_set1_pd(theta);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d v = _mm256_loadu_pd(x + i);
    const __m256d keep = _mm256_cmp_pd(abs_pd(v), vt, _CMP_GE_OQ);
    _mm256_storeu_pd(out + i, _mm256_and_pd(v, keep));
  }
  if (i < n) sparsify_scalar(x + i, theta, out + i, n - i);
}

}  // namespace

const KernelTable kAvx2Table{
    Backend::Avx2,           "avx2",
    &dot_avx2,               &squared_distance_avx2,
    &axpy_avx2,              &linear_combination_avx2,
    &half_average_avx2,      &quantize_round_avx2,
    &quantize_floor_avx2,    &quantize_ceil_avx2,
    &sparsify_avx2,
};

}  // namespace qnopt::kernels::detail
