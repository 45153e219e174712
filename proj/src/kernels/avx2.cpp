// Compiled with -mavx2 -mfma. Must not include Eigen or any other header whose
// inline functions could be emitted here with AVX2 encodings and later picked
// by the linker for the scalar paths.
#include "compdyn/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>

#include <cmath>

namespace compdyn::kernels {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double weighted_dot_avx2(const double* a, const double* w, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d aw0 = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(w + i));
    const __m256d aw1 = _mm256_mul_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(w + i + 4));
    acc0 = _mm256_fmadd_pd(aw0, _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(aw1, _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d aw = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(w + i));
    acc0 = _mm256_fmadd_pd(aw, _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * w[i] * b[i];
  return s;
}

void scale3_avx2(double* out, const double* a, const double* w, const double* d, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d aw = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(w + i));
    _mm256_storeu_pd(out + i, _mm256_mul_pd(aw, _mm256_loadu_pd(d + i)));
  }
  for (; i < n; ++i) out[i] = a[i] * w[i] * d[i];
}

void inertia_residual_avx2(double* out, const double* m, const double* x, const double* y,
                           double inv_h2, std::size_t n) {
  const __m256d s = _mm256_set1_pd(inv_h2);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d diff = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_mul_pd(_mm256_loadu_pd(m + i), diff), s));
  }
  for (; i < n; ++i) out[i] = m[i] * (x[i] - y[i]) * inv_h2;
}

void axpby_avx2(double* out, double alpha, const double* x, double beta, const double* y,
                std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  const __m256d vb = _mm256_set1_pd(beta);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    // no FMA here: keeps the result bit-identical to the scalar loop
    const __m256d ax = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    const __m256d by = _mm256_mul_pd(vb, _mm256_loadu_pd(y + i));
    _mm256_storeu_pd(out + i, _mm256_add_pd(ax, by));
  }
  for (; i < n; ++i) out[i] = alpha * x[i] + beta * y[i];
}

double max_abs_avx2(const double* a, std::size_t n) {
  const __m256d sign = _mm256_set1_pd(-0.0);
  __m256d acc = _mm256_setzero_pd();
  __m256d nan_seen = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_andnot_pd(sign, _mm256_loadu_pd(a + i));
    nan_seen = _mm256_or_pd(nan_seen, _mm256_cmp_pd(v, v, _CMP_UNORD_Q));
    acc = _mm256_max_pd(acc, v);
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double m = lanes[0];
  for (int k = 1; k < 4; ++k) m = lanes[k] > m ? lanes[k] : m;
  if (_mm256_movemask_pd(nan_seen) != 0) return std::nan("");
  for (; i < n; ++i) {
    const double v = std::fabs(a[i]);
    if (v > m || v != v) m = v;
  }
  return m;
}

constexpr KernelTable kAvx2{dot_avx2,    weighted_dot_avx2, scale3_avx2,
                            inertia_residual_avx2, axpby_avx2, max_abs_avx2};

}  // namespace

const KernelTable* avx2_table() { return &kAvx2; }

}  // namespace compdyn::kernels

#else

namespace compdyn::kernels {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace compdyn::kernels

#endif
