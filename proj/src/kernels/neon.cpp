#include "compdyn/kernels.hpp"

#if defined(__aarch64__) && defined(__ARM_NEON)
#include <arm_neon.h>

#include <cmath>

namespace compdyn::kernels {
namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double s = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double weighted_dot_neon(const double* a, const double* w, const double* b, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t aw = vmulq_f64(vld1q_f64(a + i), vld1q_f64(w + i));
    acc = vfmaq_f64(acc, aw, vld1q_f64(b + i));
  }
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) s += a[i] * w[i] * b[i];
  return s;
}

void scale3_neon(double* out, const double* a, const double* w, const double* d, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t aw = vmulq_f64(vld1q_f64(a + i), vld1q_f64(w + i));
    vst1q_f64(out + i, vmulq_f64(aw, vld1q_f64(d + i)));
  }
  for (; i < n; ++i) out[i] = a[i] * w[i] * d[i];
}

void inertia_residual_neon(double* out, const double* m, const double* x, const double* y,
                           double inv_h2, std::size_t n) {
  const float64x2_t s = vdupq_n_f64(inv_h2);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t diff = vsubq_f64(vld1q_f64(x + i), vld1q_f64(y + i));
    vst1q_f64(out + i, vmulq_f64(vmulq_f64(vld1q_f64(m + i), diff), s));
  }
  for (; i < n; ++i) out[i] = m[i] * (x[i] - y[i]) * inv_h2;
}

void axpby_neon(double* out, double alpha, const double* x, double beta, const double* y,
                std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  const float64x2_t vb = vdupq_n_f64(beta);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t ax = vmulq_f64(va, vld1q_f64(x + i));
    const float64x2_t by = vmulq_f64(vb, vld1q_f64(y + i));
    vst1q_f64(out + i, vaddq_f64(ax, by));
  }
  for (; i < n; ++i) out[i] = alpha * x[i] + beta * y[i];
}

double max_abs_neon(const double* a, std::size_t n) {
  double m = 0.0;
  std::size_t i = 0;
  float64x2_t acc = vdupq_n_f64(0.0);
  bool nan_seen = false;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t v = vabsq_f64(vld1q_f64(a + i));
    nan_seen |= vminvq_u64(vceqq_f64(v, v)) == 0;
    acc = vmaxq_f64(acc, v);
  }
  if (nan_seen) return std::nan("");
  m = vmaxvq_f64(acc);
  for (; i < n; ++i) {
    const double v = std::fabs(a[i]);
    if (v > m || v != v) m = v;
  }
  return m;
}

constexpr KernelTable kNeon{dot_neon,    weighted_dot_neon, scale3_neon,
                            inertia_residual_neon, axpby_neon, max_abs_neon};

}  // namespace

const KernelTable* neon_table() { return &kNeon; }

}  // namespace compdyn::kernels

#else

namespace compdyn::kernels {
const KernelTable* neon_table() { return nullptr; }
}  // namespace compdyn::kernels

#endif
