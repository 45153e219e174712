#include "compdyn/kernels.hpp"

#include <cmath>

namespace compdyn::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double weighted_dot_scalar(const double* a, const double* w, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * w[i] * b[i];
  return s;
}

void scale3_scalar(double* out, const double* a, const double* w, const double* d, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * w[i] * d[i];
}

void inertia_residual_scalar(double* out, const double* m, const double* x, const double* y,
                             double inv_h2, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = m[i] * (x[i] - y[i]) * inv_h2;
}

void axpby_scalar(double* out, double alpha, const double* x, double beta, const double* y,
                  std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = alpha * x[i] + beta * y[i];
}

double max_abs_scalar(const double* a, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = std::fabs(a[i]);
    // NaN propagates so callers notice non-finite data
    if (v > m || v != v) m = v;
  }
  return m;
}

constexpr KernelTable kScalar{dot_scalar,    weighted_dot_scalar, scale3_scalar,
                              inertia_residual_scalar, axpby_scalar, max_abs_scalar};

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

}  // namespace compdyn::kernels
