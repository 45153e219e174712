#pragma once

// Flat data-parallel loops used on the hot paths of constraint assembly,
// rig recovery and the inertia terms of the time-step objective.
//
// Every kernel has a scalar reference implementation. SIMD variants (AVX2 on
// x86-64, NEON on aarch64) are selected once at runtime and can be forced with
// the COMPDYN_KERNELS environment variable (scalar | avx2 | neon | auto).
// Reductions in the SIMD variants use a different summation order than the
// scalar loop, so results agree to rounding, not bit-for-bit.

#include <cstddef>
#include <span>
#include <string_view>

namespace compdyn::kernels {

enum class Isa { Scalar, Avx2, Neon };

struct KernelTable {
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*weighted_dot)(const double* a, const double* w, const double* b, std::size_t n);
  void (*scale3)(double* out, const double* a, const double* w, const double* d, std::size_t n);
  void (*inertia_residual)(double* out, const double* m, const double* x, const double* y,
                           double inv_h2, std::size_t n);
  void (*axpby)(double* out, double alpha, const double* x, double beta, const double* y,
                std::size_t n);
  double (*max_abs)(const double* a, std::size_t n);
};

const KernelTable& scalar_table();
// nullptr when the variant was not compiled for this target.
const KernelTable* avx2_table();
const KernelTable* neon_table();

bool isa_supported(Isa isa);
Isa active_isa();
// Throws std::invalid_argument if the ISA is not supported on this machine.
void set_isa(Isa isa);
std::string_view isa_name(Isa isa);

const KernelTable& active();

// Convenience wrappers over the active table. Sizes must agree; checked.
double dot(std::span<const double> a, std::span<const double> b);
double weighted_dot(std::span<const double> a, std::span<const double> w, std::span<const double> b);
void scale3(std::span<double> out, std::span<const double> a, std::span<const double> w,
            std::span<const double> d);
// out = m .* (x - y) * inv_h2
void inertia_residual(std::span<double> out, std::span<const double> m, std::span<const double> x,
                      std::span<const double> y, double inv_h2);
// out = alpha * x + beta * y   (out may alias x or y)
void axpby(std::span<double> out, double alpha, std::span<const double> x, double beta,
           std::span<const double> y);
double max_abs(std::span<const double> a);

}  // namespace compdyn::kernels
