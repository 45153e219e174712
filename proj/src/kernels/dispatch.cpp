#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "compdyn/kernels.hpp"

namespace compdyn::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detect() {
  if (const char* env = std::getenv("COMPDYN_KERNELS")) {
    const std::string v(env);
    if (v == "scalar") return Isa::Scalar;
    if (v == "avx2" && isa_supported(Isa::Avx2)) return Isa::Avx2;
    if (v == "neon" && isa_supported(Isa::Neon)) return Isa::Neon;
  }
  if (isa_supported(Isa::Avx2)) return Isa::Avx2;
  if (isa_supported(Isa::Neon)) return Isa::Neon;
  return Isa::Scalar;
}

const KernelTable* table_for(Isa isa) {
  switch (isa) {
    case Isa::Avx2: return avx2_table();
    case Isa::Neon: return neon_table();
    case Isa::Scalar: break;
  }
  return &scalar_table();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{table_for(detect())};
  return table;
}

std::atomic<Isa>& current_isa() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

void check(std::size_t a, std::size_t b) {
  if (a != b) throw std::invalid_argument("kernel operand sizes differ");
}

}  // namespace

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return true;
    case Isa::Avx2: return avx2_table() != nullptr && cpu_has_avx2();
    case Isa::Neon: return neon_table() != nullptr;
  }
  return false;
}

Isa active_isa() { return current_isa().load(); }

void set_isa(Isa isa) {
  if (!isa_supported(isa))
    throw std::invalid_argument("kernel ISA not supported here: " + std::string(isa_name(isa)));
  current().store(table_for(isa));
  current_isa().store(isa);
}

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "unknown";
}

const KernelTable& active() { return *current().load(); }

double dot(std::span<const double> a, std::span<const double> b) {
  check(a.size(), b.size());
  return active().dot(a.data(), b.data(), a.size());
}

double weighted_dot(std::span<const double> a, std::span<const double> w, std::span<const double> b) {
  check(a.size(), w.size());
  check(a.size(), b.size());
  return active().weighted_dot(a.data(), w.data(), b.data(), a.size());
}

void scale3(std::span<double> out, std::span<const double> a, std::span<const double> w,
            std::span<const double> d) {
  check(out.size(), a.size());
  check(a.size(), w.size());
  check(a.size(), d.size());
  active().scale3(out.data(), a.data(), w.data(), d.data(), a.size());
}

void inertia_residual(std::span<double> out, std::span<const double> m, std::span<const double> x,
                      std::span<const double> y, double inv_h2) {
  check(out.size(), m.size());
  check(m.size(), x.size());
  check(m.size(), y.size());
  active().inertia_residual(out.data(), m.data(), x.data(), y.data(), inv_h2, m.size());
}

void axpby(std::span<double> out, double alpha, std::span<const double> x, double beta,
           std::span<const double> y) {
  check(out.size(), x.size());
  check(x.size(), y.size());
  active().axpby(out.data(), alpha, x.data(), beta, y.data(), x.size());
}

double max_abs(std::span<const double> a) { return active().max_abs(a.data(), a.size()); }

}  // namespace compdyn::kernels
