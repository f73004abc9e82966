#include <atomic>
#include <cassert>
#include <cstdlib>
#include <cstring>

#include "tdd/errors.hpp"
#include "tdd/simd/kernels.hpp"

namespace tdd::simd {
namespace {

bool cpu_has_avx2() {
#if (defined(__x86_64__) || defined(__i386__)) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

bool built_with_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
  return true;
#else
  return false;
#endif
}

Isa detect() {
  if (const char* env = std::getenv("TDD_SIMD"); env && std::strcmp(env, "scalar") == 0) {
    return Isa::scalar;
  }
  return (built_with_avx2() && cpu_has_avx2()) ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

Isa active_isa() { return current().load(std::memory_order_relaxed); }

bool isa_available(Isa isa) {
  return isa == Isa::scalar || (built_with_avx2() && cpu_has_avx2());
}

void set_isa(Isa isa) {
  if (!isa_available(isa)) throw UsageError("SIMD variant not available: " + std::string(isa_name(isa)));
  current().store(isa, std::memory_order_relaxed);
}

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  return active_isa() == Isa::avx2 ? avx2::dot(a.data(), b.data(), a.size())
                                   : scalar::dot(a.data(), b.data(), a.size());
}

double squared_norm(std::span<const double> a) {
  return active_isa() == Isa::avx2 ? avx2::squared_norm(a.data(), a.size())
                                   : scalar::squared_norm(a.data(), a.size());
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  return active_isa() == Isa::avx2 ? avx2::squared_distance(a.data(), b.data(), a.size())
                                   : scalar::squared_distance(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  if (active_isa() == Isa::avx2) {
    avx2::axpy(alpha, x.data(), y.data(), x.size());
  } else {
    scalar::axpy(alpha, x.data(), y.data(), x.size());
  }
}

}  // namespace tdd::simd
