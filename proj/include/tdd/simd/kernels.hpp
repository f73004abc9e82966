#pragma once

// Dense vector kernels used by embedding training, cosine similarity and the
// word-vector distance features.
//
// Every kernel has a scalar reference implementation and, on x86-64, an
// AVX2/FMA variant. The variant is chosen once at runtime from CPUID; set
// TDD_SIMD=scalar in the environment to force the reference path. The two
// paths are equivalence-tested; they may differ in the last bits because the
// vector path reassociates sums.

#include <cstddef>
#include <span>
#include <string_view>

namespace tdd::simd {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

/// ISA currently used by the dispatched kernels.
Isa active_isa();

/// True when the running CPU (and build) supports `isa`.
bool isa_available(Isa isa);

/// Overrides dispatch (tests and benchmarks). Throws if unavailable.
void set_isa(Isa isa);

double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> a);
double squared_distance(std::span<const double> a, std::span<const double> b);
/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
double squared_norm(const double* a, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
}  // namespace scalar

namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
double squared_norm(const double* a, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
}  // namespace avx2

}  // namespace tdd::simd
