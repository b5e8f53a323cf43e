#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Vector primitives behind the metric and regression inner loops.
// Every kernel has a scalar reference implementation and, on x86-64 with
// AVX2+FMA, a SIMD variant; the active set is picked once at runtime from
// cpuid. SIMD results may differ from scalar in the last bits (different
// accumulation order), never beyond that.

namespace isa::kernels {

enum class Backend { scalar, avx2 };

// Backend actually in use (auto-detected unless forced).
Backend active_backend();
std::string_view backend_name();

// Force a backend, e.g. scalar for equivalence tests. Forcing avx2 on a
// machine without it throws.
void force_backend(Backend backend);
void reset_backend();

// The two-operand kernels throw InvalidInput on length mismatch.
double sum(std::span<const double> x);
double dot(std::span<const double> x, std::span<const double> y);
// sum of (x[i] - y[i])^2
double sum_sq_diff(std::span<const double> x, std::span<const double> y);
// sum of |x[i] - y[i]|
double sum_abs_diff(std::span<const double> x, std::span<const double> y);
// sum of (x[i] - mx) * (y[i] - my)
double centered_dot(std::span<const double> x, double mx, std::span<const double> y, double my);

// Reference implementations, always available.
namespace scalar {
double sum(std::span<const double> x);
double dot(std::span<const double> x, std::span<const double> y);
double sum_sq_diff(std::span<const double> x, std::span<const double> y);
double sum_abs_diff(std::span<const double> x, std::span<const double> y);
double centered_dot(std::span<const double> x, double mx, std::span<const double> y, double my);
} // namespace scalar

} // namespace isa::kernels
