#include "isa/kernels.hpp"

#include <cassert>
#include <cmath>

#include "isa/core.hpp"

namespace isa::kernels {

namespace scalar {

double sum(std::span<const double> x) {
    double acc = 0.0;
    for (double v : x) acc += v;
    return acc;
}

double dot(std::span<const double> x, std::span<const double> y) {
    assert(x.size() == y.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
    return acc;
}

double sum_sq_diff(std::span<const double> x, std::span<const double> y) {
    assert(x.size() == y.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        acc += d * d;
    }
    return acc;
}

double sum_abs_diff(std::span<const double> x, std::span<const double> y) {
    assert(x.size() == y.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += std::abs(x[i] - y[i]);
    return acc;
}

double centered_dot(std::span<const double> x, double mx, std::span<const double> y, double my) {
    assert(x.size() == y.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += (x[i] - mx) * (y[i] - my);
    return acc;
}

} // namespace scalar

#ifdef ISA_KERNELS_HAVE_AVX2
namespace avx2 {
double sum(std::span<const double> x);
double dot(std::span<const double> x, std::span<const double> y);
double sum_sq_diff(std::span<const double> x, std::span<const double> y);
double sum_abs_diff(std::span<const double> x, std::span<const double> y);
double centered_dot(std::span<const double> x, double mx, std::span<const double> y, double my);
} // namespace avx2
#endif

namespace {

struct Table {
    double (*sum)(std::span<const double>);
    double (*dot)(std::span<const double>, std::span<const double>);
    double (*sum_sq_diff)(std::span<const double>, std::span<const double>);
    double (*sum_abs_diff)(std::span<const double>, std::span<const double>);
    double (*centered_dot)(std::span<const double>, double, std::span<const double>, double);
    Backend backend;
};

constexpr Table kScalarTable{scalar::sum, scalar::dot, scalar::sum_sq_diff,
                             scalar::sum_abs_diff, scalar::centered_dot, Backend::scalar};

#ifdef ISA_KERNELS_HAVE_AVX2
constexpr Table kAvx2Table{avx2::sum, avx2::dot, avx2::sum_sq_diff,
                           avx2::sum_abs_diff, avx2::centered_dot, Backend::avx2};
#endif

bool avx2_available() {
#ifdef ISA_KERNELS_HAVE_AVX2
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const Table* detect() {
#ifdef ISA_KERNELS_HAVE_AVX2
    if (avx2_available()) return &kAvx2Table;
#endif
    return &kScalarTable;
}

const Table* g_table = detect();

} // namespace

Backend active_backend() { return g_table->backend; }

std::string_view backend_name() {
    return g_table->backend == Backend::avx2 ? "avx2" : "scalar";
}

void force_backend(Backend backend) {
    if (backend == Backend::scalar) {
        g_table = &kScalarTable;
        return;
    }
#ifdef ISA_KERNELS_HAVE_AVX2
    if (avx2_available()) {
        g_table = &kAvx2Table;
        return;
    }
#endif
    throw InvalidInput("avx2 backend not available on this machine");
}

void reset_backend() { g_table = detect(); }

namespace {

void require_same_size(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw InvalidInput("kernel operands differ in length: " + std::to_string(x.size()) + " vs " +
                           std::to_string(y.size()));
}

} // namespace

double sum(std::span<const double> x) { return g_table->sum(x); }

double dot(std::span<const double> x, std::span<const double> y) {
    require_same_size(x, y);
    return g_table->dot(x, y);
}

double sum_sq_diff(std::span<const double> x, std::span<const double> y) {
    require_same_size(x, y);
    return g_table->sum_sq_diff(x, y);
}

double sum_abs_diff(std::span<const double> x, std::span<const double> y) {
    require_same_size(x, y);
    return g_table->sum_abs_diff(x, y);
}

double centered_dot(std::span<const double> x, double mx, std::span<const double> y, double my) {
    require_same_size(x, y);
    return g_table->centered_dot(x, mx, y, my);
}

} // namespace isa::kernels
