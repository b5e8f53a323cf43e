// AVX2+FMA variants of the vector kernels. Compiled with -mavx2 -mfma in its
// own translation unit; only reached when cpuid reports support.

#ifdef ISA_KERNELS_HAVE_AVX2

#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>

#include <immintrin.h>

namespace isa::kernels::avx2 {

namespace {

inline double hadd(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d swapped = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

constexpr std::size_t kLanes = 4;

} // namespace

double sum(std::span<const double> x) {
    const std::size_t n = x.size();
    const double* p = x.data();
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 2 * kLanes <= n; i += 2 * kLanes) {
        acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(p + i));
        acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(p + i + kLanes));
    }
    for (; i + kLanes <= n; i += kLanes) acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(p + i));
    double total = hadd(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) total += p[i];
    return total;
}

double dot(std::span<const double> x, std::span<const double> y) {
    assert(x.size() == y.size());
    const std::size_t n = x.size();
    const double* a = x.data();
    const double* b = y.data();
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 2 * kLanes <= n; i += 2 * kLanes) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + kLanes), _mm256_loadu_pd(b + i + kLanes), acc1);
    }
    for (; i + kLanes <= n; i += kLanes)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    double total = hadd(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) total += a[i] * b[i];
    return total;
}

double sum_sq_diff(std::span<const double> x, std::span<const double> y) {
    assert(x.size() == y.size());
    const std::size_t n = x.size();
    const double* a = x.data();
    const double* b = y.data();
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 2 * kLanes <= n; i += 2 * kLanes) {
        const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        const __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(a + i + kLanes), _mm256_loadu_pd(b + i + kLanes));
        acc0 = _mm256_fmadd_pd(d0, d0, acc0);
        acc1 = _mm256_fmadd_pd(d1, d1, acc1);
    }
    for (; i + kLanes <= n; i += kLanes) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc0 = _mm256_fmadd_pd(d, d, acc0);
    }
    double total = hadd(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        total += d * d;
    }
    return total;
}

double sum_abs_diff(std::span<const double> x, std::span<const double> y) {
    assert(x.size() == y.size());
    const std::size_t n = x.size();
    const double* a = x.data();
    const double* b = y.data();
    // clear the sign bit to take |d|
    const __m256d sign_mask = _mm256_set1_pd(-0.0);
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 2 * kLanes <= n; i += 2 * kLanes) {
        const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        const __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(a + i + kLanes), _mm256_loadu_pd(b + i + kLanes));
        acc0 = _mm256_add_pd(acc0, _mm256_andnot_pd(sign_mask, d0));
        acc1 = _mm256_add_pd(acc1, _mm256_andnot_pd(sign_mask, d1));
    }
    for (; i + kLanes <= n; i += kLanes) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc0 = _mm256_add_pd(acc0, _mm256_andnot_pd(sign_mask, d));
    }
    double total = hadd(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) total += std::abs(a[i] - b[i]);
    return total;
}

double centered_dot(std::span<const double> x, double mx, std::span<const double> y, double my) {
    assert(x.size() == y.size());
    const std::size_t n = x.size();
    const double* a = x.data();
    const double* b = y.data();
    const __m256d vmx = _mm256_set1_pd(mx);
    const __m256d vmy = _mm256_set1_pd(my);
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 2 * kLanes <= n; i += 2 * kLanes) {
        const __m256d dx0 = _mm256_sub_pd(_mm256_loadu_pd(a + i), vmx);
        const __m256d dy0 = _mm256_sub_pd(_mm256_loadu_pd(b + i), vmy);
        const __m256d dx1 = _mm256_sub_pd(_mm256_loadu_pd(a + i + kLanes), vmx);
        const __m256d dy1 = _mm256_sub_pd(_mm256_loadu_pd(b + i + kLanes), vmy);
        acc0 = _mm256_fmadd_pd(dx0, dy0, acc0);
        acc1 = _mm256_fmadd_pd(dx1, dy1, acc1);
    }
    for (; i + kLanes <= n; i += kLanes) {
        const __m256d dx = _mm256_sub_pd(_mm256_loadu_pd(a + i), vmx);
        const __m256d dy = _mm256_sub_pd(_mm256_loadu_pd(b + i), vmy);
        acc0 = _mm256_fmadd_pd(dx, dy, acc0);
    }
    double total = hadd(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) total += (a[i] - mx) * (b[i] - my);
    return total;
}

} // namespace isa::kernels::avx2

#endif // ISA_KERNELS_HAVE_AVX2
