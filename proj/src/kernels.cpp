#include "skillbank/kernels.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

#if defined(__x86_64__)
#include <immintrin.h>
#endif
#if defined(__aarch64__)
#include <arm_neon.h>
#endif

namespace skillbank::kernels {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

double l2_norm_scalar(const double* v, std::size_t n) {
    return std::sqrt(dot_scalar(v, v, n));
}

void scale_scalar(double* v, std::size_t n, double s) {
    for (std::size_t i = 0; i < n; ++i) {
        v[i] *= s;
    }
}

#if defined(__x86_64__)

__attribute__((target("avx2,fma")))
static double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    }
    acc0 = _mm256_add_pd(acc0, acc1);
    __m128d lo = _mm256_castpd256_pd128(acc0);
    __m128d hi = _mm256_extractf128_pd(acc0, 1);
    lo = _mm_add_pd(lo, hi);
    double acc = _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
    for (; i < n; ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

__attribute__((target("avx2,fma")))
static double l2_norm_avx2(const double* v, std::size_t n) {
    return std::sqrt(dot_avx2(v, v, n));
}

__attribute__((target("avx2")))
static void scale_avx2(double* v, std::size_t n, double s) {
    const __m256d sv = _mm256_set1_pd(s);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(v + i, _mm256_mul_pd(_mm256_loadu_pd(v + i), sv));
    }
    for (; i < n; ++i) {
        v[i] *= s;
    }
}

#endif // __x86_64__

#if defined(__aarch64__)

static double dot_neon(const double* a, const double* b, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
        acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    }
    for (; i + 2 <= n; i += 2) {
        acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    }
    double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
    for (; i < n; ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

static double l2_norm_neon(const double* v, std::size_t n) {
    return std::sqrt(dot_neon(v, v, n));
}

static void scale_neon(double* v, std::size_t n, double s) {
    const float64x2_t sv = vdupq_n_f64(s);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        vst1q_f64(v + i, vmulq_f64(vld1q_f64(v + i), sv));
    }
    for (; i < n; ++i) {
        v[i] *= s;
    }
}

#endif // __aarch64__

namespace {

using DotFn = double (*)(const double*, const double*, std::size_t);
using NormFn = double (*)(const double*, std::size_t);
using ScaleFn = void (*)(double*, std::size_t, double);

struct Dispatch {
    Backend backend = Backend::Scalar;
    DotFn dot = &dot_scalar;
    NormFn norm = &l2_norm_scalar;
    ScaleFn scale = &scale_scalar;
};

Dispatch make_dispatch(Backend b) {
    Dispatch d;
    d.backend = b;
    switch (b) {
    case Backend::Scalar:
        break;
#if defined(__x86_64__)
    case Backend::Avx2:
        d.dot = &dot_avx2;
        d.norm = &l2_norm_avx2;
        d.scale = &scale_avx2;
        break;
#endif
#if defined(__aarch64__)
    case Backend::Neon:
        d.dot = &dot_neon;
        d.norm = &l2_norm_neon;
        d.scale = &scale_neon;
        break;
#endif
    default:
        throw std::invalid_argument("kernel backend not supported on this machine");
    }
    return d;
}

Backend detect_backend() {
#if defined(__x86_64__)
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
        return Backend::Avx2;
    }
    return Backend::Scalar;
#elif defined(__aarch64__)
    return Backend::Neon;
#else
    return Backend::Scalar;
#endif
}

Dispatch& dispatch() {
    static Dispatch d = make_dispatch(detect_backend());
    return d;
}

} // namespace

Backend active_backend() { return dispatch().backend; }

bool backend_supported(Backend b) {
    switch (b) {
    case Backend::Scalar:
        return true;
    case Backend::Avx2:
#if defined(__x86_64__)
        return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
        return false;
#endif
    case Backend::Neon:
#if defined(__aarch64__)
        return true;
#else
        return false;
#endif
    }
    return false;
}

void set_backend(Backend b) {
    if (!backend_supported(b)) {
        throw std::invalid_argument("kernel backend not supported on this machine");
    }
    dispatch() = make_dispatch(b);
}

std::string backend_name(Backend b) {
    switch (b) {
    case Backend::Scalar: return "scalar";
    case Backend::Avx2: return "avx2";
    case Backend::Neon: return "neon";
    }
    return "unknown";
}

double dot(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    return dispatch().dot(a.data(), b.data(), a.size());
}

double l2_norm(std::span<const double> v) {
    return dispatch().norm(v.data(), v.size());
}

void scale(std::span<double> v, double s) {
    dispatch().scale(v.data(), v.size(), s);
}

} // namespace skillbank::kernels
