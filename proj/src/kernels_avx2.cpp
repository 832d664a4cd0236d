// AVX2 + FMA variants of the pair-summation kernels (dim 3 hot path).
// This translation unit is compiled with -mavx2 -mfma and is only entered
// after a runtime CPU check in dispatch.cpp.

#if defined(__x86_64__) && defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "vpflow/kernels.hpp"
#include "vpflow/parallel.hpp"

namespace vp::kern {

namespace {

// 1/sqrt(a) from the single-precision estimate plus two Newton steps in
// double: relative error ~1e-13, well inside the 1e-12 equivalence budget.
inline __m256d rsqrt_newton(__m256d a) {
    const __m256d half = _mm256_set1_pd(0.5);
    const __m256d three_half = _mm256_set1_pd(1.5);
    __m256d y = _mm256_cvtps_pd(_mm_rsqrt_ps(_mm256_cvtpd_ps(a)));
    for (int it = 0; it < 2; ++it) {
        const __m256d ay2 = _mm256_mul_pd(_mm256_mul_pd(a, y), y);
        y = _mm256_mul_pd(y, _mm256_fnmadd_pd(half, ay2, three_half));
    }
    return y;
}

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

void field_sum_avx2_n3(const Targets& t, const Sources& s, double eps,
                       double* ex, double* ey, double* ez, int threads) {
    const double eps2 = eps * eps;
    const __m256d veps2 = _mm256_set1_pd(eps2);
    const std::size_t n8 = s.n & ~std::size_t(7);
    parallel_for(t.n, threads, [&](std::size_t i) {
        const __m256d tx = _mm256_set1_pd(t.x[i]);
        const __m256d ty = _mm256_set1_pd(t.y[i]);
        const __m256d tz = _mm256_set1_pd(t.z[i]);
        // two independent chains hide the rsqrt/Newton latency
        __m256d ax0 = _mm256_setzero_pd(), ax1 = _mm256_setzero_pd();
        __m256d ay0 = _mm256_setzero_pd(), ay1 = _mm256_setzero_pd();
        __m256d az0 = _mm256_setzero_pd(), az1 = _mm256_setzero_pd();
        for (std::size_t j = 0; j < n8; j += 8) {
            const __m256d dxa = _mm256_sub_pd(tx, _mm256_loadu_pd(s.x + j));
            const __m256d dya = _mm256_sub_pd(ty, _mm256_loadu_pd(s.y + j));
            const __m256d dza = _mm256_sub_pd(tz, _mm256_loadu_pd(s.z + j));
            const __m256d dxb = _mm256_sub_pd(tx, _mm256_loadu_pd(s.x + j + 4));
            const __m256d dyb = _mm256_sub_pd(ty, _mm256_loadu_pd(s.y + j + 4));
            const __m256d dzb = _mm256_sub_pd(tz, _mm256_loadu_pd(s.z + j + 4));
            __m256d r2a = _mm256_fmadd_pd(dxa, dxa, veps2);
            __m256d r2b = _mm256_fmadd_pd(dxb, dxb, veps2);
            r2a = _mm256_fmadd_pd(dya, dya, r2a);
            r2b = _mm256_fmadd_pd(dyb, dyb, r2b);
            r2a = _mm256_fmadd_pd(dza, dza, r2a);
            r2b = _mm256_fmadd_pd(dzb, dzb, r2b);
            const __m256d inva = rsqrt_newton(r2a);
            const __m256d invb = rsqrt_newton(r2b);
            const __m256d inv3a = _mm256_mul_pd(_mm256_mul_pd(inva, inva), inva);
            const __m256d inv3b = _mm256_mul_pd(_mm256_mul_pd(invb, invb), invb);
            const __m256d fa = _mm256_mul_pd(_mm256_loadu_pd(s.w + j), inv3a);
            const __m256d fb = _mm256_mul_pd(_mm256_loadu_pd(s.w + j + 4), inv3b);
            ax0 = _mm256_fmadd_pd(fa, dxa, ax0);
            ay0 = _mm256_fmadd_pd(fa, dya, ay0);
            az0 = _mm256_fmadd_pd(fa, dza, az0);
            ax1 = _mm256_fmadd_pd(fb, dxb, ax1);
            ay1 = _mm256_fmadd_pd(fb, dyb, ay1);
            az1 = _mm256_fmadd_pd(fb, dzb, az1);
        }
        double sx = hsum(_mm256_add_pd(ax0, ax1));
        double sy = hsum(_mm256_add_pd(ay0, ay1));
        double sz = hsum(_mm256_add_pd(az0, az1));
        for (std::size_t j = n8; j < s.n; ++j) {
            const double dx = t.x[i] - s.x[j], dy = t.y[i] - s.y[j], dz = t.z[i] - s.z[j];
            const double r2 = dx * dx + dy * dy + dz * dz + eps2;
            const double inv = 1.0 / std::sqrt(r2);
            const double f = s.w[j] * inv * inv * inv;
            sx += f * dx;
            sy += f * dy;
            sz += f * dz;
        }
        ex[i] += sx;
        ey[i] += sy;
        ez[i] += sz;
    });
}

// Pairwise (Newton's third law) self-field: each (i, j) pair is evaluated
// once, accumulating +w_j k into i and -w_i k into j. Threads work on
// disjoint triangular i-ranges with private j-side accumulators.
void self_field_sum_avx2_n3(const Sources& s, double eps, double* ex, double* ey, double* ez,
                            int threads) {
    const std::size_t n = s.n;
    const int nt = std::max(1, std::min<int>(resolve_threads(threads),
                                             static_cast<int>(n / 64) + 1));
    const double eps2 = eps * eps;

    // thread t owns i in [cut[t], cut[t+1]); boundaries equalize pair counts
    std::vector<std::size_t> cut(nt + 1, n);
    cut[0] = 0;
    for (int t = 1; t < nt; ++t) {
        const double frac = static_cast<double>(t) / nt;
        cut[t] = static_cast<std::size_t>(n * (1.0 - std::sqrt(1.0 - frac)));
    }

    std::vector<std::vector<double>> tax(nt), tay(nt), taz(nt);
    parallel_for(static_cast<std::size_t>(nt), nt, [&](std::size_t t) {
        auto& axv = tax[t];
        auto& ayv = tay[t];
        auto& azv = taz[t];
        axv.assign(n, 0.0);
        ayv.assign(n, 0.0);
        azv.assign(n, 0.0);
        const __m256d veps2 = _mm256_set1_pd(eps2);
        for (std::size_t i = cut[t]; i < cut[t + 1]; ++i) {
            const double xi = s.x[i], yi = s.y[i], zi = s.z[i], wi = s.w[i];
            const __m256d vxi = _mm256_set1_pd(xi);
            const __m256d vyi = _mm256_set1_pd(yi);
            const __m256d vzi = _mm256_set1_pd(zi);
            const __m256d vwi = _mm256_set1_pd(wi);
            __m256d ax = _mm256_setzero_pd();
            __m256d ay = _mm256_setzero_pd();
            __m256d az = _mm256_setzero_pd();
            std::size_t j = i + 1;
            const std::size_t jv = j + ((n - j) & ~std::size_t(3));
            for (; j < jv; j += 4) {
                const __m256d dx = _mm256_sub_pd(vxi, _mm256_loadu_pd(s.x + j));
                const __m256d dy = _mm256_sub_pd(vyi, _mm256_loadu_pd(s.y + j));
                const __m256d dz = _mm256_sub_pd(vzi, _mm256_loadu_pd(s.z + j));
                __m256d r2 = _mm256_fmadd_pd(dx, dx, veps2);
                r2 = _mm256_fmadd_pd(dy, dy, r2);
                r2 = _mm256_fmadd_pd(dz, dz, r2);
                const __m256d inv = rsqrt_newton(r2);
                const __m256d inv3 = _mm256_mul_pd(_mm256_mul_pd(inv, inv), inv);
                const __m256d fi = _mm256_mul_pd(_mm256_loadu_pd(s.w + j), inv3);  // onto i
                ax = _mm256_fmadd_pd(fi, dx, ax);
                ay = _mm256_fmadd_pd(fi, dy, ay);
                az = _mm256_fmadd_pd(fi, dz, az);
                const __m256d fj = _mm256_mul_pd(vwi, inv3);                       // onto j
                _mm256_storeu_pd(axv.data() + j, _mm256_fnmadd_pd(fj, dx, _mm256_loadu_pd(axv.data() + j)));
                _mm256_storeu_pd(ayv.data() + j, _mm256_fnmadd_pd(fj, dy, _mm256_loadu_pd(ayv.data() + j)));
                _mm256_storeu_pd(azv.data() + j, _mm256_fnmadd_pd(fj, dz, _mm256_loadu_pd(azv.data() + j)));
            }
            double sx = hsum(ax), sy = hsum(ay), sz = hsum(az);
            for (; j < n; ++j) {
                const double dx = xi - s.x[j], dy = yi - s.y[j], dz = zi - s.z[j];
                const double r2 = dx * dx + dy * dy + dz * dz + eps2;
                const double inv = 1.0 / std::sqrt(r2);
                const double inv3 = inv * inv * inv;
                const double fi = s.w[j] * inv3;
                sx += fi * dx;
                sy += fi * dy;
                sz += fi * dz;
                const double fj = wi * inv3;
                axv[j] -= fj * dx;
                ayv[j] -= fj * dy;
                azv[j] -= fj * dz;
            }
            axv[i] += sx;
            ayv[i] += sy;
            azv[i] += sz;
        }
    });
    // fixed merge order over threads
    parallel_for(n, threads, [&](std::size_t i) {
        double sx = 0.0, sy = 0.0, sz = 0.0;
        for (int t = 0; t < nt; ++t) {
            sx += tax[t][i];
            sy += tay[t][i];
            sz += taz[t][i];
        }
        ex[i] += sx;
        ey[i] += sy;
        ez[i] += sz;
    });
}

void potential_sum_avx2_n3(const Targets& t, const Sources& s, double eps, double* u, int threads) {
    const double eps2 = eps * eps;
    const __m256d veps2 = _mm256_set1_pd(eps2);
    const std::size_t n4 = s.n & ~std::size_t(3);
    parallel_for(t.n, threads, [&](std::size_t i) {
        const __m256d tx = _mm256_set1_pd(t.x[i]);
        const __m256d ty = _mm256_set1_pd(t.y[i]);
        const __m256d tz = _mm256_set1_pd(t.z[i]);
        __m256d acc = _mm256_setzero_pd();
        for (std::size_t j = 0; j < n4; j += 4) {
            const __m256d dx = _mm256_sub_pd(tx, _mm256_loadu_pd(s.x + j));
            const __m256d dy = _mm256_sub_pd(ty, _mm256_loadu_pd(s.y + j));
            const __m256d dz = _mm256_sub_pd(tz, _mm256_loadu_pd(s.z + j));
            __m256d r2 = _mm256_fmadd_pd(dx, dx, veps2);
            r2 = _mm256_fmadd_pd(dy, dy, r2);
            r2 = _mm256_fmadd_pd(dz, dz, r2);
            acc = _mm256_fmadd_pd(_mm256_loadu_pd(s.w + j), rsqrt_newton(r2), acc);
        }
        double su = hsum(acc);
        for (std::size_t j = n4; j < s.n; ++j) {
            const double dx = t.x[i] - s.x[j], dy = t.y[i] - s.y[j], dz = t.z[i] - s.z[j];
            su += s.w[j] / std::sqrt(dx * dx + dy * dy + dz * dz + eps2);
        }
        u[i] += su;
    });
}

}  // namespace vp::kern

#endif  // __x86_64__ && __AVX2__ && __FMA__
