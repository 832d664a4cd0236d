// AVX-512F variants of the pair-summation kernels (dim 3 hot path), 8 lanes
// per vector. _mm512_rsqrt14_pd seeds Newton directly in double precision:
// two steps reach ~1e-16 relative, so these match the scalar reference to
// full precision. Compiled with -mavx512f, entered only after a runtime
// CPU check in dispatch.cpp.

#if defined(__x86_64__) && defined(__AVX512F__)

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "vpflow/kernels.hpp"
#include "vpflow/parallel.hpp"

namespace vp::kern {

namespace {

inline __m512d rsqrt_newton512(__m512d a) {
    const __m512d half = _mm512_set1_pd(0.5);
    const __m512d three_half = _mm512_set1_pd(1.5);
    __m512d y = _mm512_rsqrt14_pd(a);
    for (int it = 0; it < 2; ++it) {
        const __m512d ay2 = _mm512_mul_pd(_mm512_mul_pd(a, y), y);
        y = _mm512_mul_pd(y, _mm512_fnmadd_pd(half, ay2, three_half));
    }
    return y;
}

}  // namespace

void field_sum_avx512_n3(const Targets& t, const Sources& s, double eps,
                         double* ex, double* ey, double* ez, int threads) {
    const double eps2 = eps * eps;
    const __m512d veps2 = _mm512_set1_pd(eps2);
    const std::size_t n8 = s.n & ~std::size_t(7);
    parallel_for(t.n, threads, [&](std::size_t i) {
        const __m512d tx = _mm512_set1_pd(t.x[i]);
        const __m512d ty = _mm512_set1_pd(t.y[i]);
        const __m512d tz = _mm512_set1_pd(t.z[i]);
        __m512d ax = _mm512_setzero_pd();
        __m512d ay = _mm512_setzero_pd();
        __m512d az = _mm512_setzero_pd();
        for (std::size_t j = 0; j < n8; j += 8) {
            const __m512d dx = _mm512_sub_pd(tx, _mm512_loadu_pd(s.x + j));
            const __m512d dy = _mm512_sub_pd(ty, _mm512_loadu_pd(s.y + j));
            const __m512d dz = _mm512_sub_pd(tz, _mm512_loadu_pd(s.z + j));
            __m512d r2 = _mm512_fmadd_pd(dx, dx, veps2);
            r2 = _mm512_fmadd_pd(dy, dy, r2);
            r2 = _mm512_fmadd_pd(dz, dz, r2);
            const __m512d inv = rsqrt_newton512(r2);
            const __m512d inv3 = _mm512_mul_pd(_mm512_mul_pd(inv, inv), inv);
            const __m512d f = _mm512_mul_pd(_mm512_loadu_pd(s.w + j), inv3);
            ax = _mm512_fmadd_pd(f, dx, ax);
            ay = _mm512_fmadd_pd(f, dy, ay);
            az = _mm512_fmadd_pd(f, dz, az);
        }
        double sx = _mm512_reduce_add_pd(ax);
        double sy = _mm512_reduce_add_pd(ay);
        double sz = _mm512_reduce_add_pd(az);
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

void self_field_sum_avx512_n3(const Sources& s, double eps, double* ex, double* ey, double* ez,
                              int threads) {
    const std::size_t n = s.n;
    const int nt = std::max(1, std::min<int>(resolve_threads(threads),
                                             static_cast<int>(n / 64) + 1));
    const double eps2 = eps * eps;

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
        const __m512d veps2 = _mm512_set1_pd(eps2);
        for (std::size_t i = cut[t]; i < cut[t + 1]; ++i) {
            const double xi = s.x[i], yi = s.y[i], zi = s.z[i], wi = s.w[i];
            const __m512d vxi = _mm512_set1_pd(xi);
            const __m512d vyi = _mm512_set1_pd(yi);
            const __m512d vzi = _mm512_set1_pd(zi);
            const __m512d vwi = _mm512_set1_pd(wi);
            __m512d ax = _mm512_setzero_pd();
            __m512d ay = _mm512_setzero_pd();
            __m512d az = _mm512_setzero_pd();
            std::size_t j = i + 1;
            const std::size_t jv = j + ((n - j) & ~std::size_t(7));
            for (; j < jv; j += 8) {
                const __m512d dx = _mm512_sub_pd(vxi, _mm512_loadu_pd(s.x + j));
                const __m512d dy = _mm512_sub_pd(vyi, _mm512_loadu_pd(s.y + j));
                const __m512d dz = _mm512_sub_pd(vzi, _mm512_loadu_pd(s.z + j));
                __m512d r2 = _mm512_fmadd_pd(dx, dx, veps2);
                r2 = _mm512_fmadd_pd(dy, dy, r2);
                r2 = _mm512_fmadd_pd(dz, dz, r2);
                const __m512d inv = rsqrt_newton512(r2);
                const __m512d inv3 = _mm512_mul_pd(_mm512_mul_pd(inv, inv), inv);
                const __m512d fi = _mm512_mul_pd(_mm512_loadu_pd(s.w + j), inv3);
                ax = _mm512_fmadd_pd(fi, dx, ax);
                ay = _mm512_fmadd_pd(fi, dy, ay);
                az = _mm512_fmadd_pd(fi, dz, az);
                const __m512d fj = _mm512_mul_pd(vwi, inv3);
                _mm512_storeu_pd(axv.data() + j,
                                 _mm512_fnmadd_pd(fj, dx, _mm512_loadu_pd(axv.data() + j)));
                _mm512_storeu_pd(ayv.data() + j,
                                 _mm512_fnmadd_pd(fj, dy, _mm512_loadu_pd(ayv.data() + j)));
                _mm512_storeu_pd(azv.data() + j,
                                 _mm512_fnmadd_pd(fj, dz, _mm512_loadu_pd(azv.data() + j)));
            }
            double sx = _mm512_reduce_add_pd(ax);
            double sy = _mm512_reduce_add_pd(ay);
            double sz = _mm512_reduce_add_pd(az);
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

void potential_sum_avx512_n3(const Targets& t, const Sources& s, double eps, double* u, int threads) {
    const double eps2 = eps * eps;
    const __m512d veps2 = _mm512_set1_pd(eps2);
    const std::size_t n8 = s.n & ~std::size_t(7);
    parallel_for(t.n, threads, [&](std::size_t i) {
        const __m512d tx = _mm512_set1_pd(t.x[i]);
        const __m512d ty = _mm512_set1_pd(t.y[i]);
        const __m512d tz = _mm512_set1_pd(t.z[i]);
        __m512d acc = _mm512_setzero_pd();
        for (std::size_t j = 0; j < n8; j += 8) {
            const __m512d dx = _mm512_sub_pd(tx, _mm512_loadu_pd(s.x + j));
            const __m512d dy = _mm512_sub_pd(ty, _mm512_loadu_pd(s.y + j));
            const __m512d dz = _mm512_sub_pd(tz, _mm512_loadu_pd(s.z + j));
            __m512d r2 = _mm512_fmadd_pd(dx, dx, veps2);
            r2 = _mm512_fmadd_pd(dy, dy, r2);
            r2 = _mm512_fmadd_pd(dz, dz, r2);
            acc = _mm512_fmadd_pd(_mm512_loadu_pd(s.w + j), rsqrt_newton512(r2), acc);
        }
        double su = _mm512_reduce_add_pd(acc);
        for (std::size_t j = n8; j < s.n; ++j) {
            const double dx = t.x[i] - s.x[j], dy = t.y[i] - s.y[j], dz = t.z[i] - s.z[j];
            su += s.w[j] / std::sqrt(dx * dx + dy * dy + dz * dz + eps2);
        }
        u[i] += su;
    });
}

}  // namespace vp::kern

#endif  // __x86_64__ && __AVX512F__
