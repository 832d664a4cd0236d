#include "vpflow/kernels.hpp"

#include "vpflow/errors.hpp"

namespace vp::kern {

// defined in kernels_scalar.cpp
void field_sum_scalar(int dim, const Targets& t, const Sources& s, double eps,
                      double* ex, double* ey, double* ez, int threads);
void potential_sum_scalar(int dim, const Targets& t, const Sources& s, double eps,
                          double* u, int threads);

#if defined(VPFLOW_HAVE_AVX2_TU)
// defined in kernels_avx2.cpp
void field_sum_avx2_n3(const Targets& t, const Sources& s, double eps,
                       double* ex, double* ey, double* ez, int threads);
void self_field_sum_avx2_n3(const Sources& s, double eps, double* ex, double* ey, double* ez,
                            int threads);
void potential_sum_avx2_n3(const Targets& t, const Sources& s, double eps, double* u, int threads);
#endif

#if defined(VPFLOW_HAVE_AVX512_TU)
// defined in kernels_avx512.cpp
void field_sum_avx512_n3(const Targets& t, const Sources& s, double eps,
                         double* ex, double* ey, double* ez, int threads);
void self_field_sum_avx512_n3(const Sources& s, double eps, double* ex, double* ey, double* ez,
                              int threads);
void potential_sum_avx512_n3(const Targets& t, const Sources& s, double eps, double* u, int threads);
#endif

bool isa_available(Isa isa) {
    switch (isa) {
        case Isa::scalar:
            return true;
        case Isa::avx2:
#if defined(VPFLOW_HAVE_AVX2_TU) && defined(__x86_64__)
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
        case Isa::avx512:
#if defined(VPFLOW_HAVE_AVX512_TU) && defined(__x86_64__)
            return __builtin_cpu_supports("avx512f");
#else
            return false;
#endif
    }
    return false;
}

Isa best_isa() {
    if (isa_available(Isa::avx512)) return Isa::avx512;
    if (isa_available(Isa::avx2)) return Isa::avx2;
    return Isa::scalar;
}

Isa resolve_isa(Isa requested) { return isa_available(requested) ? requested : Isa::scalar; }

const char* isa_name(Isa isa) {
    switch (isa) {
        case Isa::avx512: return "avx512";
        case Isa::avx2: return "avx2";
        default: return "scalar";
    }
}

Isa isa_from_string(const std::string& s) {
    if (s == "auto") return best_isa();
    if (s == "scalar") return Isa::scalar;
    if (s == "avx2") return Isa::avx2;
    if (s == "avx512") return Isa::avx512;
    throw ConfigError("unknown kernel isa '" + s + "' (valid: auto, scalar, avx2, avx512)");
}

void field_sum(int dim, Isa isa, const Targets& t, const Sources& s, double eps,
               double* ex, double* ey, double* ez, int threads) {
    if (s.n == 0 || t.n == 0) return;
    const Isa use = resolve_isa(isa);
#if defined(VPFLOW_HAVE_AVX512_TU)
    if (dim == 3 && use == Isa::avx512) {
        field_sum_avx512_n3(t, s, eps, ex, ey, ez, threads);
        return;
    }
#endif
#if defined(VPFLOW_HAVE_AVX2_TU)
    if (dim == 3 && use == Isa::avx2) {
        field_sum_avx2_n3(t, s, eps, ex, ey, ez, threads);
        return;
    }
#endif
    field_sum_scalar(dim, t, s, eps, ex, ey, ez, threads);
}

void self_field_sum(int dim, Isa isa, const Sources& s, double eps,
                    double* ex, double* ey, double* ez, int threads) {
    if (s.n == 0) return;
    const Isa use = resolve_isa(isa);
#if defined(VPFLOW_HAVE_AVX512_TU)
    if (dim == 3 && use == Isa::avx512) {
        self_field_sum_avx512_n3(s, eps, ex, ey, ez, threads);
        return;
    }
#endif
#if defined(VPFLOW_HAVE_AVX2_TU)
    if (dim == 3 && use == Isa::avx2) {
        self_field_sum_avx2_n3(s, eps, ex, ey, ez, threads);
        return;
    }
#endif
    // reference path: plain one-sided sums (the softened kernel zeroes the
    // self term by itself)
    Targets t{s.x, s.y, s.z, s.n};
    field_sum_scalar(dim, t, s, eps, ex, ey, ez, threads);
}

void potential_sum(int dim, Isa isa, const Targets& t, const Sources& s, double eps,
                   double* u, int threads) {
    if (s.n == 0 || t.n == 0) return;
    const Isa use = resolve_isa(isa);
#if defined(VPFLOW_HAVE_AVX512_TU)
    if (dim == 3 && use == Isa::avx512) {
        potential_sum_avx512_n3(t, s, eps, u, threads);
        return;
    }
#endif
#if defined(VPFLOW_HAVE_AVX2_TU)
    if (dim == 3 && use == Isa::avx2) {
        potential_sum_avx2_n3(t, s, eps, u, threads);
        return;
    }
#endif
    potential_sum_scalar(dim, t, s, eps, u, threads);
}

}  // namespace vp::kern
