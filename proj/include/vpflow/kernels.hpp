#pragma once

#include <cstddef>
#include <string>

#include "vpflow/vec.hpp"

namespace vp::kern {

// Instruction-set variants of the hot pair-summation kernels. The scalar
// path is the reference; vector paths must match it to ~1e-12 relative
// (equivalence-tested). Selection happens at runtime.
enum class Isa { scalar, avx2, avx512 };

bool isa_available(Isa isa);
Isa best_isa();
Isa resolve_isa(Isa requested);  // falls back to scalar if unavailable
const char* isa_name(Isa isa);
Isa isa_from_string(const std::string& s);  // "auto", "scalar", "avx2"

struct Sources {
    const double* x;
    const double* y;
    const double* z;
    const double* w;
    std::size_t n;
};

struct Targets {
    const double* x;
    const double* y;
    const double* z;
    std::size_t n;
};

// Adds, for every target t,
//   sum_j w_j (t - s_j) / (|t - s_j|^2 + eps^2)^{dim/2}
// into (ex, ey, ez). This is the unscaled Plummer-softened field kernel;
// callers apply omega / |S^{N-1}|. A source coinciding with the target
// contributes zero (the numerator vanishes), so self-interaction needs no
// special casing.
void field_sum(int dim, Isa isa, const Targets& t, const Sources& s, double eps,
               double* ex, double* ey, double* ez, int threads);

// Self-field of one source set: out_i += sum_{j != i} w_j k_eps(x_i - x_j).
// Vector variants exploit the antisymmetry of the pair kernel (each pair is
// evaluated once) with per-thread partial accumulators merged in thread
// order, so results are reproducible for a fixed thread count.
void self_field_sum(int dim, Isa isa, const Sources& s, double eps,
                    double* ex, double* ey, double* ez, int threads);

// Adds, for every target t, the unscaled softened potential profile
//   dim 3:  sum_j w_j / sqrt(r^2 + eps^2)
//   dim 2:  sum_j w_j * (-log(r^2 + eps^2))
//   dim 1:  sum_j w_j * (-sqrt(r^2 + eps^2))
// Callers apply 1/(4 pi), 1/(4 pi), 1/2 respectively (times omega). Note a
// source at the target itself contributes w_j * profile(eps), which the
// caller must subtract when self-interaction is excluded.
void potential_sum(int dim, Isa isa, const Targets& t, const Sources& s, double eps,
                   double* u, int threads);

// Softened second-derivative kernel, the matrix acting on densities:
//   K_ij(x) = (1/|S^{N-1}|) [ N x_i x_j / (r^2+eps^2)^{(N+2)/2} - delta_ij / (r^2+eps^2)^{N/2} ]
// With eps = 0 this is the pointwise kernel away from the origin; its trace
// vanishes there. With eps > 0 the trace is -eta_eps(x), the Plummer
// mollifier below.
void kij_matrix(int dim, const V3& dx, double eps, double out[9]);

// eta_eps(x) = N eps^2 / (|S^{N-1}| (r^2+eps^2)^{(N+2)/2}); integrates to 1.
double mollifier_eta(int dim, const V3& dx, double eps);

}  // namespace vp::kern
