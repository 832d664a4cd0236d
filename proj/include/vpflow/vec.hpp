#pragma once

#include <array>
#include <cmath>

namespace vp {

// Spatial/velocity vector with fixed capacity 3 and runtime dimension N <= 3.
// Invariant everywhere in this code base: components at indices >= N are zero,
// so norms, dot products and arithmetic can run over all three slots.
using V3 = std::array<double, 3>;

inline constexpr V3 v3(double x = 0.0, double y = 0.0, double z = 0.0) { return {x, y, z}; }

inline double dot(const V3& a, const V3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm2(const V3& a) { return dot(a, a); }
inline double norm(const V3& a) { return std::sqrt(norm2(a)); }

inline V3 operator+(const V3& a, const V3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline V3 operator-(const V3& a, const V3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline V3 operator*(double s, const V3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline V3& operator+=(V3& a, const V3& b) { a[0] += b[0]; a[1] += b[1]; a[2] += b[2]; return a; }
inline V3& operator-=(V3& a, const V3& b) { a[0] -= b[0]; a[1] -= b[1]; a[2] -= b[2]; return a; }

// |S^{N-1}|, the surface measure of the unit sphere in R^N.
inline double unit_sphere_area(int dim) {
    switch (dim) {
        case 1: return 2.0;
        case 2: return 2.0 * M_PI;
        default: return 4.0 * M_PI;
    }
}

// Volume of the unit ball in R^n (n up to 6 is what the phase-space code needs).
inline double unit_ball_volume(int n) {
    // pi^{n/2} / Gamma(n/2 + 1)
    return std::pow(M_PI, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
}

}  // namespace vp
