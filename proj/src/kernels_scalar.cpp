#include <cmath>

#include "vpflow/kernels.hpp"
#include "vpflow/parallel.hpp"

namespace vp::kern {

// Reference implementations. Deterministic: each target accumulates over
// sources in index order regardless of the thread partition.

void field_sum_scalar(int dim, const Targets& t, const Sources& s, double eps,
                      double* ex, double* ey, double* ez, int threads) {
    const double eps2 = eps * eps;
    parallel_for(t.n, threads, [&](std::size_t i) {
        const double tx = t.x[i], ty = t.y[i], tz = t.z[i];
        double ax = 0.0, ay = 0.0, az = 0.0;
        switch (dim) {
            case 3:
                for (std::size_t j = 0; j < s.n; ++j) {
                    const double dx = tx - s.x[j], dy = ty - s.y[j], dz = tz - s.z[j];
                    const double r2 = dx * dx + dy * dy + dz * dz + eps2;
                    const double inv = 1.0 / std::sqrt(r2);
                    const double f = s.w[j] * inv * inv * inv;
                    ax += f * dx;
                    ay += f * dy;
                    az += f * dz;
                }
                break;
            case 2:
                for (std::size_t j = 0; j < s.n; ++j) {
                    const double dx = tx - s.x[j], dy = ty - s.y[j];
                    const double f = s.w[j] / (dx * dx + dy * dy + eps2);
                    ax += f * dx;
                    ay += f * dy;
                }
                break;
            default:
                for (std::size_t j = 0; j < s.n; ++j) {
                    const double dx = tx - s.x[j];
                    ax += s.w[j] * dx / std::sqrt(dx * dx + eps2);
                }
                break;
        }
        ex[i] += ax;
        if (dim >= 2) ey[i] += ay;
        if (dim >= 3) ez[i] += az;
    });
}

void potential_sum_scalar(int dim, const Targets& t, const Sources& s, double eps,
                          double* u, int threads) {
    const double eps2 = eps * eps;
    parallel_for(t.n, threads, [&](std::size_t i) {
        const double tx = t.x[i], ty = t.y[i], tz = t.z[i];
        double acc = 0.0;
        switch (dim) {
            case 3:
                for (std::size_t j = 0; j < s.n; ++j) {
                    const double dx = tx - s.x[j], dy = ty - s.y[j], dz = tz - s.z[j];
                    acc += s.w[j] / std::sqrt(dx * dx + dy * dy + dz * dz + eps2);
                }
                break;
            case 2:
                for (std::size_t j = 0; j < s.n; ++j) {
                    const double dx = tx - s.x[j], dy = ty - s.y[j];
                    acc -= s.w[j] * std::log(dx * dx + dy * dy + eps2);
                }
                break;
            default:
                for (std::size_t j = 0; j < s.n; ++j) {
                    const double dx = tx - s.x[j];
                    acc -= s.w[j] * std::sqrt(dx * dx + eps2);
                }
                break;
        }
        u[i] += acc;
    });
}

void kij_matrix(int dim, const V3& dx, double eps, double out[9]) {
    const double r2 = norm2(dx) + eps * eps;
    const double inv_area = 1.0 / unit_sphere_area(dim);
    // (r^2+eps^2)^{-(N+2)/2} and ^{-N/2}
    double p_n2, p_n;
    switch (dim) {
        case 3: {
            const double inv = 1.0 / std::sqrt(r2);
            p_n = inv * inv * inv;
            p_n2 = p_n * inv * inv;
            break;
        }
        case 2: {
            p_n = 1.0 / r2;
            p_n2 = p_n / r2;
            break;
        }
        default: {
            const double inv = 1.0 / std::sqrt(r2);
            p_n = inv;
            p_n2 = inv / r2;
            break;
        }
    }
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) {
            double v = dim * dx[i] * dx[j] * p_n2;
            if (i == j) v -= p_n;
            out[i * dim + j] = inv_area * v;
        }
}

double mollifier_eta(int dim, const V3& dx, double eps) {
    const double r2 = norm2(dx) + eps * eps;
    double p_n2;
    switch (dim) {
        case 3: {
            const double inv = 1.0 / std::sqrt(r2);
            p_n2 = inv * inv * inv * inv * inv;
            break;
        }
        case 2:
            p_n2 = 1.0 / (r2 * r2);
            break;
        default:
            p_n2 = 1.0 / (r2 * std::sqrt(r2));
            break;
    }
    return dim * eps * eps * p_n2 / unit_sphere_area(dim);
}

}  // namespace vp::kern
