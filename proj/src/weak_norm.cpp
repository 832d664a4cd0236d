#include "vpflow/weak_norm.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include "vpflow/errors.hpp"
#include "vpflow/kahan.hpp"
#include "vpflow/vec.hpp"

namespace vp {

double weak_quasinorm(const GridField& u, double p) {
    if (!(p > 1.0)) throw ConfigError("weak_quasinorm: p must be > 1");
    std::vector<double> mags(u.node_count());
    for (std::size_t i = 0; i < u.node_count(); ++i) mags[i] = u.magnitude_at(i);
    std::sort(mags.begin(), mags.end(), std::greater<double>());
    const double cellvol = u.grid.cell_volume();
    double best = 0.0;
    for (std::size_t i = 0; i < mags.size(); ++i) {
        // levels at realized values; {|u| >= gamma} has i+1 nodes when gamma
        // equals the last of a run of equal magnitudes
        if (i + 1 < mags.size() && mags[i + 1] == mags[i]) continue;
        const double measure = cellvol * static_cast<double>(i + 1);
        best = std::max(best, mags[i] * std::pow(measure, 1.0 / p));
    }
    return best;
}

namespace {

// g(x) = x / |x|^N; difference tau_h g - g with h = |h| e1, evaluated in the
// meridian plane (axial coordinate a, transverse coordinate b >= 0).
double diff_magnitude(int dim, double a, double b, double shift) {
    const double r2 = a * a + b * b;
    const double rs2 = (a + shift) * (a + shift) + b * b;
    const double cr = std::pow(r2, -0.5 * dim);    // |x|^{-N}
    const double cs = std::pow(rs2, -0.5 * dim);   // |x+h|^{-N}
    const double da = (a + shift) * cs - a * cr;
    const double db = b * (cs - cr);
    return std::sqrt(da * da + db * db);
}

struct PolarMesh {
    std::vector<double> r_mid, r_lo, r_hi;         // per-shell midpoint and edges
    std::vector<double> ang, ang_weight;           // N=3: mu = cos(theta) Gauss nodes; N=2: theta uniform
};

// integral of r^{N-1} dr over [a, b]
inline double radial_weight(int dim, double a, double b) {
    return dim == 3 ? (b * b * b - a * a * a) / 3.0 : (b * b - a * a) / 2.0;
}

std::vector<std::pair<double, double>> gauss_legendre(int n) {
    // Newton iteration on Legendre polynomials; nodes/weights on [-1,1].
    std::vector<std::pair<double, double>> out(n);
    for (int i = 0; i < n; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = pk;
            }
            const double dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
            const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = pk;
        }
        const double dp = n * (x * p1 - p0) / (x * x - 1.0);
        out[i] = {x, 2.0 / ((1.0 - x * x) * dp * dp)};
    }
    return out;
}

PolarMesh make_mesh(int dim, double r_lo, double r_hi, int shells, int angles) {
    PolarMesh m;
    const double q = std::log(r_hi / r_lo) / shells;
    for (int k = 0; k < shells; ++k) {
        const double a = r_lo * std::exp(q * k);
        const double b = r_lo * std::exp(q * (k + 1));
        m.r_mid.push_back(std::sqrt(a * b));
        m.r_lo.push_back(a);
        m.r_hi.push_back(b);
    }
    if (dim == 3) {
        for (auto [x, w] : gauss_legendre(angles)) {
            m.ang.push_back(x);            // mu = cos(theta)
            m.ang_weight.push_back(w);
        }
    } else {
        for (int i = 0; i < angles; ++i) {
            m.ang.push_back(2.0 * M_PI * (i + 0.5) / angles);
            m.ang_weight.push_back(2.0 * M_PI / angles);
        }
    }
    return m;
}

// integral over the mesh of |tau g - g|^p, skipping nodes inside the two
// exclusion balls of radius excl around 0 and -shift*e1 (excl = 0 disables)
double polar_integral(int dim, double p, double shift, const PolarMesh& mesh, double region_lo,
                      double excl) {
    KahanSum total;
    const double full_angle = dim == 3 ? 2.0 * M_PI : 1.0;  // phi factor for axisymmetry
    for (std::size_t k = 0; k < mesh.r_mid.size(); ++k) {
        const double r = mesh.r_mid[k];
        if (mesh.r_hi[k] <= region_lo) continue;
        // partial shell at the region boundary keeps its exact volume share
        const double rw = radial_weight(dim, std::max(mesh.r_lo[k], region_lo), mesh.r_hi[k]);
        KahanSum ring;
        for (std::size_t t = 0; t < mesh.ang.size(); ++t) {
            double a, b;  // axial / transverse coordinates
            if (dim == 3) {
                const double mu = mesh.ang[t];
                a = r * mu;
                b = r * std::sqrt(std::max(0.0, 1.0 - mu * mu));
            } else {
                a = r * std::cos(mesh.ang[t]);
                b = r * std::sin(mesh.ang[t]);
            }
            if (excl > 0.0) {
                const double d0 = a * a + b * b;
                const double d1 = (a + shift) * (a + shift) + b * b;
                if (d0 < excl * excl || d1 < excl * excl) continue;
            }
            ring.add(mesh.ang_weight[t] * std::pow(diff_magnitude(dim, a, b, shift), p));
        }
        total.add(full_angle * rw * ring.value());
    }
    return total.value();
}

// scaled inner integral C = int_{|u|<=2} |g(u+e1)-g(u)|^p du, cached per (N,p)
double inner_scaled_integral(int dim, double p) {
    static std::map<std::pair<int, long long>, double> cache;
    static std::mutex mtx;
    const auto key = std::make_pair(dim, static_cast<long long>(std::llround(p * 1e12)));
    {
        std::lock_guard<std::mutex> lock(mtx);
        const auto it = cache.find(key);
        if (it != cache.end()) return it->second;
    }
    const double excl = 1.0 / 256.0;
    const PolarMesh mesh = make_mesh(dim, excl, 2.0, 512, dim == 3 ? 256 : 2048);
    double value = polar_integral(dim, p, 1.0, mesh, 0.0, excl);
    // the two excluded balls, where |tau g - g|^p ~ distance^{(1-N)p} up to
    // O(excl^{N-1}) corrections with vanishing angular mean
    const double expo = dim + (1.0 - dim) * p;
    value += 2.0 * unit_sphere_area(dim) * std::pow(excl, expo) / expo;
    std::lock_guard<std::mutex> lock(mtx);
    cache[key] = value;
    return value;
}

const PolarMesh& outer_mesh(int dim) {
    static const PolarMesh m3 = make_mesh(3, 1e-3, 1e3, 768, 160);
    static const PolarMesh m2 = make_mesh(2, 1e-3, 1e3, 768, 1024);
    return dim == 3 ? m3 : m2;
}

}  // namespace

double kernel_translation_error(double h_mag, double p, int dim) {
    if (dim < 1 || dim > 3) throw ConfigError("kernel_translation_error: dim must be 1, 2 or 3");
    if (dim >= 2 && !(p > 1.0 && p < static_cast<double>(dim) / (dim - 1)))
        throw ConfigError("kernel_translation_error: need 1 < p < N/(N-1)");
    if (dim == 1 && !(p > 1.0)) throw ConfigError("kernel_translation_error: need p > 1");
    if (h_mag == 0.0) return 0.0;
    if (!(h_mag > 0.0)) throw ConfigError("kernel_translation_error: |h| must be >= 0");
    if (dim == 1) {
        // sign(x+h) - sign(x) is +-2 on an interval of length |h|
        return 2.0 * std::pow(h_mag, 1.0 / p);
    }
    if (h_mag < 2e-3 || h_mag > 100.0)
        throw ConfigError("kernel_translation_error: |h| outside the supported range [2e-3, 100]");

    // |x| <= 2|h|: exact scaling onto the cached unit integral
    const double expo = dim + (1.0 - dim) * p;
    const double inner = std::pow(h_mag, expo) * inner_scaled_integral(dim, p);
    // |x| > 2|h|: fixed absolute mesh, smooth integrand
    const double outer = polar_integral(dim, p, h_mag, outer_mesh(dim), 2.0 * h_mag, 0.0);
    return std::pow(inner + outer, 1.0 / p);
}

SlopeFit fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw ConfigError("slope fit: need >= 2 points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lx = std::log(x[i]);
        const double ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    SlopeFit f;
    f.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    f.intercept = (sy - f.slope * sx) / n;
    return f;
}

}  // namespace vp
