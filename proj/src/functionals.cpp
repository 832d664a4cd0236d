#include "vpflow/functionals.hpp"

#include <cmath>

#include "vpflow/errors.hpp"
#include "vpflow/kahan.hpp"

namespace vp {

void FunctionalParams::validate() const {
    if (!(r > 0.0)) throw ConfigError("functionals: r must be positive");
    if (!(lambda > 0.0)) throw ConfigError("functionals: lambda must be positive");
    if (!(gamma > 0.0)) throw ConfigError("functionals: gamma must be positive");
    if (!(delta > 0.0)) throw ConfigError("functionals: delta must be positive");
    if (!(alpha > 0.0 && alpha < 1.0 / 3.0)) throw ConfigError("functionals: alpha must lie in (0, 1/3)");
}

double beta(double y, double alpha) {
    if (!(y >= 0.0)) throw ConfigError("beta: y must be >= 0");
    if (!(alpha > 0.0 && alpha < 1.0 / 3.0)) throw ConfigError("beta: alpha must lie in (0, 1/3)");
    return std::pow(1.0 + std::log1p(y), alpha);
}

double beta_prime(double y, double alpha) {
    if (!(y >= 0.0)) throw ConfigError("beta: y must be >= 0");
    if (!(alpha > 0.0 && alpha < 1.0 / 3.0)) throw ConfigError("beta: alpha must lie in (0, 1/3)");
    return alpha * std::pow(1.0 + std::log1p(y), alpha - 1.0) / (1.0 + y);
}

namespace {

double initial_phase_norm2(const FlowHistory& h, std::size_t i) {
    double z2 = 0.0;
    for (int a = 0; a < h.dim; ++a)
        z2 += h.initial.pos[a][i] * h.initial.pos[a][i] + h.initial.vel[a][i] * h.initial.vel[a][i];
    return z2;
}

void require_common_seeding(const FlowHistory& a, const FlowHistory& b) {
    if (a.dim != b.dim) throw ConfigError("functionals: histories differ in dimension");
    if (!a.lattice_seeded || !b.lattice_seeded)
        throw ConfigError("functionals: both histories must be lattice-seeded");
    if (a.count() != b.count() || a.seed_cell_volume != b.seed_cell_volume)
        throw ConfigError("functionals: histories do not share a seeding");
    for (int c = 0; c < a.dim; ++c)
        if (a.initial.pos[c] != b.initial.pos[c] || a.initial.vel[c] != b.initial.vel[c])
            throw ConfigError("functionals: histories do not share initial points");
    if (a.samples.size() != b.samples.size())
        throw ConfigError("functionals: histories differ in sample schedule");
    for (std::size_t k = 0; k < a.samples.size(); ++k)
        if (std::abs(a.samples[k].time - b.samples[k].time) > 1e-12 * std::max(1.0, a.horizon))
            throw ConfigError("functionals: histories differ in sample times");
}

double sample_distance2(const FlowSample& sa, const FlowSample& sb, int dim, std::size_t i) {
    double d2 = 0.0;
    for (int a = 0; a < dim; ++a) {
        const double dx = sa.pos[a][i] - sb.pos[a][i];
        const double dv = sa.vel[a][i] - sb.vel[a][i];
        d2 += dx * dx + dv * dv;
    }
    return d2;
}

}  // namespace

double beta_superlevel_functional(const FlowHistory& h, double r, double alpha) {
    if (!h.lattice_seeded) throw ConfigError("beta_superlevel_functional: needs a lattice-seeded history");
    if (!(r > 0.0)) throw ConfigError("beta_superlevel_functional: r must be positive");
    if (r > h.seed_radius + 1e-12)
        throw ConfigError("beta_superlevel_functional: seeding does not cover B_r");
    KahanSum acc;
    std::size_t covered = 0;
    for (std::size_t i = 0; i < h.count(); ++i) {
        if (initial_phase_norm2(h, i) > r * r) continue;
        ++covered;
        double vmax2 = 0.0;
        for (const auto& s : h.samples) {
            double v2 = 0.0;
            for (int a = 0; a < h.dim; ++a) v2 += s.vel[a][i] * s.vel[a][i];
            vmax2 = std::max(vmax2, v2);
        }
        acc.add(beta(0.5 * vmax2, alpha));
    }
    if (covered == 0) throw ConfigError("beta_superlevel_functional: no seeds inside B_r");
    return acc.value() * h.seed_cell_volume;
}

PhiSeries phi_delta(const FlowHistory& a, const FlowHistory& b, const FunctionalParams& params) {
    params.validate();
    require_common_seeding(a, b);
    const auto mask_a = sublevel_mask(a, params.lambda);
    const auto mask_b = sublevel_mask(b, params.lambda);

    std::vector<std::size_t> active;
    double covered = 0.0, excluded = 0.0;
    for (std::size_t i = 0; i < a.count(); ++i) {
        if (initial_phase_norm2(a, i) > params.r * params.r) continue;
        if (mask_a[i] && mask_b[i]) {
            active.push_back(i);
            covered += a.seed_cell_volume;
        } else {
            excluded += a.seed_cell_volume;
        }
    }

    PhiSeries out;
    out.covered_measure = covered;
    out.excluded_measure = excluded;
    out.times.reserve(a.samples.size());
    out.values.reserve(a.samples.size());
    for (std::size_t k = 0; k < a.samples.size(); ++k) {
        KahanSum acc;
        for (std::size_t i : active) {
            const double d = std::sqrt(sample_distance2(a.samples[k], b.samples[k], a.dim, i));
            acc.add(std::log1p(d / params.delta));
        }
        out.times.push_back(a.samples[k].time);
        out.values.push_back(acc.value() * a.seed_cell_volume);
    }
    return out;
}

double deviation_measure(const FlowHistory& a, const FlowHistory& b, double gamma, double r, double s) {
    if (!(gamma > 0.0) || !(r > 0.0)) throw ConfigError("deviation_measure: gamma and r must be positive");
    require_common_seeding(a, b);
    const std::size_t k = a.sample_index_at(s);
    KahanSum acc;
    for (std::size_t i = 0; i < a.count(); ++i) {
        if (initial_phase_norm2(a, i) > r * r) continue;
        if (sample_distance2(a.samples[k], b.samples[k], a.dim, i) > gamma * gamma)
            acc.add(a.seed_cell_volume);
    }
    return acc.value();
}

double field_difference_norm(const FlowHistory& a, const FlowHistory& b, double lambda,
                             const GridSpec& spatial_grid) {
    if (a.dim != b.dim) throw ConfigError("field_difference_norm: dimension mismatch");
    if (a.samples.size() != b.samples.size())
        throw ConfigError("field_difference_norm: histories differ in sample schedule");
    spatial_grid.validate();
    const int dim = a.dim;
    const double vball = unit_ball_volume(dim);

    // spatial L1 of |E_a - E_b| weighted by the v-section volume of B_lambda
    auto spatial_l1 = [&](std::size_t k) {
        const ParticleEnsemble ens_a = ensemble_at_sample(a, k);
        const ParticleEnsemble ens_b = ensemble_at_sample(b, k);
        const GridField ea = solve_field(ens_a, spatial_grid, a.background, a.omega, a.kernel);
        const GridField eb = solve_field(ens_b, spatial_grid, b.background, b.omega, b.kernel);
        KahanSum acc;
        for (std::size_t n = 0; n < spatial_grid.node_count(); ++n) {
            const V3 x = spatial_grid.node_position(n);
            const double x2 = norm2(x);
            if (x2 >= lambda * lambda) continue;
            const double section = vball * std::pow(lambda * lambda - x2, 0.5 * dim);
            double dmag = 0.0;
            for (int c = 0; c < dim; ++c) {
                const double d = ea.values[n * dim + c] - eb.values[n * dim + c];
                dmag += d * d;
            }
            acc.add(std::sqrt(dmag) * section);
        }
        return acc.value() * spatial_grid.cell_volume();
    };

    // trapezoid in time over the stored samples
    KahanSum total;
    std::vector<double> vals(a.samples.size());
    for (std::size_t k = 0; k < a.samples.size(); ++k) vals[k] = spatial_l1(k);
    for (std::size_t k = 0; k + 1 < a.samples.size(); ++k) {
        const double dt = a.samples[k + 1].time - a.samples[k].time;
        total.add(0.5 * dt * (vals[k] + vals[k + 1]));
    }
    return total.value();
}

R1Norms r1_decomposition_norms(const GridField& e_field, double v_extent, int v_cells) {
    if (e_field.rank != FieldRank::vector) throw ConfigError("r1 norms: expected a vector field");
    const int dim = e_field.grid.dim;
    if (dim == 3)
        throw ConfigError("r1 norms: unsupported for N=3 (the decomposition fails in three dimensions)");
    if (!(v_extent > 0.0) || v_cells < 1) throw ConfigError("r1 norms: bad velocity box");

    const double hv = 2.0 * v_extent / v_cells;
    const double vcellvol = std::pow(hv, dim);

    KahanSum l1;
    double linf = 0.0;
    for (std::size_t n = 0; n < e_field.node_count(); ++n) {
        const V3 x = e_field.grid.node_position(n);
        const double e_mag = e_field.magnitude_at(n);
        const double base = 1.0 + norm(x);

        // tensorized midpoint rule over the velocity box
        std::array<int, 3> idx{0, 0, 0};
        for (;;) {
            V3 v{};
            for (int a = 0; a < dim; ++a) v[a] = -v_extent + (idx[a] + 0.5) * hv;
            const double vmag = norm(v);
            const double val = e_mag / (base + vmag);
            if (vmag <= e_mag)
                l1.add(val * vcellvol);
            else
                linf = std::max(linf, val);
            int a = 0;
            while (a < dim && ++idx[a] == v_cells) idx[a++] = 0;
            if (a == dim) break;
        }
    }
    R1Norms out;
    out.l1 = l1.value() * e_field.grid.cell_volume();
    out.linf = linf;
    return out;
}

}  // namespace vp
