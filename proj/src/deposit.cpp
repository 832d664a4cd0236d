#include "vpflow/deposit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vpflow/errors.hpp"
#include "vpflow/kahan.hpp"

namespace vp {

namespace {

struct Stencil {
    // per axis: lower node index and weight of the lower node
    std::array<int, 3> idx{};
    std::array<double, 3> frac{};
    bool inside = false;
};

// Multilinear weights on corner nodes. u in [0, cells] along each axis keeps
// the whole stencil on the grid.
Stencil locate(const GridSpec& g, const V3& x, DepositScheme scheme) {
    Stencil s;
    for (int a = 0; a < g.dim; ++a) {
        const double u = (x[a] - g.origin[a]) / g.spacing(a);
        if (!(u >= 0.0) || u > static_cast<double>(g.cells[a])) return s;
        if (scheme == DepositScheme::ngp) {
            int i = static_cast<int>(std::lround(u));
            i = std::clamp(i, 0, g.cells[a]);
            s.idx[a] = i;
            s.frac[a] = 0.0;
        } else {
            int i = static_cast<int>(u);
            if (i >= g.cells[a]) i = g.cells[a] - 1;  // u == cells lands on the last cell
            s.idx[a] = i;
            s.frac[a] = u - i;
        }
    }
    s.inside = true;
    return s;
}

template <class Fn>
void for_stencil(const GridSpec& g, const Stencil& s, DepositScheme scheme, Fn&& fn) {
    if (scheme == DepositScheme::ngp) {
        fn(g.flatten(s.idx), 1.0);
        return;
    }
    const int corners = 1 << g.dim;
    for (int c = 0; c < corners; ++c) {
        std::array<int, 3> idx = s.idx;
        double w = 1.0;
        for (int a = 0; a < g.dim; ++a) {
            if (c & (1 << a)) {
                idx[a] += 1;
                w *= s.frac[a];
            } else {
                w *= 1.0 - s.frac[a];
            }
        }
        if (w != 0.0) fn(g.flatten(idx), w);
    }
}

}  // namespace

DensityDeposit deposit_density(const ParticleEnsemble& ens, const GridSpec& grid, DepositScheme scheme) {
    grid.validate();
    if (grid.dim != ens.dim) throw ConfigError("deposit: grid and ensemble dimension mismatch");
    DensityDeposit out{GridField(grid, FieldRank::scalar), 0.0};
    const double inv_vol = 1.0 / grid.cell_volume();
    KahanSum outside;
    for (std::size_t i = 0; i < ens.count(); ++i) {
        const Stencil s = locate(grid, ens.position(i), scheme);
        if (!s.inside) {
            outside.add(ens.weights[i]);
            continue;
        }
        const double wi = ens.weights[i] * inv_vol;
        for_stencil(grid, s, scheme, [&](std::size_t node, double w) { out.rho.values[node] += wi * w; });
    }
    out.outside_mass = outside.value();
    return out;
}

CurrentDeposit deposit_current(const ParticleEnsemble& ens, const GridSpec& grid, DepositScheme scheme) {
    grid.validate();
    if (grid.dim != ens.dim) throw ConfigError("deposit: grid and ensemble dimension mismatch");
    CurrentDeposit out{GridField(grid, FieldRank::vector), 0.0, {}};
    const double inv_vol = 1.0 / grid.cell_volume();
    KahanSum outside;
    for (std::size_t i = 0; i < ens.count(); ++i) {
        const Stencil s = locate(grid, ens.position(i), scheme);
        if (!s.inside) {
            outside.add(ens.weights[i]);
            out.outside_momentum += ens.weights[i] * ens.velocity(i);
            continue;
        }
        const V3 mv = (ens.weights[i] * inv_vol) * ens.velocity(i);
        for_stencil(grid, s, scheme, [&](std::size_t node, double w) {
            for (int c = 0; c < grid.dim; ++c) out.current.values[node * grid.dim + c] += w * mv[c];
        });
    }
    out.outside_mass = outside.value();
    return out;
}

double total_mass(const ParticleEnsemble& ens) {
    KahanSum s;
    for (double w : ens.weights) s.add(w);
    return s.value();
}

double kinetic_energy(const ParticleEnsemble& ens) {
    KahanSum s;
    for (std::size_t i = 0; i < ens.count(); ++i) s.add(0.5 * ens.weights[i] * norm2(ens.velocity(i)));
    return s.value();
}

V3 total_momentum(const ParticleEnsemble& ens) {
    KahanSum sx, sy, sz;
    for (std::size_t i = 0; i < ens.count(); ++i) {
        sx.add(ens.weights[i] * ens.vel[0][i]);
        sy.add(ens.weights[i] * ens.vel[1][i]);
        sz.add(ens.weights[i] * ens.vel[2][i]);
    }
    return {sx.value(), sy.value(), sz.value()};
}

void PhaseGridSpec::validate() const {
    x.validate();
    v.validate();
    if (x.dim != v.dim) throw ConfigError("phase grid: x and v dimensions differ");
}

std::size_t PhaseGridSpec::cell_count_x() const {
    std::size_t n = 1;
    for (int a = 0; a < x.dim; ++a) n *= static_cast<std::size_t>(x.cells[a]);
    return n;
}

std::size_t PhaseGridSpec::cell_count_v() const {
    std::size_t n = 1;
    for (int a = 0; a < v.dim; ++a) n *= static_cast<std::size_t>(v.cells[a]);
    return n;
}

std::size_t PhaseGridSpec::cell_count() const { return cell_count_x() * cell_count_v(); }

namespace {

// cell index along one grid, or -1 if out
long cell_of(const GridSpec& g, const V3& p, bool velocity, const V3& q) {
    long idx = 0;
    for (int a = g.dim - 1; a >= 0; --a) {
        const double c = velocity ? q[a] : p[a];
        const double u = (c - g.origin[a]) / g.spacing(a);
        if (!(u >= 0.0) || u >= static_cast<double>(g.cells[a])) {
            if (u == static_cast<double>(g.cells[a]))
                idx = idx * g.cells[a] + (g.cells[a] - 1);
            else
                return -1;
        } else {
            idx = idx * g.cells[a] + static_cast<long>(u);
        }
    }
    return idx;
}

}  // namespace

PhaseHistogram phase_histogram(const ParticleEnsemble& ens, const PhaseGridSpec& grid) {
    grid.validate();
    if (grid.x.dim != ens.dim) throw ConfigError("phase histogram: dimension mismatch");
    PhaseHistogram h;
    h.grid = grid;
    h.mass.assign(grid.cell_count(), 0.0);
    const std::size_t nv = grid.cell_count_v();
    KahanSum outside;
    for (std::size_t i = 0; i < ens.count(); ++i) {
        const long cx = cell_of(grid.x, ens.position(i), false, {});
        const long cv = cell_of(grid.v, {}, true, ens.velocity(i));
        if (cx < 0 || cv < 0) {
            outside.add(ens.weights[i]);
            continue;
        }
        h.mass[static_cast<std::size_t>(cx) * nv + static_cast<std::size_t>(cv)] += ens.weights[i];
    }
    h.outside_mass = outside.value();
    return h;
}

double histogram_l1_distance(const ParticleEnsemble& a, const ParticleEnsemble& b, const PhaseGridSpec& grid) {
    const PhaseHistogram ha = phase_histogram(a, grid);
    const PhaseHistogram hb = phase_histogram(b, grid);
    KahanSum s;
    for (std::size_t c = 0; c < ha.mass.size(); ++c) s.add(std::abs(ha.mass[c] - hb.mass[c]));
    s.add(std::abs(ha.outside_mass - hb.outside_mass));
    return s.value();
}

std::vector<double> equi_integrability_profile(const ParticleEnsemble& ens, const PhaseGridSpec& grid,
                                               const std::vector<double>& fractions) {
    if (ens.count() == 0) throw ConfigError("equi-integrability profile: empty ensemble");
    for (double f : fractions)
        if (!(f > 0.0) || f > 1.0) throw ConfigError("equi-integrability profile: fractions must lie in (0,1]");

    const PhaseHistogram h = phase_histogram(ens, grid);
    const double cellvol = grid.total_volume() / static_cast<double>(grid.cell_count());

    // Sort cells by density (equivalently, by mass on a uniform grid); the
    // optimal set of a given measure is a superlevel set of the density.
    std::vector<std::size_t> order(h.mass.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return h.mass[i] > h.mass[j]; });

    std::vector<double> out;
    out.reserve(fractions.size());
    for (double f : fractions) {
        const double budget = f * grid.total_volume();
        double used = 0.0, captured = 0.0;
        for (std::size_t c : order) {
            if (used + cellvol <= budget) {
                captured += h.mass[c];
                used += cellvol;
            } else {
                captured += h.mass[c] * (budget - used) / cellvol;  // fractional last cell
                break;
            }
            if (used >= budget) break;
        }
        out.push_back(captured);
    }
    return out;
}

}  // namespace vp
