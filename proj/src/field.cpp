#include "vpflow/field.hpp"

#include <algorithm>
#include <cmath>

#include "vpflow/deposit.hpp"
#include "vpflow/errors.hpp"
#include "vpflow/io.hpp"
#include "vpflow/kahan.hpp"
#include "vpflow/parallel.hpp"

namespace vp {

namespace {

// normalization of the Green kernel profile returned by kern::potential_sum
double green_scale(int dim) { return dim == 1 ? 0.5 : 1.0 / (4.0 * M_PI); }

double green_profile_at_zero(int dim, double eps) {
    switch (dim) {
        case 3: return 1.0 / eps;
        case 2: return -std::log(eps * eps);
        default: return -eps;
    }
}

kern::Targets targets_of(const std::array<std::vector<double>, 3>& p) {
    return {p[0].data(), p[1].data(), p[2].data(), p[0].size()};
}

kern::Sources particle_sources(const ParticleEnsemble& ens) {
    return {ens.pos[0].data(), ens.pos[1].data(), ens.pos[2].data(), ens.weights.data(), ens.count()};
}

std::array<std::vector<double>, 3> grid_node_positions(const GridSpec& g) {
    std::array<std::vector<double>, 3> p;
    const std::size_t n = g.node_count();
    for (int a = 0; a < 3; ++a) p[a].assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const V3 x = g.node_position(i);
        for (int a = 0; a < g.dim; ++a) p[a][i] = x[a];
    }
    return p;
}

}  // namespace

FieldMethod field_method_from_string(const std::string& s) {
    if (s == "direct-sum") return FieldMethod::direct_sum;
    if (s == "grid-convolution") return FieldMethod::grid_convolution;
    throw ConfigError("unknown field method '" + s + "' (valid: direct-sum, grid-convolution)");
}

std::string to_string(FieldMethod m) {
    return m == FieldMethod::direct_sum ? "direct-sum" : "grid-convolution";
}

void KernelConfig::validate(int dim) const {
    if (dim < 1 || dim > 3) throw ConfigError("kernel: dim must be 1, 2 or 3");
    if (!(softening > 0.0)) throw ConfigError("kernel: softening must be positive for summed kernels");
    if (method == FieldMethod::grid_convolution) {
        convolution_grid.validate();
        if (convolution_grid.dim != dim) throw ConfigError("kernel: convolution grid dimension mismatch");
    }
}

Background Background::none(int dim) {
    Background bg;
    bg.dim = dim;
    return bg;
}

Background Background::realize(const BackgroundSpec& spec, int dim, const GridSpec& quad_grid) {
    spec.validate(dim);
    Background bg;
    bg.spec = spec;
    bg.dim = dim;
    if (spec.kind == BackgroundKind::zero) return bg;

    GridField rho_b(quad_grid, FieldRank::scalar);
    if (spec.kind == BackgroundKind::gaussian) {
        const double norm = spec.mass / std::pow(2.0 * M_PI * spec.sigma * spec.sigma, 0.5 * dim);
        for (std::size_t i = 0; i < quad_grid.node_count(); ++i) {
            const V3 d = quad_grid.node_position(i) - spec.center;
            rho_b.values[i] = norm * std::exp(-0.5 * norm2(d) / (spec.sigma * spec.sigma));
        }
    } else {  // table
        rho_b = read_grid_field(spec.table_path);
        if (rho_b.grid.dim != dim || rho_b.rank != FieldRank::scalar)
            throw ConfigError("background: table must be a scalar field of matching dimension");
    }
    // table kind carries its own grid; gaussian uses the requested one
    const GridSpec& qg = rho_b.grid;
    const double vol = qg.cell_volume();
    bg.pos = grid_node_positions(qg);
    bg.node_mass.resize(qg.node_count());
    for (std::size_t i = 0; i < qg.node_count(); ++i) {
        if (rho_b.values[i] < 0.0) throw ConfigError("background: rho_b must be nonnegative");
        bg.node_mass[i] = rho_b.values[i] * vol;
    }
    return bg;
}

double Background::mass() const {
    KahanSum s;
    for (double m : node_mass) s.add(m);
    return s.value();
}

kern::Sources Background::sources() const {
    return {pos[0].data(), pos[1].data(), pos[2].data(), node_mass.data(), node_mass.size()};
}

namespace {

// accumulate the scaled field omega/S_N [particles - background] at targets
void field_into(int dim, const kern::Targets& tg, const kern::Sources& src, const Background& bg,
                int omega, const KernelConfig& cfg, std::array<std::vector<double>, 3>& out) {
    for (int a = 0; a < 3; ++a) out[a].assign(tg.n, 0.0);
    kern::field_sum(dim, cfg.isa, tg, src, cfg.softening, out[0].data(), out[1].data(), out[2].data(),
                    cfg.threads);
    std::array<std::vector<double>, 3> bg_acc;
    if (!bg.empty()) {
        for (int a = 0; a < 3; ++a) bg_acc[a].assign(tg.n, 0.0);
        kern::field_sum(dim, cfg.isa, tg, bg.sources(), cfg.softening, bg_acc[0].data(),
                        bg_acc[1].data(), bg_acc[2].data(), cfg.threads);
    }
    const double scale = omega / unit_sphere_area(dim);
    for (int a = 0; a < dim; ++a)
        for (std::size_t i = 0; i < tg.n; ++i)
            out[a][i] = scale * (out[a][i] - (bg.empty() ? 0.0 : bg_acc[a][i]));
    for (int a = dim; a < 3; ++a) std::fill(out[a].begin(), out[a].end(), 0.0);
}

std::vector<double> potential_values(int dim, const kern::Targets& tg, const kern::Sources& src,
                                     const Background& bg, int omega, const KernelConfig& cfg) {
    std::vector<double> acc(tg.n, 0.0);
    kern::potential_sum(dim, cfg.isa, tg, src, cfg.softening, acc.data(), cfg.threads);
    std::vector<double> bg_acc;
    if (!bg.empty()) {
        bg_acc.assign(tg.n, 0.0);
        kern::potential_sum(dim, cfg.isa, tg, bg.sources(), cfg.softening, bg_acc.data(), cfg.threads);
    }
    const double scale = omega * green_scale(dim);
    for (std::size_t i = 0; i < tg.n; ++i) acc[i] = scale * (acc[i] - (bg.empty() ? 0.0 : bg_acc[i]));
    return acc;
}

void check_dims(int a, int b, const char* what) {
    if (a != b) throw ConfigError(std::string(what) + ": dimension mismatch");
}

}  // namespace

FieldValues solve_field_at(const ParticleEnsemble& ens, const kern::Targets& tg, const Background& bg,
                           int omega, const KernelConfig& cfg) {
    cfg.validate(ens.dim);
    check_dims(ens.dim, bg.dim, "solve_field");
    if (omega != 1 && omega != -1) throw ConfigError("solve_field: omega must be +1 or -1");
    FieldValues fv;
    field_into(ens.dim, tg, particle_sources(ens), bg, omega, cfg, fv.e);
    return fv;
}

GridField solve_field(const ParticleEnsemble& ens, const GridSpec& grid, const Background& bg,
                      int omega, const KernelConfig& cfg) {
    check_dims(ens.dim, grid.dim, "solve_field");
    const auto nodes = grid_node_positions(grid);
    const FieldValues fv = solve_field_at(ens, targets_of(nodes), bg, omega, cfg);
    GridField e(grid, FieldRank::vector);
    for (std::size_t i = 0; i < grid.node_count(); ++i)
        for (int a = 0; a < grid.dim; ++a) e.values[i * grid.dim + a] = fv.e[a][i];
    return e;
}

GridField solve_field(const GridField& rho, const Background& bg, int omega, const KernelConfig& cfg) {
    if (rho.rank != FieldRank::scalar) throw ConfigError("solve_field: density must be a scalar field");
    cfg.validate(rho.grid.dim);
    check_dims(rho.grid.dim, bg.dim, "solve_field");
    if (omega != 1 && omega != -1) throw ConfigError("solve_field: omega must be +1 or -1");
    const auto nodes = grid_node_positions(rho.grid);
    std::vector<double> node_mass(rho.values);
    const double vol = rho.grid.cell_volume();
    for (double& m : node_mass) m *= vol;
    kern::Sources src{nodes[0].data(), nodes[1].data(), nodes[2].data(), node_mass.data(), node_mass.size()};
    std::array<std::vector<double>, 3> acc;
    field_into(rho.grid.dim, targets_of(nodes), src, bg, omega, cfg, acc);
    GridField e(rho.grid, FieldRank::vector);
    for (std::size_t i = 0; i < rho.grid.node_count(); ++i)
        for (int a = 0; a < rho.grid.dim; ++a) e.values[i * rho.grid.dim + a] = acc[a][i];
    return e;
}

V3 interpolate_vector(const GridField& f, const V3& x) {
    const GridSpec& g = f.grid;
    std::array<int, 3> idx{};
    std::array<double, 3> frac{};
    for (int a = 0; a < g.dim; ++a) {
        double u = (x[a] - g.origin[a]) / g.spacing(a);
        u = std::clamp(u, 0.0, static_cast<double>(g.cells[a]));
        int i = static_cast<int>(u);
        if (i >= g.cells[a]) i = g.cells[a] - 1;
        idx[a] = i;
        frac[a] = u - i;
    }
    V3 out{};
    const int corners = 1 << g.dim;
    for (int c = 0; c < corners; ++c) {
        std::array<int, 3> ni = idx;
        double w = 1.0;
        for (int a = 0; a < g.dim; ++a) {
            if (c & (1 << a)) {
                ni[a] += 1;
                w *= frac[a];
            } else {
                w *= 1.0 - frac[a];
            }
        }
        const std::size_t node = g.flatten(ni);
        for (int a = 0; a < g.dim; ++a) out[a] += w * f.values[node * g.dim + a];
    }
    return out;
}

FieldValues solve_field_at_particles(const ParticleEnsemble& ens, const Background& bg, int omega,
                                     const KernelConfig& cfg) {
    if (cfg.method == FieldMethod::direct_sum) {
        kern::Targets tg{ens.pos[0].data(), ens.pos[1].data(), ens.pos[2].data(), ens.count()};
        return solve_field_at(ens, tg, bg, omega, cfg);
    }
    // grid-convolution: deposit, solve on nodes, gather multilinearly; the
    // rare particle outside the grid gets the node-source direct sum.
    cfg.validate(ens.dim);
    const DensityDeposit dep = deposit_density(ens, cfg.convolution_grid);
    const GridField e = solve_field(dep.rho, bg, omega, cfg);
    FieldValues fv;
    for (int a = 0; a < 3; ++a) fv.e[a].assign(ens.count(), 0.0);
    const GridSpec& g = cfg.convolution_grid;
    for (std::size_t i = 0; i < ens.count(); ++i) {
        const V3 x = ens.position(i);
        bool inside = true;
        for (int a = 0; a < g.dim; ++a) {
            const double u = (x[a] - g.origin[a]) / g.spacing(a);
            if (!(u >= 0.0) || u > static_cast<double>(g.cells[a])) inside = false;
        }
        if (inside) {
            const V3 v = interpolate_vector(e, x);
            for (int a = 0; a < g.dim; ++a) fv.e[a][i] = v[a];
        } else {
            const auto nodes = grid_node_positions(g);
            std::vector<double> node_mass(dep.rho.values);
            const double vol = g.cell_volume();
            for (double& m : node_mass) m *= vol;
            kern::Sources src{nodes[0].data(), nodes[1].data(), nodes[2].data(), node_mass.data(),
                              node_mass.size()};
            std::array<double, 3> px{x[0], x[1], x[2]};
            kern::Targets tg{&px[0], &px[1], &px[2], 1};
            std::array<std::vector<double>, 3> acc;
            field_into(g.dim, tg, src, bg, omega, cfg, acc);
            for (int a = 0; a < g.dim; ++a) fv.e[a][i] = acc[a][0];
        }
    }
    return fv;
}

namespace {

GridField assemble_potential(int dim, const GridSpec& grid, std::vector<double> u) {
    GridField out(grid, FieldRank::scalar);
    out.values = std::move(u);
    // dim <= 2: the kernel grows at infinity; fix the additive gauge so that
    // the boundary-node mean vanishes.
    if (dim <= 2) {
        KahanSum s;
        std::size_t nb = 0;
        for (std::size_t i = 0; i < grid.node_count(); ++i) {
            const auto idx = grid.unflatten(i);
            bool boundary = false;
            for (int a = 0; a < dim; ++a)
                if (idx[a] == 0 || idx[a] == grid.cells[a]) boundary = true;
            if (boundary) {
                s.add(out.values[i]);
                ++nb;
            }
        }
        const double mean = nb ? s.value() / static_cast<double>(nb) : 0.0;
        for (double& v : out.values) v -= mean;
    }
    return out;
}

}  // namespace

GridField potential(const ParticleEnsemble& ens, const GridSpec& grid, const Background& bg,
                    int omega, const KernelConfig& cfg) {
    cfg.validate(ens.dim);
    check_dims(ens.dim, grid.dim, "potential");
    const auto nodes = grid_node_positions(grid);
    auto u = potential_values(ens.dim, targets_of(nodes), particle_sources(ens), bg, omega, cfg);
    return assemble_potential(ens.dim, grid, std::move(u));
}

GridField potential(const GridField& rho, const Background& bg, int omega, const KernelConfig& cfg) {
    if (rho.rank != FieldRank::scalar) throw ConfigError("potential: density must be a scalar field");
    cfg.validate(rho.grid.dim);
    const auto nodes = grid_node_positions(rho.grid);
    std::vector<double> node_mass(rho.values);
    const double vol = rho.grid.cell_volume();
    for (double& m : node_mass) m *= vol;
    kern::Sources src{nodes[0].data(), nodes[1].data(), nodes[2].data(), node_mass.data(), node_mass.size()};
    auto u = potential_values(rho.grid.dim, targets_of(nodes), src, bg, omega, cfg);
    return assemble_potential(rho.grid.dim, rho.grid, std::move(u));
}

namespace {

// out_ij(x) += scale * sum_j m_j K^eps_ij(x - y_j) over one source set
void kij_accumulate(const GridSpec& grid, const kern::Sources& src, double eps, double scale,
                    int threads, GridField& out) {
    const int dim = grid.dim;
    parallel_for(grid.node_count(), threads, [&](std::size_t node) {
        const V3 x = grid.node_position(node);
        double acc[9] = {0};
        double k[9];
        for (std::size_t j = 0; j < src.n; ++j) {
            const V3 d{x[0] - src.x[j], x[1] - src.y[j], x[2] - src.z[j]};
            kern::kij_matrix(dim, d, eps, k);
            for (int c = 0; c < dim * dim; ++c) acc[c] += src.w[j] * k[c];
        }
        for (int c = 0; c < dim * dim; ++c) out.values[node * dim * dim + c] += scale * acc[c];
    });
}

}  // namespace

GridField field_gradient(const ParticleEnsemble& ens, const GridSpec& grid, const Background& bg,
                         int omega, const KernelConfig& cfg) {
    cfg.validate(ens.dim);
    check_dims(ens.dim, grid.dim, "field_gradient");
    GridField out(grid, FieldRank::matrix);
    kij_accumulate(grid, particle_sources(ens), cfg.softening, -static_cast<double>(omega), cfg.threads, out);
    if (!bg.empty()) kij_accumulate(grid, bg.sources(), cfg.softening, static_cast<double>(omega), cfg.threads, out);
    return out;
}

GridField field_gradient(const GridField& rho, const Background& bg, int omega, const KernelConfig& cfg) {
    if (rho.rank != FieldRank::scalar) throw ConfigError("field_gradient: density must be a scalar field");
    cfg.validate(rho.grid.dim);
    const auto nodes = grid_node_positions(rho.grid);
    std::vector<double> node_mass(rho.values);
    const double vol = rho.grid.cell_volume();
    for (double& m : node_mass) m *= vol;
    kern::Sources src{nodes[0].data(), nodes[1].data(), nodes[2].data(), node_mass.data(), node_mass.size()};
    GridField out(rho.grid, FieldRank::matrix);
    kij_accumulate(rho.grid, src, cfg.softening, -static_cast<double>(omega), cfg.threads, out);
    if (!bg.empty())
        kij_accumulate(rho.grid, bg.sources(), cfg.softening, static_cast<double>(omega), cfg.threads, out);
    return out;
}

double potential_energy(const GridField& e_field) {
    if (e_field.rank != FieldRank::vector) throw ConfigError("potential_energy: expected a vector field");
    KahanSum s;
    const int dim = e_field.grid.dim;
    for (std::size_t i = 0; i < e_field.node_count(); ++i) {
        double m = 0.0;
        for (int a = 0; a < dim; ++a) {
            const double v = e_field.values[i * dim + a];
            m += v * v;
        }
        // trapezoid weights on the corner-node grid: exact for constants
        const auto idx = e_field.grid.unflatten(i);
        for (int a = 0; a < dim; ++a)
            if (idx[a] == 0 || idx[a] == e_field.grid.cells[a]) m *= 0.5;
        s.add(m);
    }
    return 0.5 * s.value() * e_field.grid.cell_volume();
}

GridField dt_field(const GridField& current, int omega, const KernelConfig& cfg) {
    if (current.rank != FieldRank::vector) throw ConfigError("dt_field: current must be a vector field");
    cfg.validate(current.grid.dim);
    const GridSpec& g = current.grid;
    const int dim = g.dim;
    const double vol = g.cell_volume();
    GridField out(g, FieldRank::vector);
    parallel_for(g.node_count(), cfg.threads, [&](std::size_t node) {
        const V3 x = g.node_position(node);
        double acc[3] = {0, 0, 0};
        double k[9];
        for (std::size_t j = 0; j < g.node_count(); ++j) {
            const V3 y = g.node_position(j);
            kern::kij_matrix(dim, x - y, cfg.softening, k);
            for (int i = 0; i < dim; ++i) {
                double c = 0.0;
                for (int kk = 0; kk < dim; ++kk) c += k[i * dim + kk] * current.values[j * dim + kk];
                acc[i] += c;
            }
        }
        for (int i = 0; i < dim; ++i) out.values[node * dim + i] = omega * vol * acc[i];
    });
    return out;
}

HelmholtzResidual helmholtz_identity_residual(const GridField& e_field, const GridField& dt_e,
                                              const GridField& current, int omega) {
    if (!(e_field.grid == dt_e.grid) || !(e_field.grid == current.grid))
        throw ConfigError("helmholtz residual: fields must share a grid");
    const int dim = e_field.grid.dim;
    KahanSum e_dot_dte, e_dot_j, n_dte, n_j;
    for (std::size_t i = 0; i < e_field.node_count(); ++i) {
        double d1 = 0.0, d2 = 0.0;
        double em = 0.0, dm = 0.0, jm = 0.0;
        for (int a = 0; a < dim; ++a) {
            const double e = e_field.values[i * dim + a];
            const double de = dt_e.values[i * dim + a];
            const double j = current.values[i * dim + a];
            d1 += e * de;
            d2 += e * j;
            em += e * e;
            dm += de * de;
            jm += j * j;
        }
        e_dot_dte.add(d1);
        e_dot_j.add(d2);
        n_dte.add(std::sqrt(em) * std::sqrt(dm));
        n_j.add(std::sqrt(em) * std::sqrt(jm));
    }
    const double raw = std::abs(e_dot_dte.value() + omega * e_dot_j.value());
    const double denom = n_dte.value() + n_j.value();
    if (denom <= 0.0) return {0.0, true};
    return {raw / denom, false};
}

namespace {

GridField eta_convolve(const GridSpec& grid, const kern::Sources& src, double eps, int threads) {
    GridField out(grid, FieldRank::scalar);
    parallel_for(grid.node_count(), threads, [&](std::size_t node) {
        const V3 x = grid.node_position(node);
        double acc = 0.0;
        for (std::size_t j = 0; j < src.n; ++j) {
            const V3 d{x[0] - src.x[j], x[1] - src.y[j], x[2] - src.z[j]};
            acc += src.w[j] * kern::mollifier_eta(grid.dim, d, eps);
        }
        out.values[node] = acc;
    });
    return out;
}

}  // namespace

GridField mollified_density(const ParticleEnsemble& ens, const GridSpec& grid, double eps, int threads) {
    check_dims(ens.dim, grid.dim, "mollified_density");
    return eta_convolve(grid, particle_sources(ens), eps, threads);
}

GridField mollified_density(const GridField& rho, double eps, int threads) {
    const auto nodes = grid_node_positions(rho.grid);
    std::vector<double> node_mass(rho.values);
    const double vol = rho.grid.cell_volume();
    for (double& m : node_mass) m *= vol;
    kern::Sources src{nodes[0].data(), nodes[1].data(), nodes[2].data(), node_mass.data(), node_mass.size()};
    return eta_convolve(rho.grid, src, eps, threads);
}

GridField mollified_background(const Background& bg, const GridSpec& grid, double eps, int threads) {
    if (bg.empty()) return GridField(grid, FieldRank::scalar);
    return eta_convolve(grid, bg.sources(), eps, threads);
}

double pair_potential_energy(const ParticleEnsemble& ens, const Background& bg, int omega,
                             const KernelConfig& cfg) {
    cfg.validate(ens.dim);
    const double eps = cfg.softening;
    kern::Targets tg{ens.pos[0].data(), ens.pos[1].data(), ens.pos[2].data(), ens.count()};
    std::vector<double> u(ens.count(), 0.0);
    kern::potential_sum(ens.dim, cfg.isa, tg, particle_sources(ens), eps, u.data(), cfg.threads);
    const double self = green_profile_at_zero(ens.dim, eps);
    const double gs = green_scale(ens.dim);
    KahanSum pair;
    for (std::size_t i = 0; i < ens.count(); ++i)
        pair.add(ens.weights[i] * (u[i] - ens.weights[i] * self));
    double w = 0.5 * omega * gs * pair.value();
    if (!bg.empty()) {
        std::vector<double> ub(ens.count(), 0.0);
        kern::potential_sum(ens.dim, cfg.isa, tg, bg.sources(), eps, ub.data(), cfg.threads);
        KahanSum b;
        for (std::size_t i = 0; i < ens.count(); ++i) b.add(ens.weights[i] * ub[i]);
        w -= omega * gs * b.value();
    }
    return w;
}

}  // namespace vp
