#include <cmath>
#include <random>

#include "doctest.h"
#include "vpflow/deposit.hpp"
#include "vpflow/errors.hpp"
#include "vpflow/field.hpp"
#include "vpflow/flow.hpp"

using namespace vp;

namespace {

ParticleEnsemble gaussian_cloud(std::size_t n, std::uint64_t seed, double sigma_v = 1.0) {
    InitialDatumSpec spec;
    spec.kind = DatumKind::gaussian;
    spec.dim = 3;
    spec.mass = 1.0;
    spec.sigma_v = sigma_v;
    return sample_ensemble(spec, n, seed);
}

KernelConfig desk_kernel(double eps = 0.1) {
    KernelConfig cfg;
    cfg.softening = eps;
    cfg.isa = kern::best_isa();
    cfg.threads = 2;
    return cfg;
}

double total_energy(const FlowHistory& h, std::size_t sample) {
    const auto ens = ensemble_at_sample(h, sample);
    return kinetic_energy(ens) + pair_potential_energy(ens, h.background, h.omega, h.kernel);
}

double energy_drift(const FlowHistory& h) {
    const double e0 = total_energy(h, 0);
    double worst = 0.0;
    for (std::size_t k = 1; k < h.samples.size(); ++k)
        worst = std::max(worst, std::abs(total_energy(h, k) - e0));
    return worst / std::abs(e0);
}

}  // namespace

TEST_CASE("zero field gives exact free streaming") {
    auto ens = gaussian_cloud(200, 3);
    AdvanceOptions opts;
    opts.mode = DriveMode::zero_field;
    const auto h = advance(ens, Background::none(3), 1, desk_kernel(), 0.01, 1.0, opts);
    const auto& fin = h.last();
    for (std::size_t i = 0; i < ens.count(); ++i)
        for (int a = 0; a < 3; ++a) {
            CHECK(fin.pos[a][i] == doctest::Approx(ens.pos[a][i] + 1.0 * ens.vel[a][i]).epsilon(1e-13));
            CHECK(fin.vel[a][i] == ens.vel[a][i]);
        }
    CHECK(h.initial.weights == ens.weights);  // weights untouched
}

TEST_CASE("constant external field is integrated exactly by Verlet") {
    auto ens = gaussian_cloud(64, 5);
    AdvanceOptions opts;
    opts.mode = DriveMode::constant_field;
    opts.constant_field = v3(0.3, -0.2, 0.1);
    const double T = 0.5;
    const auto h = advance(ens, Background::none(3), 1, desk_kernel(), 0.005, T, opts);
    const auto& fin = h.last();
    for (std::size_t i = 0; i < ens.count(); ++i)
        for (int a = 0; a < 3; ++a) {
            const double vexp = ens.vel[a][i] + T * opts.constant_field[a];
            const double xexp = ens.pos[a][i] + T * ens.vel[a][i] + 0.5 * T * T * opts.constant_field[a];
            CHECK(fin.vel[a][i] == doctest::Approx(vexp).epsilon(1e-12));
            CHECK(fin.pos[a][i] == doctest::Approx(xexp).epsilon(1e-11));
        }
}

TEST_CASE("two repulsive particles: drift, dt scaling, and the RK4 oracle") {
    ParticleEnsemble two;
    two.dim = 3;
    two.resize(2);
    two.set_position(0, v3(-0.5, 0.0, 0.0));
    two.set_position(1, v3(0.5, 0.0, 0.0));
    two.weights = {0.5, 0.5};
    const auto cfg = desk_kernel(0.05);

    AdvanceOptions opts;
    opts.store_every_steps = 100;
    const auto h1 = advance(two, Background::none(3), 1, cfg, 1e-3, 1.0, opts);
    const double d1 = energy_drift(h1);
    CHECK(d1 < 1e-4);

    opts.store_every_steps = 200;
    const auto h2 = advance(two, Background::none(3), 1, cfg, 5e-4, 1.0, opts);
    const double d2 = energy_drift(h2);
    CHECK(d1 / d2 > 2.5);  // second-order integrator: ~4x per dt halving
    CHECK(d1 / d2 < 6.5);

    // high-accuracy RK4 reference for the same two-body problem
    const double eps2 = cfg.softening * cfg.softening;
    auto accel = [&](double x1, double x2) {
        const double dx = x1 - x2;
        const double r2 = dx * dx + eps2;
        return 0.5 * dx / (4.0 * M_PI * r2 * std::sqrt(r2));  // omega=+1, source weight 0.5
    };
    double x1 = -0.5, x2 = 0.5, v1 = 0.0, v2 = 0.0;
    const double hh = 1e-5;
    for (int s = 0; s < 100000; ++s) {
        auto deriv = [&](double ax1, double ax2, double av1, double av2) {
            return std::array<double, 4>{av1, av2, accel(ax1, ax2), accel(ax2, ax1)};
        };
        const auto k1 = deriv(x1, x2, v1, v2);
        const auto k2 = deriv(x1 + 0.5 * hh * k1[0], x2 + 0.5 * hh * k1[1], v1 + 0.5 * hh * k1[2],
                              v2 + 0.5 * hh * k1[3]);
        const auto k3 = deriv(x1 + 0.5 * hh * k2[0], x2 + 0.5 * hh * k2[1], v1 + 0.5 * hh * k2[2],
                              v2 + 0.5 * hh * k2[3]);
        const auto k4 = deriv(x1 + hh * k3[0], x2 + hh * k3[1], v1 + hh * k3[2], v2 + hh * k3[3]);
        x1 += hh / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]);
        x2 += hh / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]);
        v1 += hh / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]);
        v2 += hh / 6.0 * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3]);
    }
    CHECK(h2.last().pos[0][0] == doctest::Approx(x1).epsilon(1e-5));
    CHECK(h2.last().pos[0][1] == doctest::Approx(x2).epsilon(1e-5));
    CHECK(h2.last().vel[0][0] == doctest::Approx(v1).epsilon(1e-4));
}

TEST_CASE("self-consistent runs are time-reversible to fine tolerance") {
    auto ens = gaussian_cloud(512, 11, 0.5);
    const auto cfg = desk_kernel(0.1);
    const auto fwd = advance(ens, Background::none(3), 1, cfg, 2e-3, 0.5, {});
    ParticleEnsemble endstate = ensemble_at_sample(fwd, fwd.samples.size() - 1);
    const auto bwd = advance_signed(endstate, Background::none(3), 1, cfg, -2e-3, fwd.nsteps, {});
    double worst = 0.0;
    for (std::size_t i = 0; i < ens.count(); ++i)
        for (int a = 0; a < 3; ++a) {
            worst = std::max(worst, std::abs(bwd.last().pos[a][i] - ens.pos[a][i]));
            worst = std::max(worst, std::abs(bwd.last().vel[a][i] - ens.vel[a][i]));
        }
    CHECK(worst < 1e-8);
}

TEST_CASE("one-step map has unit Jacobian determinant (finite differences)") {
    auto sources = gaussian_cloud(300, 13);
    const auto cfg = desk_kernel(0.15);
    const Background bg = Background::none(3);
    auto field = [&](const V3& x) {
        std::array<double, 3> px{x[0], x[1], x[2]};
        kern::Targets tg{&px[0], &px[1], &px[2], 1};
        const auto fv = solve_field_at(sources, tg, bg, 1, cfg);
        return fv.at(0);
    };

    std::mt19937_64 rng(17);
    std::normal_distribution<double> g(0.0, 1.0);
    const double dt = 1e-3, fd = 1e-5;
    int tested = 0;
    while (tested < 25) {
        V3 x = v3(g(rng), g(rng), g(rng));
        V3 v = v3(g(rng), g(rng), g(rng));
        // keep the probe state away from the nearest source so the force
        // stays smooth on the finite-difference stencil
        double nearest = 1e9;
        for (std::size_t i = 0; i < sources.count(); ++i)
            nearest = std::min(nearest, norm(x - sources.position(i)));
        if (nearest < 2.0 * cfg.softening) continue;
        ++tested;

        double jac[6][6];
        for (int c = 0; c < 6; ++c) {
            V3 xp = x, vp = v, xm = x, vm = v;
            if (c < 3) {
                xp[c] += fd;
                xm[c] -= fd;
            } else {
                vp[c - 3] += fd;
                vm[c - 3] -= fd;
            }
            const auto [xf, vf] = kdk_step_in_field(field, xp, vp, dt);
            const auto [xb, vb] = kdk_step_in_field(field, xm, vm, dt);
            for (int r = 0; r < 3; ++r) {
                jac[r][c] = (xf[r] - xb[r]) / (2.0 * fd);
                jac[r + 3][c] = (vf[r] - vb[r]) / (2.0 * fd);
            }
        }
        // LU determinant of the 6x6
        double det = 1.0;
        for (int k = 0; k < 6; ++k) {
            int piv = k;
            for (int r = k + 1; r < 6; ++r)
                if (std::abs(jac[r][k]) > std::abs(jac[piv][k])) piv = r;
            if (piv != k) {
                for (int c = 0; c < 6; ++c) std::swap(jac[k][c], jac[piv][c]);
                det = -det;
            }
            det *= jac[k][k];
            for (int r = k + 1; r < 6; ++r) {
                const double f = jac[r][k] / jac[k][k];
                for (int c = k; c < 6; ++c) jac[r][c] -= f * jac[k][c];
            }
        }
        CHECK(std::abs(det - 1.0) < 1e-10);
    }
}

TEST_CASE("states_at and backward evaluation") {
    auto ens = gaussian_cloud(128, 19, 0.7);
    const auto cfg = desk_kernel(0.1);
    AdvanceOptions opts;
    opts.store_step_sources = true;
    opts.store_every_steps = 25;
    const auto h = advance(ens, Background::none(3), 1, cfg, 4e-3, 1.0, opts);

    SUBCASE("s = 0 returns the initial ensemble exactly") {
        const auto s0 = states_at(h, 0.0);
        for (int a = 0; a < 3; ++a) {
            CHECK(s0.pos[a] == ens.pos[a]);
            CHECK(s0.vel[a] == ens.vel[a]);
        }
    }

    SUBCASE("out-of-horizon times are rejected") {
        CHECK_THROWS_AS(states_at(h, -0.5), ConfigError);
        CHECK_THROWS_AS(states_at(h, 2.0), ConfigError);
    }

    SUBCASE("stored trajectories compose exactly on sample times") {
        const auto mid = states_at(h, 0.5);
        const auto fin = states_at(h, 1.0);
        // single trajectory store: Z(1, 0.5, Z(0.5, 0, z)) is just Z(1, 0, z)
        CHECK(mid.pos[0].size() == fin.pos[0].size());
        CHECK(h.sample_index_at(0.5) > 0);
    }

    SUBCASE("backward evaluation from the final state recovers the seeds") {
        const auto& fin = h.last();
        const auto back = backward_to_initial(h, fin.pos, fin.vel, h.horizon);
        double worst = 0.0;
        for (std::size_t i = 0; i < ens.count(); ++i)
            for (int a = 0; a < 3; ++a) {
                worst = std::max(worst, std::abs(back.pos[a][i] - ens.pos[a][i]));
                worst = std::max(worst, std::abs(back.vel[a][i] - ens.vel[a][i]));
            }
        CHECK(worst < 1e-9);
    }
}

TEST_CASE("push-forward reproduces free-streaming transport of a gaussian") {
    InitialDatumSpec spec;
    spec.kind = DatumKind::gaussian;
    spec.dim = 3;
    auto ens = sample_ensemble(spec, 64, 23);
    AdvanceOptions opts;
    opts.mode = DriveMode::zero_field;
    const auto h = advance(ens, Background::none(3), 1, desk_kernel(), 0.01, 0.5, opts);

    auto f0 = [](const V3& x, const V3& v) {
        return std::exp(-0.5 * (norm2(x) + norm2(v)));
    };

    std::mt19937_64 rng(29);
    std::normal_distribution<double> g(0.0, 1.0);
    std::array<std::vector<double>, 3> qx, qv;
    const std::size_t nq = 100;
    for (int a = 0; a < 3; ++a) {
        qx[a].resize(nq);
        qv[a].resize(nq);
        for (std::size_t i = 0; i < nq; ++i) {
            qx[a][i] = g(rng);
            qv[a][i] = g(rng);
        }
    }
    const double t = 0.5;
    const auto pf = push_forward_eval(h, f0, t, qx, qv);
    for (std::size_t i = 0; i < nq; ++i) {
        const V3 x{qx[0][i], qx[1][i], qx[2][i]};
        const V3 v{qv[0][i], qv[1][i], qv[2][i]};
        const double expected = f0(x - t * v, v);  // analytic transport
        CHECK(pf.values[i] == doctest::Approx(expected).epsilon(1e-9));
    }

    // t = 0 is the identity
    const auto pf0 = push_forward_eval(h, f0, 0.0, qx, qv);
    for (std::size_t i = 0; i < nq; ++i) {
        const V3 x{qx[0][i], qx[1][i], qx[2][i]};
        const V3 v{qv[0][i], qv[1][i], qv[2][i]};
        CHECK(pf0.values[i] == f0(x, v));
    }
}

TEST_CASE("particle-carried f values are constant along trajectories") {
    // weights are the carried f0 masses; advancement never touches them
    auto ens = gaussian_cloud(256, 31);
    const auto before = ens.weights;
    const auto h = advance(ens, Background::none(3), 1, desk_kernel(), 5e-3, 0.25, {});
    CHECK(h.initial.weights == before);
}

TEST_CASE("sublevel masks and superlevel measures") {
    const auto lat = lattice_in_ball(3, 1.5, 0.75);
    REQUIRE(lat.count() > 10);

    // free streaming from the lattice
    ParticleEnsemble seeds;
    seeds.dim = 3;
    seeds.pos = lat.pos;
    seeds.vel = lat.vel;
    seeds.weights.assign(lat.count(), 1.0 / lat.count());
    AdvanceOptions opts;
    opts.mode = DriveMode::zero_field;
    auto h = advance(seeds, Background::none(3), 1, desk_kernel(), 0.01, 1.0, opts);
    h.lattice_seeded = true;
    h.seed_cell_volume = lat.cell_volume;
    h.seed_radius = lat.radius;

    SUBCASE("lambda larger than any trajectory bound keeps every seed") {
        // free streaming from B_r with speeds <= r: |Z(s)| <= r + T r
        const auto mask = sublevel_mask(h, 1.5 + 1.0 * 1.5 + 1e-9);
        for (char m : mask) CHECK(m == 1);
        CHECK(superlevel_measure(h, 1.5, 1.5 * (1.0 + 1.0) + 1e-9, MeasureMode::lattice) == 0.0);
    }

    SUBCASE("lambda = 0 excludes every nontrivial seed") {
        const auto mask = sublevel_mask(h, 0.0);
        int kept = 0;
        for (char m : mask) kept += m;
        CHECK(kept == 0);
    }

    SUBCASE("g(r, lambda) is nonincreasing in lambda and nondecreasing in r") {
        const std::vector<double> lambdas{0.5, 1.0, 1.5, 2.0, 3.5};
        const auto g1 = superlevel_curve(h, 1.0, lambdas, MeasureMode::lattice);
        const auto g2 = superlevel_curve(h, 1.5, lambdas, MeasureMode::lattice);
        for (std::size_t k = 1; k < lambdas.size(); ++k) CHECK(g1[k] <= g1[k - 1]);
        for (std::size_t k = 0; k < lambdas.size(); ++k) CHECK(g2[k] >= g1[k]);
    }

    SUBCASE("mass-weighted variant works on ordinary runs") {
        const double m = superlevel_measure(h, 1.5, 0.1, MeasureMode::mass_weighted);
        CHECK(m > 0.0);
        CHECK(m <= 1.0 + 1e-12);
    }
}

TEST_CASE("compressibility of shear flows is one") {
    // spacing 0.25 aligns the probe box edges with lattice cell boundaries
    const auto lat = lattice_in_ball(2, 2.0, 0.25);
    ParticleEnsemble seeds;
    seeds.dim = 2;
    seeds.pos = lat.pos;
    seeds.vel = lat.vel;
    seeds.weights.assign(lat.count(), 1.0);
    AdvanceOptions opts;
    opts.mode = DriveMode::zero_field;
    opts.store_every_steps = 50;
    auto h = advance(seeds, Background::none(2), 1, desk_kernel(), 0.01, 0.5, opts);
    h.lattice_seeded = true;
    h.seed_cell_volume = lat.cell_volume;
    h.seed_radius = lat.radius;

    PhaseBox inner;
    inner.x_lo = v3(-1.0, -1.0);
    inner.x_hi = v3(1.0, 1.0);
    inner.v_lo = v3(-1.0, -1.0);
    inner.v_hi = v3(1.0, 1.0);
    PhaseBox outer = inner;
    outer.x_hi = v3(3.0, 1.0);  // pokes outside the seeded ball

    const auto res = compressibility_estimate(h, {inner, outer});
    CHECK(res.flagged[0] == 0);
    CHECK(res.flagged[1] == 1);
    CHECK(res.per_box[0] == doctest::Approx(1.0).epsilon(0.15));  // counting granularity

    CHECK_THROWS_AS(compressibility_estimate(h, {}), ConfigError);
}

TEST_CASE("probe advancement matches direct advancement for analytic drives") {
    const auto lat = lattice_in_ball(3, 1.2, 0.4);
    ParticleEnsemble base_ens = gaussian_cloud(64, 37);
    AdvanceOptions opts;
    opts.mode = DriveMode::constant_field;
    opts.constant_field = v3(0.1, 0.0, -0.2);
    const auto base = advance(base_ens, Background::none(3), 1, desk_kernel(), 0.01, 0.5, opts);

    const auto probes = advance_probes(base, lat);
    CHECK(probes.lattice_seeded);
    CHECK(probes.samples.size() == base.samples.size());
    // constant field: analytic endpoint
    const double T = base.horizon;
    for (std::size_t i = 0; i < lat.count(); ++i)
        for (int a = 0; a < 3; ++a) {
            const double vexp = lat.vel[a][i] + T * opts.constant_field[a];
            CHECK(probes.last().vel[a][i] == doctest::Approx(vexp).epsilon(1e-12));
        }
}

TEST_CASE("aborts and argument validation") {
    auto ens = gaussian_cloud(16, 41);
    const auto cfg = desk_kernel();
    CHECK_THROWS_AS(advance(ens, Background::none(3), 1, cfg, -0.1, 1.0, {}), ConfigError);
    CHECK_THROWS_AS(advance(ens, Background::none(3), 1, cfg, 0.1, 0.05, {}), ConfigError);
    CHECK_THROWS_AS(advance(ens, Background::none(3), 2, cfg, 0.1, 1.0, {}), ConfigError);
    KernelConfig bad = cfg;
    bad.softening = 0.0;
    CHECK_THROWS_AS(advance(ens, Background::none(3), 1, bad, 0.1, 1.0, {}), ConfigError);
}
