#include <cmath>
#include <cstring>

#include "doctest.h"
#include "vpflow/deposit.hpp"
#include "vpflow/ensemble.hpp"
#include "vpflow/errors.hpp"

using namespace vp;

TEST_CASE("uniform ball sampling carries exactly mass/count per particle") {
    InitialDatumSpec spec;
    spec.kind = DatumKind::uniform_ball;
    spec.dim = 3;
    spec.mass = 1.0;
    spec.radius_x = 2.0;
    spec.radius_v = 1.0;
    const auto ens = sample_ensemble(spec, 1000, 42);
    REQUIRE(ens.count() == 1000);
    for (double w : ens.weights) CHECK(w == 1.0 / 1000.0);
    CHECK(total_mass(ens) == 1.0);
    for (std::size_t i = 0; i < ens.count(); ++i) {
        CHECK(norm(ens.position(i)) <= spec.radius_x);
        CHECK(norm(ens.velocity(i)) <= spec.radius_v);
    }
}

TEST_CASE("sampling is bit-deterministic for fixed spec and seed") {
    InitialDatumSpec spec;
    spec.kind = DatumKind::gaussian;
    spec.dim = 3;
    spec.mass = 2.5;
    const auto a = sample_ensemble(spec, 5000, 9001);
    const auto b = sample_ensemble(spec, 5000, 9001);
    for (int c = 0; c < 3; ++c) {
        CHECK(std::memcmp(a.pos[c].data(), b.pos[c].data(), a.count() * sizeof(double)) == 0);
        CHECK(std::memcmp(a.vel[c].data(), b.vel[c].data(), a.count() * sizeof(double)) == 0);
    }
    CHECK(std::memcmp(a.weights.data(), b.weights.data(), a.count() * sizeof(double)) == 0);

    const auto c = sample_ensemble(spec, 5000, 9002);
    CHECK(std::memcmp(a.pos[0].data(), c.pos[0].data(), a.count() * sizeof(double)) != 0);
}

TEST_CASE("gaussian velocity second moment matches the Monte-Carlo oracle") {
    InitialDatumSpec spec;
    spec.kind = DatumKind::gaussian;
    spec.dim = 3;
    spec.mass = 1.0;
    spec.sigma_x = 1.0;
    spec.sigma_v = 1.0;
    const auto ens = sample_ensemble(spec, 100000, 7);
    // E|v|^2 = N sigma_v^2 = 3; second moment = 2 * kinetic / mass
    const double second_moment = 2.0 * kinetic_energy(ens) / total_mass(ens);
    CHECK(second_moment == doctest::Approx(3.0).epsilon(0.02));
}

TEST_CASE("invalid specs are rejected with a message") {
    InitialDatumSpec spec;
    spec.kind = DatumKind::gaussian;
    spec.dim = 3;
    spec.sigma_v = -1.0;
    CHECK_THROWS_AS(sample_ensemble(spec, 10, 1), ConfigError);

    InitialDatumSpec ball;
    ball.kind = DatumKind::uniform_ball;
    ball.radius_x = 0.0;
    CHECK_THROWS_AS(sample_ensemble(ball, 10, 1), ConfigError);

    InitialDatumSpec prod;
    prod.kind = DatumKind::product_of_marginals;
    prod.dim = 2;
    prod.v_power = 2.5;  // not integrable in 2d
    CHECK_THROWS_AS(sample_ensemble(prod, 10, 1), ConfigError);

    CHECK_THROWS_AS(sample_ensemble(InitialDatumSpec{}, 0, 1), ConfigError);
}

TEST_CASE("two-stream drift shows up in the velocity first component") {
    InitialDatumSpec spec;
    spec.kind = DatumKind::two_stream;
    spec.dim = 2;
    spec.mass = 1.0;
    spec.sigma_v = 0.05;
    spec.v_drift = 3.0;
    const auto ens = sample_ensemble(spec, 4000, 11);
    double mean_abs = 0.0;
    for (std::size_t i = 0; i < ens.count(); ++i) mean_abs += std::abs(ens.vel[0][i]);
    mean_abs /= static_cast<double>(ens.count());
    CHECK(mean_abs == doctest::Approx(3.0).epsilon(0.02));
    CHECK(std::abs(total_momentum(ens)[0]) < 0.01);  // streams balance
}

TEST_CASE("oscillation modulates weights as 1 + sin(k.x)") {
    InitialDatumSpec spec;
    spec.kind = DatumKind::gaussian;
    spec.dim = 3;
    spec.mass = 1.0;
    spec.osc_amplitude = 1.0;
    spec.osc_wavevector = v3(4.0, 0.0, 0.0);
    const auto ens = sample_ensemble(spec, 2000, 5);
    const double w0 = 1.0 / 2000.0;
    for (std::size_t i = 0; i < ens.count(); ++i) {
        const double expect = w0 * (1.0 + std::sin(4.0 * ens.pos[0][i]));
        CHECK(ens.weights[i] == doctest::Approx(expect).epsilon(1e-14));
        CHECK(ens.weights[i] >= 0.0);
    }
}

TEST_CASE("singular velocity marginal sampling follows the power-law cdf") {
    InitialDatumSpec spec;
    spec.kind = DatumKind::product_of_marginals;
    spec.dim = 3;
    spec.mass = 1.0;
    spec.radius_x = 1.0;
    spec.v_power = 1.5;
    spec.v_rmax = 2.0;
    const auto ens = sample_ensemble(spec, 50000, 17);
    // P(|v| <= r) = (r/R)^{dim - a} with a = 1.5
    int below = 0;
    const double r_half = 1.0;
    for (std::size_t i = 0; i < ens.count(); ++i)
        if (norm(ens.velocity(i)) <= r_half) ++below;
    const double expect = std::pow(r_half / spec.v_rmax, 3.0 - 1.5);
    CHECK(static_cast<double>(below) / ens.count() == doctest::Approx(expect).epsilon(0.03));
    // kinetic energy stays finite and positive
    CHECK(kinetic_energy(ens) > 0.0);
}
