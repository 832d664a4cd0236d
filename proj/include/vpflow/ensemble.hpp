#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "vpflow/vec.hpp"

namespace vp {

// Weighted point cloud in phase space. The weights carry the phase-space
// mass of f and are never touched by flow advancement: transport acts on
// positions and velocities only.
//
// Storage is structure-of-arrays; component arrays at indices >= dim are
// zero-filled so dimension-agnostic loops can run over all three.
struct ParticleEnsemble {
    int dim = 3;
    std::array<std::vector<double>, 3> pos;
    std::array<std::vector<double>, 3> vel;
    std::vector<double> weights;

    std::size_t count() const { return weights.size(); }
    void resize(std::size_t n);
    void validate() const;

    V3 position(std::size_t i) const { return {pos[0][i], pos[1][i], pos[2][i]}; }
    V3 velocity(std::size_t i) const { return {vel[0][i], vel[1][i], vel[2][i]}; }
    void set_position(std::size_t i, const V3& x) { for (int a = 0; a < 3; ++a) pos[a][i] = x[a]; }
    void set_velocity(std::size_t i, const V3& v) { for (int a = 0; a < 3; ++a) vel[a][i] = v[a]; }
};

enum class DatumKind { gaussian, uniform_ball, two_stream, product_of_marginals, table };

DatumKind datum_kind_from_string(const std::string& s);
std::string to_string(DatumKind k);

// Description of the initial distribution f0. The sampled ensemble carries
// weight mass/count per particle; the optional modulation multiplies weights
// by 1 + amplitude*sin(k . x) and is what the weak-convergence experiments
// vary.
struct InitialDatumSpec {
    DatumKind kind = DatumKind::gaussian;
    int dim = 3;
    double mass = 1.0;

    // gaussian / two_stream
    double sigma_x = 1.0;
    double sigma_v = 1.0;
    V3 center{};
    V3 mean_velocity{};
    // uniform_ball
    double radius_x = 1.0;
    double radius_v = 1.0;
    // two_stream
    double v_drift = 1.0;
    // product_of_marginals: x uniform in a ball, |v| ~ r^{-v_power} truncated
    double v_power = 1.0;
    double v_rmax = 1.0;
    // table
    std::string table_path;

    // weight modulation 1 + osc_amplitude * sin(osc_wavevector . x)
    double osc_amplitude = 0.0;
    V3 osc_wavevector{};

    void validate() const;
};

enum class BackgroundKind { zero, gaussian, table };

BackgroundKind background_kind_from_string(const std::string& s);
std::string to_string(BackgroundKind k);

// Autonomous background density rho_b >= 0 subtracted from rho in the field
// equation. Gaussian and table kinds are realized as quadrature sources on a
// grid. lp_exponent declares the L^p class of a table background; gaussian
// and zero are bounded, so they always satisfy the N=3 requirement p > 3/2.
struct BackgroundSpec {
    BackgroundKind kind = BackgroundKind::zero;
    double mass = 0.0;
    double sigma = 1.0;
    V3 center{};
    std::string table_path;
    double lp_exponent = std::numeric_limits<double>::infinity();

    void validate(int dim) const;
};

// Deterministic sampler: fixed (spec, count, seed) gives a bit-identical
// ensemble. Unmodulated kinds carry exactly mass/count per particle so the
// total is mass up to roundoff of the sum.
ParticleEnsemble sample_ensemble(const InitialDatumSpec& spec, std::size_t count, std::uint64_t seed);

}  // namespace vp
