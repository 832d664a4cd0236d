#pragma once

#include <vector>

#include "vpflow/ensemble.hpp"
#include "vpflow/grid.hpp"

namespace vp {

enum class DepositScheme { cic, ngp };

// Deposits are conservative: deposited integral plus the reported outside
// mass equals the summed weights. A particle whose cloud-in-cell support
// would leave the grid along any axis is counted entirely as outside.
struct DensityDeposit {
    GridField rho;          // scalar, mass / volume
    double outside_mass = 0.0;
};

struct CurrentDeposit {
    GridField current;      // vector, mass * velocity / volume
    double outside_mass = 0.0;
    V3 outside_momentum{};
};

DensityDeposit deposit_density(const ParticleEnsemble& ens, const GridSpec& grid,
                               DepositScheme scheme = DepositScheme::cic);
CurrentDeposit deposit_current(const ParticleEnsemble& ens, const GridSpec& grid,
                               DepositScheme scheme = DepositScheme::cic);

// Compensated reductions in particle order.
double total_mass(const ParticleEnsemble& ens);
double kinetic_energy(const ParticleEnsemble& ens);
V3 total_momentum(const ParticleEnsemble& ens);

// Phase-space grid over positions x velocities, used for measure-style
// diagnostics on f itself (equi-integrability, discrete L1 distances).
struct PhaseGridSpec {
    GridSpec x;
    GridSpec v;

    void validate() const;
    std::size_t cell_count() const;
    double cell_volume() const { return x.total_volume() / cell_count_x() * (v.total_volume() / cell_count_v()); }
    double total_volume() const { return x.total_volume() * v.total_volume(); }
    std::size_t cell_count_x() const;
    std::size_t cell_count_v() const;
};

// Histogram of weights over phase-space cells (nearest cell). Particles
// outside the box are accumulated in outside_mass.
struct PhaseHistogram {
    PhaseGridSpec grid;
    std::vector<double> mass;   // per cell
    double outside_mass = 0.0;
};

PhaseHistogram phase_histogram(const ParticleEnsemble& ens, const PhaseGridSpec& grid);

// L1 distance between two ensembles seen as piecewise-constant phase-space
// densities on the given grid (plus the mismatch of outside masses).
double histogram_l1_distance(const ParticleEnsemble& a, const ParticleEnsemble& b, const PhaseGridSpec& grid);

// Captured-mass profile: for each fraction phi, the maximal mass carried by
// a measurable set of measure phi * (total box volume), approximated by the
// densest deposited cells (level sets of the deposited density).
std::vector<double> equi_integrability_profile(const ParticleEnsemble& ens, const PhaseGridSpec& grid,
                                               const std::vector<double>& fractions);

}  // namespace vp
