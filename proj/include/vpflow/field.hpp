#pragma once

#include <array>
#include <vector>

#include "vpflow/ensemble.hpp"
#include "vpflow/grid.hpp"
#include "vpflow/kernels.hpp"

namespace vp {

enum class FieldMethod { direct_sum, grid_convolution };

FieldMethod field_method_from_string(const std::string& s);
std::string to_string(FieldMethod m);

// Softened free-space kernel configuration. The Plummer regularization
// |x|^2 -> |x|^2 + eps^2 applies to every convolution; eps must be positive
// for summed kernels (pointwise kernel evaluations may use eps = 0).
struct KernelConfig {
    double softening = 0.05;
    FieldMethod method = FieldMethod::direct_sum;
    kern::Isa isa = kern::Isa::scalar;
    int threads = 0;            // 0 = hardware
    // grid used to gather/deposit when method == grid_convolution
    GridSpec convolution_grid;

    void validate(int dim) const;
};

// rho_b realized as fixed quadrature sources (node value * cell volume) on
// its own grid; empty for the zero background.
struct Background {
    BackgroundSpec spec;
    int dim = 3;
    std::array<std::vector<double>, 3> pos;
    std::vector<double> node_mass;

    static Background none(int dim);
    static Background realize(const BackgroundSpec& spec, int dim, const GridSpec& quad_grid);
    bool empty() const { return node_mass.empty(); }
    double mass() const;
    kern::Sources sources() const;
};

// SoA field values at arbitrary targets.
struct FieldValues {
    std::array<std::vector<double>, 3> e;
    std::size_t size() const { return e[0].size(); }
    V3 at(std::size_t i) const { return {e[0][i], e[1][i], e[2][i]}; }
};

// E = omega/|S^{N-1}| * k_eps * (rho - rho_b) evaluated at explicit targets
// from particle sources (direct sum).
FieldValues solve_field_at(const ParticleEnsemble& sources, const kern::Targets& targets,
                           const Background& bg, int omega, const KernelConfig& cfg);

// Field at the particles themselves. direct_sum: exact pair sums (the
// self-term vanishes inside the kernel). grid_convolution: deposit to
// cfg.convolution_grid, solve node-to-node, gather back multilinearly.
FieldValues solve_field_at_particles(const ParticleEnsemble& ens, const Background& bg, int omega,
                                     const KernelConfig& cfg);

// Multilinear gather of a vector grid field (positions clamped to the box).
V3 interpolate_vector(const GridField& f, const V3& x);

// Field on grid nodes from particle sources.
GridField solve_field(const ParticleEnsemble& ens, const GridSpec& grid, const Background& bg,
                      int omega, const KernelConfig& cfg);

// Field on the density's own grid from a gridded density (quadrature
// convolution with the softened kernel).
GridField solve_field(const GridField& rho, const Background& bg, int omega, const KernelConfig& cfg);

// U = omega * G_eps * (rho - rho_b) on grid nodes; -grad U = E. For dim <= 2
// the kernel has no decay, so U is reported in the gauge with zero mean over
// the grid boundary nodes.
GridField potential(const ParticleEnsemble& ens, const GridSpec& grid, const Background& bg,
                    int omega, const KernelConfig& cfg);
GridField potential(const GridField& rho, const Background& bg, int omega, const KernelConfig& cfg);

// (D_x E)_ij = -omega * sum_sources mass * K^eps_ij(x - y); trace equals
// omega * (rho_eps - rho_b,eps) with the Plummer-mollified densities.
GridField field_gradient(const ParticleEnsemble& ens, const GridSpec& grid, const Background& bg,
                         int omega, const KernelConfig& cfg);
GridField field_gradient(const GridField& rho, const Background& bg, int omega, const KernelConfig& cfg);

// (1/2) sum_nodes |E|^2 * cellvol
double potential_energy(const GridField& e_field);

// dt E_i = omega * sum_k K^eps_ik * J_k, quadrature over the current's grid.
GridField dt_field(const GridField& current, int omega, const KernelConfig& cfg);

// | int E.dtE + omega int E.J | / ( int |E||dtE| + int |E||J| ); flagged
// degenerate (value 0) when the normalization vanishes.
struct HelmholtzResidual {
    double value = 0.0;
    bool degenerate = false;
};
HelmholtzResidual helmholtz_identity_residual(const GridField& e_field, const GridField& dt_e,
                                              const GridField& current, int omega);

// Plummer-mollified density rho_eps = eta_eps * rho at grid nodes (used by
// the trace and Poisson residual diagnostics).
GridField mollified_density(const ParticleEnsemble& ens, const GridSpec& grid, double eps, int threads);
GridField mollified_density(const GridField& rho, double eps, int threads);
GridField mollified_background(const Background& bg, const GridSpec& grid, double eps, int threads);

// Interaction potential energy of the particle system itself,
//   (omega/2) sum_{i != j} w_i w_j G_eps(x_i - x_j)  - omega sum_i w_i (G_eps * rho_b)(x_i),
// the quantity conserved (with the kinetic energy) by the softened dynamics.
double pair_potential_energy(const ParticleEnsemble& ens, const Background& bg, int omega,
                             const KernelConfig& cfg);

}  // namespace vp
