#pragma once

#include <functional>
#include <vector>

#include "vpflow/ensemble.hpp"
#include "vpflow/field.hpp"

namespace vp {

enum class DriveMode { self_consistent, zero_field, constant_field };

struct AdvanceOptions {
    int store_every_steps = 0;       // 0: pick a stride giving ~32 samples
    bool store_step_sources = false; // keep per-step source positions (frozen field)
    DriveMode mode = DriveMode::self_consistent;
    V3 constant_field{};             // used by constant_field mode
};

// Particle states at one stored sample time.
struct FlowSample {
    double time = 0.0;
    std::array<std::vector<double>, 3> pos;
    std::array<std::vector<double>, 3> vel;
};

// Trajectories Z(s) of an advanced ensemble on [t0, t0 + horizon], sampled
// at a fixed step stride (first and last step always included). Weights are
// those of the initial ensemble and are never modified.
//
// When step sources are stored, the per-step positions freeze the
// self-consistent field as a piecewise (non-autonomous) vector field; test
// particles and backward characteristics integrate exactly that field.
struct FlowHistory {
    int dim = 3;
    int omega = 1;
    double t0 = 0.0;
    double dt = 0.0;
    double horizon = 0.0;
    long nsteps = 0;
    KernelConfig kernel;
    Background background;
    AdvanceOptions options;
    ParticleEnsemble initial;
    std::vector<FlowSample> samples;
    std::vector<std::array<std::vector<double>, 3>> step_positions;  // [step 0..nsteps]

    bool lattice_seeded = false;
    double seed_cell_volume = 0.0;
    double seed_radius = 0.0;

    std::size_t count() const { return initial.count(); }
    const FlowSample& last() const { return samples.back(); }
    // index of the stored sample at time s (within tolerance), error if absent
    std::size_t sample_index_at(double s) const;
    bool has_step_sources() const { return !step_positions.empty(); }
};

// Velocity-Verlet (kick-drift-kick) advancement with the field recomputed
// from the current ensemble every step. Aborts with RunAbort on non-finite
// field values. dt must be positive; the signed variant below also serves
// time-reversed integration.
FlowHistory advance(const ParticleEnsemble& ens, const Background& bg, int omega,
                    const KernelConfig& cfg, double dt, double horizon,
                    const AdvanceOptions& opts = {});
FlowHistory advance_signed(const ParticleEnsemble& ens, const Background& bg, int omega,
                           const KernelConfig& cfg, double dt, long nsteps,
                           const AdvanceOptions& opts);

// Midpoint lattice over [-r, r]^{2N} restricted to the phase-space ball
// B_r; carries the lattice cell volume for measure bookkeeping.
struct ProbeLattice {
    int dim = 3;
    std::array<std::vector<double>, 3> pos;
    std::array<std::vector<double>, 3> vel;
    double cell_volume = 0.0;
    double radius = 0.0;
    std::size_t count() const { return pos[0].size(); }
};

ProbeLattice lattice_in_ball(int dim, double radius, double spacing);

// Integrates test particles through the frozen field of `base` (same steps,
// same sample stride). Requires stored step sources unless the drive mode
// is analytic (zero/constant field).
FlowHistory advance_probes(const FlowHistory& base, const ProbeLattice& probes);

// States at an arbitrary time s within the horizon: stored samples are used
// directly, intermediate times interpolate linearly between samples.
FlowSample states_at(const FlowHistory& h, double s);

// Reversed kick-drift-kick through the frozen field history from time t
// back to t0, for arbitrary phase-space points. extrapolated marks queries
// that left the stored sources' spatial bounding box (inflated 1.5x).
struct BackwardResult {
    std::array<std::vector<double>, 3> pos;
    std::array<std::vector<double>, 3> vel;
    std::vector<char> extrapolated;
};
BackwardResult backward_to_initial(const FlowHistory& h,
                                   const std::array<std::vector<double>, 3>& x,
                                   const std::array<std::vector<double>, 3>& v, double t);

// f(t, x, v) = f0(Z(0; t, (x,v))), the push-forward along the frozen flow.
struct PushForwardResult {
    std::vector<double> values;
    std::vector<char> extrapolated;
};
PushForwardResult push_forward_eval(const FlowHistory& h,
                                    const std::function<double(const V3&, const V3&)>& f0, double t,
                                    const std::array<std::vector<double>, 3>& x,
                                    const std::array<std::vector<double>, 3>& v);

// true iff max over stored samples of |Z(s)| <= lambda (phase-space norm)
std::vector<char> sublevel_mask(const FlowHistory& h, double lambda);

enum class MeasureMode { lattice, mass_weighted };

// measure (or f-mass) of seeds starting in B_r that escape the
// lambda-sublevel; nonincreasing in lambda, nondecreasing in r
double superlevel_measure(const FlowHistory& h, double r, double lambda, MeasureMode mode);
std::vector<double> superlevel_curve(const FlowHistory& h, double r,
                                     const std::vector<double>& lambdas, MeasureMode mode);

struct PhaseBox {
    V3 x_lo{}, x_hi{}, v_lo{}, v_hi{};
};

// max over boxes and samples of (seeded volume landing in the box) / vol(A);
// boxes reaching outside the seeded ball are flagged.
struct CompressibilityResult {
    double l_estimate = 0.0;
    std::vector<double> per_box;
    std::vector<char> flagged;
};
CompressibilityResult compressibility_estimate(const FlowHistory& h, const std::vector<PhaseBox>& boxes);

// One kick-drift-kick step of a single particle in a static field; the
// finite-difference Jacobian of this map is the volume-preservation check.
std::pair<V3, V3> kdk_step_in_field(const std::function<V3(const V3&)>& field, const V3& x,
                                    const V3& v, double dt);

// ensemble view of the state at stored sample k (weights shared with initial)
ParticleEnsemble ensemble_at_sample(const FlowHistory& h, std::size_t k);

}  // namespace vp
