#pragma once

#include <map>
#include <string>
#include <vector>

#include "vpflow/deposit.hpp"
#include "vpflow/flow.hpp"
#include "vpflow/functionals.hpp"

namespace vp {

// One self-consistent run plus its diagnostics and experiment sequences.
struct ExperimentConfig {
    int dim = 3;
    int omega = +1;
    InitialDatumSpec datum;
    BackgroundSpec background;
    GridSpec background_grid;        // quadrature grid when background != zero

    std::size_t particles = 4000;
    double dt = 2e-3;
    double horizon = 0.5;
    double softening = 0.0;          // <= 0: auto from the mean interparticle distance
    kern::Isa isa = kern::Isa::scalar;
    FieldMethod method = FieldMethod::direct_sum;
    GridSpec convolution_grid;       // used when method == grid_convolution
    int threads = 0;
    std::uint64_t seed = 12345;
    int store_every = 0;
    bool deterministic = true;       // recorded in manifests; reductions are always ordered

    GridSpec diagnostics_grid;       // field energy, current checks, snapshots
    bool field_energy_series = true;

    // sequences
    std::vector<double> mollify_widths;   // strong stability / existence, strictly decreasing
    std::vector<int> oscillation_modes;   // weak stability, strictly increasing, >= 1
    int median_seeds = 3;                 // monotone verdicts use medians over this many seeds

    // probe lattice for flow-measure diagnostics
    double probe_radius = 2.0;
    double probe_spacing = 0.65;

    FunctionalParams functionals;
    std::string outdir;              // empty: no files written

    double resolved_softening() const;
    void validate_run() const;
};

struct DiagnosticsSeries {
    std::vector<double> time;
    std::vector<double> mass;
    std::vector<double> kinetic;
    std::vector<double> pair_potential;   // interaction energy of the softened system
    std::vector<double> total;            // kinetic + pair_potential (conserved invariant)
    std::vector<double> field_energy;     // (1/2) int |E|^2 on the diagnostics grid
    std::vector<double> momentum_x;

    double relative_energy_drift() const;          // max_t |total - total_0| / |total_0|
    double one_sided_energy_excess() const;        // max_t (total - total_0) / |total_0|
};

// Lagrangian-solution checks (nonnegativity, second moment, field from the
// convolution, current moment identity, push-forward weight constancy).
struct SolutionChecks {
    bool weights_nonnegative = false;
    bool weights_unchanged = false;
    double second_moment = 0.0;
    double field_consistency_rel = 0.0;   // dispatch kernels vs naive evaluation
    double current_moment_rel = 0.0;      // grid current vs particle momentum
};

struct RunArtifacts {
    FlowHistory history;
    DiagnosticsSeries diag;
    SolutionChecks checks;
    std::map<std::string, std::string> manifest;
    bool aborted = false;
    std::string abort_reason;
};

RunArtifacts run_simulation(const ExperimentConfig& cfg);

struct Verdict {
    std::string name;
    double metric = 0.0;
    double threshold = 0.0;
    bool less_is_pass = true;
    bool pass = false;
};

struct ExperimentReport {
    std::string suite;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    std::vector<Verdict> verdicts;
    std::map<std::string, std::string> manifest;

    bool all_pass() const;
};

// Theorem-level scenarios. Strong: mollified data converge in L^1 and the
// flows follow. Weak: oscillatory data stay apart in L^1 while weak moments
// and the flows converge. Existence: repulsive-only mollified sequence with
// per-member energy control.
ExperimentReport strong_stability_suite(const ExperimentConfig& cfg);
ExperimentReport weak_stability_suite(const ExperimentConfig& cfg);
ExperimentReport mollified_existence_suite(const ExperimentConfig& cfg);

void write_report(const ExperimentReport& report, const std::string& outdir);
void write_artifacts(const RunArtifacts& artifacts, const std::string& outdir);

}  // namespace vp
