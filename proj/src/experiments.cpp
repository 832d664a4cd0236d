#include "vpflow/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "vpflow/errors.hpp"
#include "vpflow/io.hpp"
#include "vpflow/kahan.hpp"
#include "vpflow/weak_norm.hpp"

namespace vp {

namespace {

double datum_half_width(const InitialDatumSpec& d) {
    switch (d.kind) {
        case DatumKind::gaussian:
        case DatumKind::two_stream:
            return 4.0 * d.sigma_x;
        case DatumKind::uniform_ball:
        case DatumKind::product_of_marginals:
            return 2.0 * d.radius_x;
        case DatumKind::table:
            return 0.0;  // caller must provide grids explicitly
    }
    return 0.0;
}

double datum_velocity_half_width(const InitialDatumSpec& d) {
    switch (d.kind) {
        case DatumKind::gaussian:
            return 4.0 * d.sigma_v;
        case DatumKind::two_stream:
            return 4.0 * d.sigma_v + std::abs(d.v_drift);
        case DatumKind::uniform_ball:
            return std::max(1.0, 2.0 * d.radius_v);
        case DatumKind::product_of_marginals:
            return 2.0 * d.v_rmax;
        case DatumKind::table:
            return 0.0;
    }
    return 0.0;
}

GridSpec auto_grid(const InitialDatumSpec& d, int cells) {
    const double half = datum_half_width(d);
    if (!(half > 0.0))
        throw ConfigError("experiments: table datums need explicit grids (no automatic extent)");
    return GridSpec::cube(d.dim, half, cells);
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

double ExperimentConfig::resolved_softening() const {
    if (softening > 0.0) return softening;
    double char_len;
    switch (datum.kind) {
        case DatumKind::gaussian:
        case DatumKind::two_stream:
            char_len = 3.0 * datum.sigma_x;
            break;
        case DatumKind::uniform_ball:
        case DatumKind::product_of_marginals:
            char_len = 2.0 * datum.radius_x;
            break;
        default:
            throw ConfigError("experiments: table datums need an explicit softening");
    }
    const double mean_spacing =
        char_len / std::pow(static_cast<double>(particles), 1.0 / datum.dim);
    return 0.5 * mean_spacing;
}

void ExperimentConfig::validate_run() const {
    datum.validate();
    if (dim != datum.dim) throw ConfigError("experiments: config and datum dimension differ");
    if (omega != 1 && omega != -1) throw ConfigError("experiments: omega must be +1 or -1");
    if (particles < 1) throw ConfigError("experiments: particles must be >= 1");
    if (!(dt > 0.0) || !(horizon >= dt)) throw ConfigError("experiments: need dt > 0 and horizon >= dt");
    background.validate(dim);
    if (background.kind != BackgroundKind::zero) {
        background_grid.validate();
        if (dim <= 2 && std::abs(datum.mass - background.mass) > 1e-9 * datum.mass)
            throw ConfigError(
                "experiments: N <= 2 finite-energy runs need int(rho0 - rho_b) = 0 "
                "(background mass must match the datum mass)");
    }
    if (median_seeds < 1) throw ConfigError("experiments: median_seeds must be >= 1");
    if (!(probe_radius > 0.0) || !(probe_spacing > 0.0))
        throw ConfigError("experiments: probe lattice parameters must be positive");
    functionals.validate();
}

double DiagnosticsSeries::relative_energy_drift() const {
    if (total.empty()) return 0.0;
    const double e0 = total.front();
    double worst = 0.0;
    for (double e : total) worst = std::max(worst, std::abs(e - e0));
    return worst / std::abs(e0);
}

double DiagnosticsSeries::one_sided_energy_excess() const {
    if (total.empty()) return 0.0;
    const double e0 = total.front();
    double worst = 0.0;
    for (double e : total) worst = std::max(worst, e - e0);
    return worst / std::abs(e0);
}

namespace {

KernelConfig kernel_of(const ExperimentConfig& cfg) {
    KernelConfig k;
    k.softening = cfg.resolved_softening();
    k.method = cfg.method;
    k.convolution_grid = cfg.convolution_grid;
    k.isa = cfg.isa;
    k.threads = cfg.threads;
    return k;
}

Background background_of(const ExperimentConfig& cfg) {
    if (cfg.background.kind == BackgroundKind::zero) return Background::none(cfg.dim);
    return Background::realize(cfg.background, cfg.dim, cfg.background_grid);
}

GridSpec diagnostics_grid_of(const ExperimentConfig& cfg) {
    if (cfg.diagnostics_grid.extent[0] > 0.0) {
        cfg.diagnostics_grid.validate();
        return cfg.diagnostics_grid;
    }
    return auto_grid(cfg.datum, 16);
}

// naive field evaluation independent of the dispatch kernels
V3 naive_field(const ParticleEnsemble& ens, const Background& bg, int omega, double eps, const V3& x) {
    V3 acc{};
    const double eps2 = eps * eps;
    auto add = [&](double sx, double sy, double sz, double w, double sign) {
        const V3 d{x[0] - sx, x[1] - sy, x[2] - sz};
        const double r2 = norm2(d) + eps2;
        double core;
        switch (ens.dim) {
            case 3: core = 1.0 / (r2 * std::sqrt(r2)); break;
            case 2: core = 1.0 / r2; break;
            default: core = 1.0 / std::sqrt(r2); break;
        }
        acc += (sign * w * core) * d;
    };
    for (std::size_t j = 0; j < ens.count(); ++j)
        add(ens.pos[0][j], ens.pos[1][j], ens.pos[2][j], ens.weights[j], 1.0);
    if (!bg.empty())
        for (std::size_t j = 0; j < bg.node_mass.size(); ++j)
            add(bg.pos[0][j], bg.pos[1][j], bg.pos[2][j], bg.node_mass[j], -1.0);
    return (omega / unit_sphere_area(ens.dim)) * acc;
}

DiagnosticsSeries diagnostics_of(const FlowHistory& h, const ExperimentConfig& cfg,
                                 const Background& bg, const GridSpec& diag_grid) {
    DiagnosticsSeries d;
    for (std::size_t k = 0; k < h.samples.size(); ++k) {
        const ParticleEnsemble ens = ensemble_at_sample(h, k);
        d.time.push_back(h.samples[k].time);
        d.mass.push_back(total_mass(ens));
        d.kinetic.push_back(kinetic_energy(ens));
        const double pp = h.options.mode == DriveMode::self_consistent
                              ? pair_potential_energy(ens, bg, h.omega, h.kernel)
                              : 0.0;
        d.pair_potential.push_back(pp);
        d.total.push_back(d.kinetic.back() + pp);
        d.momentum_x.push_back(total_momentum(ens)[0]);
        if (cfg.field_energy_series && h.options.mode == DriveMode::self_consistent) {
            const GridField e = solve_field(ens, diag_grid, bg, h.omega, h.kernel);
            d.field_energy.push_back(potential_energy(e));
        } else {
            d.field_energy.push_back(0.0);
        }
    }
    return d;
}

SolutionChecks checks_of(const FlowHistory& h, const ParticleEnsemble& initial, const Background& bg,
                         const GridSpec& diag_grid) {
    SolutionChecks c;
    const ParticleEnsemble fin = ensemble_at_sample(h, h.samples.size() - 1);
    c.weights_nonnegative = true;
    for (double w : fin.weights)
        if (!(w >= 0.0)) c.weights_nonnegative = false;
    c.weights_unchanged = fin.weights == initial.weights;
    c.second_moment = 2.0 * kinetic_energy(fin);

    if (h.options.mode == DriveMode::self_consistent) {
        // field really is the kernel convolution: dispatch vs naive sums
        std::array<double, 8> px{}, py{}, pz{};
        std::mt19937_64 rng(977);
        std::uniform_int_distribution<std::size_t> pick(0, fin.count() - 1);
        for (int i = 0; i < 8; ++i) {
            const std::size_t j = pick(rng);
            px[i] = fin.pos[0][j] + 0.01;
            py[i] = fin.pos[1][j];
            pz[i] = fin.pos[2][j];
        }
        kern::Targets tg{px.data(), py.data(), pz.data(), 8};
        const FieldValues fv = solve_field_at(fin, tg, bg, h.omega, h.kernel);
        double worst = 0.0;
        for (int i = 0; i < 8; ++i) {
            const V3 ref = naive_field(fin, bg, h.omega, h.kernel.softening, v3(px[i], py[i], pz[i]));
            worst = std::max(worst, norm(fv.at(i) - ref) / (norm(ref) + 1e-300));
        }
        c.field_consistency_rel = worst;
    }

    // current moment identity on the diagnostics grid
    const CurrentDeposit dep = deposit_current(fin, diag_grid);
    V3 grid_p{};
    for (std::size_t i = 0; i < dep.current.node_count(); ++i) grid_p += dep.current.vector_at(i);
    grid_p = diag_grid.cell_volume() * grid_p;
    grid_p += dep.outside_momentum;
    const V3 part_p = total_momentum(fin);
    c.current_moment_rel = norm(grid_p - part_p) / (norm(part_p) + 1e-300);
    return c;
}

std::map<std::string, std::string> manifest_of(const ExperimentConfig& cfg, const char* kind) {
    std::map<std::string, std::string> m;
    m["artifact.kind"] = kind;
    m["artifact.version"] = "1";
    m["run.dim"] = std::to_string(cfg.dim);
    m["run.omega"] = std::to_string(cfg.omega);
    m["run.particles"] = std::to_string(cfg.particles);
    m["run.dt"] = fmt(cfg.dt);
    m["run.horizon"] = fmt(cfg.horizon);
    m["run.softening"] = fmt(cfg.resolved_softening());
    m["run.seed"] = std::to_string(cfg.seed);
    m["run.threads"] = std::to_string(resolve_threads(cfg.threads));
    m["run.kernel_isa"] = kern::isa_name(kern::resolve_isa(cfg.isa));
    m["run.method"] = to_string(cfg.method);
    m["run.deterministic"] = cfg.deterministic ? "true" : "false";
    m["datum.kind"] = to_string(cfg.datum.kind);
    m["datum.mass"] = fmt(cfg.datum.mass);
    m["background.kind"] = to_string(cfg.background.kind);
    return m;
}

}  // namespace

RunArtifacts run_simulation(const ExperimentConfig& cfg) {
    cfg.validate_run();
    const KernelConfig kernel = kernel_of(cfg);
    const Background bg = background_of(cfg);
    const GridSpec diag_grid = diagnostics_grid_of(cfg);
    const ParticleEnsemble ens = sample_ensemble(cfg.datum, cfg.particles, cfg.seed);

    AdvanceOptions opts;
    opts.store_every_steps = cfg.store_every;
    // rho == rho_b shortcut: exact free streaming
    const bool free_stream = cfg.background.kind != BackgroundKind::zero &&
                             cfg.datum.kind == DatumKind::gaussian &&
                             cfg.background.kind == BackgroundKind::gaussian &&
                             std::abs(cfg.background.mass - cfg.datum.mass) < 1e-12 &&
                             std::abs(cfg.background.sigma - cfg.datum.sigma_x) < 1e-12 &&
                             cfg.background.center == cfg.datum.center;
    if (free_stream) opts.mode = DriveMode::zero_field;

    RunArtifacts out;
    out.manifest = manifest_of(cfg, "run");
    out.manifest["run.free_stream"] = free_stream ? "true" : "false";
    try {
        out.history = advance(ens, bg, cfg.omega, kernel, cfg.dt, cfg.horizon, opts);
    } catch (const RunAbort& abort) {
        out.aborted = true;
        out.abort_reason = abort.what();
        if (!cfg.outdir.empty()) {
            ensure_directory(cfg.outdir);
            out.manifest["run.aborted"] = "true";
            out.manifest["run.abort_reason"] = out.abort_reason;
            write_manifest(cfg.outdir + "/manifest.txt", out.manifest);
            write_snapshot(cfg.outdir + "/initial.vlen", ens);
        }
        throw;
    }
    out.diag = diagnostics_of(out.history, cfg, bg, diag_grid);
    out.checks = checks_of(out.history, ens, bg, diag_grid);

    if (!cfg.outdir.empty()) write_artifacts(out, cfg.outdir);
    return out;
}

void write_artifacts(const RunArtifacts& artifacts, const std::string& outdir) {
    ensure_directory(outdir);
    write_manifest(outdir + "/manifest.txt", artifacts.manifest);

    CsvWriter csv({"time", "mass", "kinetic", "pair_potential", "total", "field_energy", "momentum_x"});
    csv.comment("units: time in simulation time, energies in mass*velocity^2, mass in phase-space mass");
    csv.comment("total = kinetic + pair_potential is the invariant of the softened dynamics");
    for (std::size_t k = 0; k < artifacts.diag.time.size(); ++k)
        csv.row({artifacts.diag.time[k], artifacts.diag.mass[k], artifacts.diag.kinetic[k],
                 artifacts.diag.pair_potential[k], artifacts.diag.total[k],
                 artifacts.diag.field_energy[k], artifacts.diag.momentum_x[k]});
    csv.save(outdir + "/diagnostics.csv");

    write_snapshot(outdir + "/initial.vlen", artifacts.history.initial);
    write_snapshot(outdir + "/final.vlen",
                   ensemble_at_sample(artifacts.history, artifacts.history.samples.size() - 1));
}

bool ExperimentReport::all_pass() const {
    for (const auto& v : verdicts)
        if (!v.pass) return false;
    return true;
}

namespace {

Verdict make_verdict(const std::string& name, double metric, double threshold, bool less_is_pass) {
    Verdict v;
    v.name = name;
    v.metric = metric;
    v.threshold = threshold;
    v.less_is_pass = less_is_pass;
    v.pass = less_is_pass ? metric <= threshold : metric >= threshold;
    return v;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

bool nonincreasing(const std::vector<double>& v, double slack = 0.0) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[i - 1] + slack) return false;
    return true;
}

struct MemberRun {
    double param = 0.0;
    ParticleEnsemble datum;
    DiagnosticsSeries diag;
    FlowHistory probes;
    double initial_kinetic = 0.0;
    double initial_field_energy = 0.0;
    std::vector<FlowSample> field_samples;  // source states for field metrics
    KernelConfig kernel;
    Background bg;
    int omega = 1;
};

// advance one member, integrate the common probe lattice through its frozen
// field, and drop the step sources afterwards
MemberRun run_member(const ExperimentConfig& cfg, const ParticleEnsemble& ens,
                     const ProbeLattice& probes, const Background& bg, const GridSpec& diag_grid) {
    MemberRun m;
    m.datum = ens;
    m.kernel = kernel_of(cfg);
    m.bg = bg;
    m.omega = cfg.omega;
    AdvanceOptions opts;
    opts.store_every_steps = cfg.store_every;
    opts.store_step_sources = true;
    FlowHistory h = advance(ens, bg, cfg.omega, m.kernel, cfg.dt, cfg.horizon, opts);
    m.probes = advance_probes(h, probes);
    m.diag = diagnostics_of(h, cfg, bg, diag_grid);
    m.field_samples = h.samples;
    m.initial_kinetic = kinetic_energy(ens);
    {
        const GridField e = solve_field(ens, diag_grid, bg, cfg.omega, m.kernel);
        m.initial_field_energy = potential_energy(e);
    }
    return m;
}

// sup over sample times of || E(.+h) - E ||_{L^p} on the diagnostics grid,
// for axis-aligned shifts by whole cells
std::vector<double> translation_moduli(const MemberRun& m, const GridSpec& grid, double p,
                                       const std::vector<int>& shifts) {
    std::vector<double> sup(shifts.size(), 0.0);
    for (const auto& sample : m.field_samples) {
        ParticleEnsemble ens;
        ens.dim = m.datum.dim;
        ens.pos = sample.pos;
        ens.vel = sample.vel;
        ens.weights = m.datum.weights;
        const GridField e = solve_field(ens, grid, m.bg, m.omega, m.kernel);
        for (std::size_t si = 0; si < shifts.size(); ++si) {
            const int sh = shifts[si];
            KahanSum acc;
            std::size_t counted = 0;
            for (std::size_t n = 0; n < grid.node_count(); ++n) {
                auto idx = grid.unflatten(n);
                if (idx[0] + sh > grid.cells[0]) continue;
                auto jdx = idx;
                jdx[0] += sh;
                const std::size_t n2 = grid.flatten(jdx);
                double d2 = 0.0;
                for (int c = 0; c < grid.dim; ++c) {
                    const double d = e.values[n2 * grid.dim + c] - e.values[n * grid.dim + c];
                    d2 += d * d;
                }
                acc.add(std::pow(std::sqrt(d2), p));
                ++counted;
            }
            if (counted == 0) continue;
            sup[si] = std::max(sup[si], std::pow(acc.value() * grid.cell_volume(), 1.0 / p));
        }
    }
    return sup;
}

// deterministic per-particle mollification shifts, truncated to |.| <= 3 so
// compactly supported data stay compactly supported
void mollification_shifts(std::size_t count, int dim, std::uint64_t seed,
                          std::array<std::vector<double>, 3>& dx,
                          std::array<std::vector<double>, 3>& dv) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int a = 0; a < 3; ++a) {
        dx[a].assign(count, 0.0);
        dv[a].assign(count, 0.0);
    }
    for (std::size_t i = 0; i < count; ++i)
        for (int a = 0; a < dim; ++a) {
            double gx, gv;
            do gx = gauss(rng); while (std::abs(gx) > 3.0);
            do gv = gauss(rng); while (std::abs(gv) > 3.0);
            dx[a][i] = gx;
            dv[a][i] = gv;
        }
}

ParticleEnsemble shifted_ensemble(const ParticleEnsemble& base, double sigma,
                                  const std::array<std::vector<double>, 3>& dx,
                                  const std::array<std::vector<double>, 3>& dv) {
    ParticleEnsemble out = base;
    for (int a = 0; a < out.dim; ++a)
        for (std::size_t i = 0; i < out.count(); ++i) {
            out.pos[a][i] += sigma * dx[a][i];
            out.vel[a][i] += sigma * dv[a][i];
        }
    return out;
}

PhaseGridSpec histogram_grid_of(const ExperimentConfig& cfg) {
    PhaseGridSpec pg;
    pg.x = GridSpec::cube(cfg.dim, datum_half_width(cfg.datum) + 1.0, 6);
    pg.v = GridSpec::cube(cfg.dim, datum_velocity_half_width(cfg.datum) + 1.0, 6);
    return pg;
}

}  // namespace

ExperimentReport strong_stability_suite(const ExperimentConfig& cfg) {
    cfg.validate_run();
    if (cfg.mollify_widths.size() < 2)
        throw ConfigError("strong suite: need at least two mollification widths");
    for (std::size_t i = 1; i < cfg.mollify_widths.size(); ++i)
        if (!(cfg.mollify_widths[i] < cfg.mollify_widths[i - 1]) || !(cfg.mollify_widths[i] > 0.0))
            throw ConfigError("strong suite: mollification widths must be strictly decreasing and positive");

    const Background bg = background_of(cfg);
    const GridSpec diag_grid = diagnostics_grid_of(cfg);
    const ProbeLattice probes = lattice_in_ball(cfg.dim, cfg.probe_radius, cfg.probe_spacing);
    const PhaseGridSpec hist_grid = histogram_grid_of(cfg);
    const double p_test = cfg.dim == 3 ? 1.25 : (cfg.dim == 2 ? 1.5 : 2.0);
    const double alpha_theory = 1.0 - cfg.dim + cfg.dim / p_test;
    const std::vector<int> shifts{1, 2, 4};

    ExperimentReport rep;
    rep.suite = "strong-stability";
    rep.manifest = manifest_of(cfg, "strong-stability");
    rep.columns = {"seed", "width", "data_l1", "deviation", "field_l1_vs_ref", "mod_h1", "mod_h2",
                   "mod_h4", "mod_slope"};

    const std::size_t n_members = cfg.mollify_widths.size();
    std::vector<std::vector<double>> dev_by_member(n_members - 1), data_by_member(n_members),
        fdiff_by_member(n_members - 1);
    double min_slope = 1e300;
    bool moduli_decrease_in_h = true;

    for (int sidx = 0; sidx < cfg.median_seeds; ++sidx) {
        const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(sidx);
        const ParticleEnsemble base = sample_ensemble(cfg.datum, cfg.particles, seed);
        std::array<std::vector<double>, 3> dx, dv;
        mollification_shifts(base.count(), cfg.dim, seed, dx, dv);

        std::vector<MemberRun> members;
        for (double w : cfg.mollify_widths) {
            ExperimentConfig mc = cfg;
            mc.seed = seed;
            members.push_back(run_member(mc, shifted_ensemble(base, w, dx, dv), probes, bg, diag_grid));
            members.back().param = w;
        }
        const MemberRun& ref = members.back();

        for (std::size_t mi = 0; mi < n_members; ++mi) {
            const MemberRun& m = members[mi];
            const double data_l1 = histogram_l1_distance(m.datum, base, hist_grid);
            double dev = 0.0, fdiff = 0.0;
            if (mi + 1 < n_members) {
                dev = deviation_measure(m.probes, ref.probes, cfg.functionals.gamma,
                                        cfg.functionals.r, cfg.horizon);
                fdiff = field_difference_norm(m.probes, ref.probes, cfg.functionals.lambda,
                                              GridSpec::cube(cfg.dim, cfg.functionals.lambda, 8));
                dev_by_member[mi].push_back(dev);
                fdiff_by_member[mi].push_back(fdiff);
            }
            data_by_member[mi].push_back(data_l1);

            const auto moduli = translation_moduli(m, diag_grid, p_test, shifts);
            for (std::size_t k = 1; k < moduli.size(); ++k)
                if (moduli[k] < moduli[k - 1]) moduli_decrease_in_h = false;  // larger h, larger modulus
            std::vector<double> hs;
            for (int sh : shifts) hs.push_back(sh * diag_grid.spacing(0));
            const auto fit = fit_loglog_slope(hs, moduli);
            min_slope = std::min(min_slope, fit.slope);

            rep.rows.push_back({static_cast<double>(seed), m.param, data_l1, dev, fdiff, moduli[0],
                                moduli[1], moduli[2], fit.slope});
        }
    }

    std::vector<double> dev_medians, data_medians, fdiff_medians;
    for (auto& v : data_by_member) data_medians.push_back(median(v));
    for (auto& v : dev_by_member) dev_medians.push_back(median(v));
    for (auto& v : fdiff_by_member) fdiff_medians.push_back(median(v));

    rep.verdicts.push_back(make_verdict("data_l1_decreases_along_members",
                                        nonincreasing(data_medians, 1e-12) ? 1.0 : 0.0, 1.0, false));
    rep.verdicts.push_back(make_verdict("deviation_decreases_along_members",
                                        nonincreasing(dev_medians, 1e-12) ? 1.0 : 0.0, 1.0, false));
    rep.verdicts.push_back(make_verdict("field_l1_decreases_along_members",
                                        nonincreasing(fdiff_medians, 1e-12) ? 1.0 : 0.0, 1.0, false));
    rep.verdicts.push_back(
        make_verdict("translation_modulus_increases_with_h", moduli_decrease_in_h ? 1.0 : 0.0, 1.0, false));
    rep.verdicts.push_back(
        make_verdict("translation_slope_at_least_lemma_exponent", min_slope, 0.9 * alpha_theory, false));

    if (!cfg.outdir.empty()) write_report(rep, cfg.outdir);
    return rep;
}

ExperimentReport weak_stability_suite(const ExperimentConfig& cfg) {
    cfg.validate_run();
    if (cfg.oscillation_modes.size() < 2)
        throw ConfigError("weak suite: need at least two oscillation modes");
    for (std::size_t i = 0; i < cfg.oscillation_modes.size(); ++i) {
        if (cfg.oscillation_modes[i] < 1) throw ConfigError("weak suite: modes must be >= 1");
        if (i > 0 && cfg.oscillation_modes[i] <= cfg.oscillation_modes[i - 1])
            throw ConfigError("weak suite: modes must be strictly increasing");
    }

    const Background bg = background_of(cfg);
    const GridSpec diag_grid = diagnostics_grid_of(cfg);
    const ProbeLattice probes = lattice_in_ball(cfg.dim, cfg.probe_radius, cfg.probe_spacing);

    ExperimentReport rep;
    rep.suite = "weak-stability";
    rep.manifest = manifest_of(cfg, "weak-stability");
    rep.columns = {"seed",     "mode",     "data_l1",  "deviation", "moment_1",
                   "moment_x", "moment_v2", "bound_1", "bound_x",   "bound_v2"};

    const std::size_t n_members = cfg.oscillation_modes.size();
    std::vector<std::vector<double>> dev_by_member(n_members), data_by_member(n_members);
    bool moments_within_bounds = true;

    // 1d marginal grid for the integration-by-parts oracle
    const double xhalf = datum_half_width(cfg.datum) + 1.0;
    const int marg_nodes = 512;

    for (int sidx = 0; sidx < cfg.median_seeds; ++sidx) {
        const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(sidx);
        const ParticleEnsemble base = sample_ensemble(cfg.datum, cfg.particles, seed);

        // reference flow: unmodulated member
        ExperimentConfig mc = cfg;
        mc.seed = seed;
        const MemberRun ref = run_member(mc, base, probes, bg, diag_grid);

        // deposit the three marginal densities D_phi(x1) once per seed
        const double hmarg = 2.0 * xhalf / (marg_nodes - 1);
        std::vector<double> d_one(marg_nodes, 0.0), d_x(marg_nodes, 0.0), d_v2(marg_nodes, 0.0);
        for (std::size_t i = 0; i < base.count(); ++i) {
            const double u = (base.pos[0][i] + xhalf) / hmarg;
            if (!(u >= 0.0) || u >= marg_nodes - 1) continue;
            const int k = static_cast<int>(u);
            const double f = u - k;
            const double w = base.weights[i] / hmarg;
            const double phi_x = base.pos[0][i];
            const double phi_v2 = norm2(base.velocity(i));
            d_one[k] += w * (1.0 - f);
            d_one[k + 1] += w * f;
            d_x[k] += w * (1.0 - f) * phi_x;
            d_x[k + 1] += w * f * phi_x;
            d_v2[k] += w * (1.0 - f) * phi_v2;
            d_v2[k + 1] += w * f * phi_v2;
        }
        auto tv_of = [&](const std::vector<double>& d) {
            double tv = std::abs(d.front()) + std::abs(d.back());
            for (std::size_t k = 1; k < d.size(); ++k) tv += std::abs(d[k] - d[k - 1]);
            return tv;
        };
        auto sin_moment = [&](const std::vector<double>& d, int n) {
            // trapezoid integral of the piecewise-linear marginal times sin(n x)
            KahanSum acc;
            for (int k = 0; k < marg_nodes; ++k) {
                const double x = -xhalf + k * hmarg;
                const double wq = (k == 0 || k == marg_nodes - 1) ? 0.5 : 1.0;
                acc.add(wq * d[k] * std::sin(n * x));
            }
            return acc.value() * hmarg;
        };

        for (std::size_t mi = 0; mi < n_members; ++mi) {
            const int mode = cfg.oscillation_modes[mi];
            ParticleEnsemble member = base;
            KahanSum data_acc;
            for (std::size_t i = 0; i < member.count(); ++i) {
                const double s = std::sin(mode * member.pos[0][i]);
                member.weights[i] = base.weights[i] * (1.0 + s);
                data_acc.add(base.weights[i] * std::abs(s));
            }
            const double data_l1 = data_acc.value();

            const MemberRun m = run_member(mc, member, probes, bg, diag_grid);
            const double dev = deviation_measure(m.probes, ref.probes, cfg.functionals.gamma,
                                                 cfg.functionals.r, cfg.horizon);
            dev_by_member[mi].push_back(dev);
            data_by_member[mi].push_back(data_l1);

            const double m1 = std::abs(sin_moment(d_one, mode));
            const double mx = std::abs(sin_moment(d_x, mode));
            const double mv = std::abs(sin_moment(d_v2, mode));
            const double b1 = (tv_of(d_one) + 2.0 * hmarg * tv_of(d_one)) / mode;
            const double bx = (tv_of(d_x) + 2.0 * hmarg * tv_of(d_x)) / mode;
            const double bv = (tv_of(d_v2) + 2.0 * hmarg * tv_of(d_v2)) / mode;
            if (m1 > b1 || mx > bx || mv > bv) moments_within_bounds = false;

            rep.rows.push_back({static_cast<double>(seed), static_cast<double>(mode), data_l1, dev,
                                m1, mx, mv, b1, bx, bv});
        }
    }

    std::vector<double> dev_medians, data_medians;
    for (auto& v : data_by_member) data_medians.push_back(median(v));
    for (auto& v : dev_by_member) dev_medians.push_back(median(v));

    // the signature separation: data distances never vanish...
    double data_floor_ratio = 1e300;
    for (double d : data_medians) data_floor_ratio = std::min(data_floor_ratio, d / data_medians.front());
    rep.verdicts.push_back(make_verdict("data_l1_stays_above_half_first", data_floor_ratio, 0.5, false));
    // ...while the flows converge
    rep.verdicts.push_back(make_verdict("deviation_falls_below_fifth_of_first",
                                        dev_medians.front() > 0.0
                                            ? dev_medians.back() / dev_medians.front()
                                            : 0.0,
                                        0.2, true));
    rep.verdicts.push_back(make_verdict("weak_moments_obey_1_over_n_bound",
                                        moments_within_bounds ? 1.0 : 0.0, 1.0, false));

    if (!cfg.outdir.empty()) write_report(rep, cfg.outdir);
    return rep;
}

ExperimentReport mollified_existence_suite(const ExperimentConfig& cfg) {
    if (cfg.omega != 1)
        throw ConfigError(
            "existence suite: only the repulsive case omega = +1 is covered "
            "(attractive runs are refused)");
    cfg.validate_run();
    if (cfg.mollify_widths.size() < 2)
        throw ConfigError("existence suite: need at least two mollification widths");
    for (std::size_t i = 1; i < cfg.mollify_widths.size(); ++i)
        if (!(cfg.mollify_widths[i] < cfg.mollify_widths[i - 1]) || !(cfg.mollify_widths[i] > 0.0))
            throw ConfigError("existence suite: widths must be strictly decreasing and positive");

    const Background bg = background_of(cfg);
    const GridSpec diag_grid = diagnostics_grid_of(cfg);
    const ProbeLattice probes = lattice_in_ball(cfg.dim, cfg.probe_radius, cfg.probe_spacing);

    ExperimentReport rep;
    rep.suite = "mollified-existence";
    rep.manifest = manifest_of(cfg, "mollified-existence");
    rep.columns = {"seed", "width", "energy_excess", "energy_drift", "initial_energy", "deviation"};

    const std::size_t n_members = cfg.mollify_widths.size();
    std::vector<std::vector<double>> dev_by_member(n_members - 1);
    double worst_excess = 0.0;
    double worst_mollpres_ratio = 0.0;

    for (int sidx = 0; sidx < cfg.median_seeds; ++sidx) {
        const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(sidx);
        const ParticleEnsemble base = sample_ensemble(cfg.datum, cfg.particles, seed);
        std::array<std::vector<double>, 3> dx, dv;
        mollification_shifts(base.count(), cfg.dim, seed, dx, dv);

        const double base_kin = kinetic_energy(base);
        const double base_fe = potential_energy(solve_field(base, diag_grid, bg, cfg.omega, kernel_of(cfg)));
        const double base_energy = base_kin + base_fe;

        std::vector<MemberRun> members;
        for (double w : cfg.mollify_widths) {
            ExperimentConfig mc = cfg;
            mc.seed = seed;
            members.push_back(run_member(mc, shifted_ensemble(base, w, dx, dv), probes, bg, diag_grid));
            members.back().param = w;
        }
        const MemberRun& ref = members.back();

        for (std::size_t mi = 0; mi < n_members; ++mi) {
            const MemberRun& m = members[mi];
            const double excess = m.diag.one_sided_energy_excess();
            worst_excess = std::max(worst_excess, excess);
            double dev = 0.0;
            if (mi + 1 < n_members) {
                dev = deviation_measure(m.probes, ref.probes, cfg.functionals.gamma,
                                        cfg.functionals.r, cfg.horizon);
                dev_by_member[mi].push_back(dev);
            }
            // approximation preserves the initial energy up to a tolerance
            // for the finest members
            const double init_energy = m.initial_kinetic + m.initial_field_energy;
            if (mi + 2 >= n_members)
                worst_mollpres_ratio = std::max(worst_mollpres_ratio, init_energy / base_energy);
            rep.rows.push_back({static_cast<double>(seed), m.param, excess,
                                m.diag.relative_energy_drift(), init_energy, dev});
        }
    }

    std::vector<double> dev_medians;
    for (auto& v : dev_by_member) dev_medians.push_back(median(v));

    rep.verdicts.push_back(make_verdict("energy_never_exceeds_initial", worst_excess, 1e-3, true));
    rep.verdicts.push_back(
        make_verdict("mollified_initial_energy_within_two_percent", worst_mollpres_ratio, 1.02, true));
    rep.verdicts.push_back(make_verdict("deviations_cauchy_along_members",
                                        nonincreasing(dev_medians, 1e-12) ? 1.0 : 0.0, 1.0, false));

    if (!cfg.outdir.empty()) write_report(rep, cfg.outdir);
    return rep;
}

void write_report(const ExperimentReport& report, const std::string& outdir) {
    ensure_directory(outdir);
    write_manifest(outdir + "/manifest.txt", report.manifest);

    CsvWriter csv(report.columns);
    csv.comment("suite: " + report.suite);
    for (const auto& row : report.rows) csv.row(row);
    csv.save(outdir + "/metrics.csv");

    std::ostringstream os;
    os.precision(12);
    for (const auto& v : report.verdicts)
        os << (v.pass ? "PASS" : "FAIL") << " " << v.name << " metric=" << v.metric
           << (v.less_is_pass ? " <= " : " >= ") << v.threshold << "\n";
    std::ofstream f(outdir + "/verdicts.txt");
    if (!f) throw ConfigError("cannot write verdicts to '" + outdir + "'");
    f << os.str();
}

}  // namespace vp
