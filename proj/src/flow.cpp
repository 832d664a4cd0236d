#include "vpflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vpflow/errors.hpp"
#include "vpflow/kahan.hpp"
#include "vpflow/parallel.hpp"

namespace vp {

namespace {

using Soa3 = std::array<std::vector<double>, 3>;

struct FieldScratch {
    Soa3 acc;
    Soa3 bg_acc;
};

// E = omega/S_N (self sum - background sum) at the source particles
void self_consistent_field(int dim, const Soa3& x, const std::vector<double>& w, const Background& bg,
                           int omega, const KernelConfig& cfg, FieldScratch& scratch, Soa3& e_out) {
    const std::size_t n = w.size();
    for (int a = 0; a < 3; ++a) scratch.acc[a].assign(n, 0.0);
    kern::Sources src{x[0].data(), x[1].data(), x[2].data(), w.data(), n};
    kern::self_field_sum(dim, cfg.isa, src, cfg.softening, scratch.acc[0].data(), scratch.acc[1].data(),
                         scratch.acc[2].data(), cfg.threads);
    if (!bg.empty()) {
        for (int a = 0; a < 3; ++a) scratch.bg_acc[a].assign(n, 0.0);
        kern::Targets tg{x[0].data(), x[1].data(), x[2].data(), n};
        kern::field_sum(dim, cfg.isa, tg, bg.sources(), cfg.softening, scratch.bg_acc[0].data(),
                        scratch.bg_acc[1].data(), scratch.bg_acc[2].data(), cfg.threads);
    }
    const double scale = omega / unit_sphere_area(dim);
    for (int a = 0; a < dim; ++a) {
        e_out[a].resize(n);
        const double* self_acc = scratch.acc[a].data();
        const double* bg_acc = bg.empty() ? nullptr : scratch.bg_acc[a].data();
        for (std::size_t i = 0; i < n; ++i)
            e_out[a][i] = scale * (self_acc[i] - (bg_acc ? bg_acc[i] : 0.0));
    }
    for (int a = dim; a < 3; ++a) e_out[a].assign(n, 0.0);
}

// frozen field of stored sources (one-sided) at arbitrary targets
void frozen_field(const FlowHistory& h, const Soa3& sources_pos, const Soa3& targets, Soa3& e_out,
                  FieldScratch& scratch) {
    const std::size_t n = targets[0].size();
    switch (h.options.mode) {
        case DriveMode::zero_field:
            for (int a = 0; a < 3; ++a) e_out[a].assign(n, 0.0);
            return;
        case DriveMode::constant_field:
            for (int a = 0; a < 3; ++a) e_out[a].assign(n, h.options.constant_field[a]);
            return;
        case DriveMode::self_consistent:
            break;
    }
    for (int a = 0; a < 3; ++a) scratch.acc[a].assign(n, 0.0);
    kern::Targets tg{targets[0].data(), targets[1].data(), targets[2].data(), n};
    kern::Sources src{sources_pos[0].data(), sources_pos[1].data(), sources_pos[2].data(),
                      h.initial.weights.data(), h.initial.weights.size()};
    kern::field_sum(h.dim, h.kernel.isa, tg, src, h.kernel.softening, scratch.acc[0].data(),
                    scratch.acc[1].data(), scratch.acc[2].data(), h.kernel.threads);
    if (!h.background.empty()) {
        for (int a = 0; a < 3; ++a) scratch.bg_acc[a].assign(n, 0.0);
        kern::field_sum(h.dim, h.kernel.isa, tg, h.background.sources(), h.kernel.softening,
                        scratch.bg_acc[0].data(), scratch.bg_acc[1].data(), scratch.bg_acc[2].data(),
                        h.kernel.threads);
    }
    const double scale = h.omega / unit_sphere_area(h.dim);
    for (int a = 0; a < h.dim; ++a) {
        e_out[a].resize(n);
        for (std::size_t i = 0; i < n; ++i)
            e_out[a][i] = scale * (scratch.acc[a][i] - (h.background.empty() ? 0.0 : scratch.bg_acc[a][i]));
    }
    for (int a = h.dim; a < 3; ++a) e_out[a].assign(n, 0.0);
}

void check_finite(const Soa3& e, int dim, long step, double eps) {
    for (int a = 0; a < dim; ++a)
        for (std::size_t i = 0; i < e[a].size(); ++i)
            if (!std::isfinite(e[a][i]))
                throw RunAbort("non-finite field value at step " + std::to_string(step) +
                               ", particle " + std::to_string(i) +
                               " (singular encounter; softening = " + std::to_string(eps) + ")");
}

void kick(Soa3& v, const Soa3& e, int dim, double h) {
    for (int a = 0; a < dim; ++a) {
        double* vv = v[a].data();
        const double* ee = e[a].data();
        const std::size_t n = v[a].size();
        for (std::size_t i = 0; i < n; ++i) vv[i] += h * ee[i];
    }
}

void drift(Soa3& x, const Soa3& v, int dim, double h) {
    for (int a = 0; a < dim; ++a) {
        double* xx = x[a].data();
        const double* vv = v[a].data();
        const std::size_t n = x[a].size();
        for (std::size_t i = 0; i < n; ++i) xx[i] += h * vv[i];
    }
}

FlowSample make_sample(double time, const Soa3& x, const Soa3& v) {
    FlowSample s;
    s.time = time;
    s.pos = x;
    s.vel = v;
    return s;
}

int auto_stride(long nsteps) {
    return static_cast<int>(std::max<long>(1, nsteps / 32));
}

}  // namespace

std::size_t FlowHistory::sample_index_at(double s) const {
    const double tol = 1e-9 * std::max(1.0, std::abs(horizon));
    for (std::size_t k = 0; k < samples.size(); ++k)
        if (std::abs(samples[k].time - s) <= tol) return k;
    throw ConfigError("no stored sample at time " + std::to_string(s));
}

FlowHistory advance(const ParticleEnsemble& ens, const Background& bg, int omega,
                    const KernelConfig& cfg, double dt, double horizon, const AdvanceOptions& opts) {
    if (!(dt > 0.0)) throw ConfigError("advance: dt must be positive");
    if (!(horizon >= dt)) throw ConfigError("advance: horizon must be >= dt");
    const long nsteps = std::max<long>(1, std::llround(horizon / dt));
    return advance_signed(ens, bg, omega, cfg, dt, nsteps, opts);
}

FlowHistory advance_signed(const ParticleEnsemble& ens, const Background& bg, int omega,
                           const KernelConfig& cfg, double dt, long nsteps,
                           const AdvanceOptions& opts) {
    ens.validate();
    cfg.validate(ens.dim);
    if (omega != 1 && omega != -1) throw ConfigError("advance: omega must be +1 or -1");
    if (dt == 0.0 || nsteps < 1) throw ConfigError("advance: need dt != 0 and nsteps >= 1");
    if (bg.dim != ens.dim) throw ConfigError("advance: background dimension mismatch");

    FlowHistory h;
    h.dim = ens.dim;
    h.omega = omega;
    h.dt = dt;
    h.nsteps = nsteps;
    h.horizon = dt * static_cast<double>(nsteps);
    h.kernel = cfg;
    h.background = bg;
    h.options = opts;
    h.initial = ens;

    const int stride = opts.store_every_steps > 0 ? opts.store_every_steps : auto_stride(nsteps);

    Soa3 x = ens.pos, v = ens.vel;
    Soa3 e;
    FieldScratch scratch;

    auto eval_field = [&](const Soa3& at) {
        switch (opts.mode) {
            case DriveMode::zero_field:
                for (int a = 0; a < 3; ++a) e[a].assign(ens.count(), 0.0);
                break;
            case DriveMode::constant_field:
                for (int a = 0; a < 3; ++a) e[a].assign(ens.count(), opts.constant_field[a]);
                break;
            case DriveMode::self_consistent:
                self_consistent_field(h.dim, at, ens.weights, bg, omega, cfg, scratch, e);
                break;
        }
    };

    h.samples.push_back(make_sample(0.0, x, v));
    if (opts.store_step_sources) h.step_positions.push_back(x);

    eval_field(x);
    check_finite(e, h.dim, 0, cfg.softening);

    for (long step = 0; step < nsteps; ++step) {
        kick(v, e, h.dim, 0.5 * dt);
        drift(x, v, h.dim, dt);
        eval_field(x);
        check_finite(e, h.dim, step + 1, cfg.softening);
        kick(v, e, h.dim, 0.5 * dt);

        if (opts.store_step_sources) h.step_positions.push_back(x);
        const long k = step + 1;
        if (k == nsteps || k % stride == 0)
            h.samples.push_back(make_sample(dt * static_cast<double>(k), x, v));
    }
    return h;
}

ProbeLattice lattice_in_ball(int dim, double radius, double spacing) {
    if (!(radius > 0.0) || !(spacing > 0.0)) throw ConfigError("lattice_in_ball: radius and spacing must be positive");
    ProbeLattice lat;
    lat.dim = dim;
    lat.radius = radius;
    const int m = std::max(1, static_cast<int>(std::floor(2.0 * radius / spacing)));
    const double h = 2.0 * radius / m;
    lat.cell_volume = std::pow(h, 2 * dim);
    const int axes = 2 * dim;
    std::array<int, 6> idx{};
    const double r2 = radius * radius;
    for (;;) {
        double z2 = 0.0;
        std::array<double, 6> c{};
        for (int a = 0; a < axes; ++a) {
            c[a] = -radius + (idx[a] + 0.5) * h;
            z2 += c[a] * c[a];
        }
        if (z2 <= r2) {
            for (int a = 0; a < 3; ++a) {
                lat.pos[a].push_back(a < dim ? c[a] : 0.0);
                lat.vel[a].push_back(a < dim ? c[dim + a] : 0.0);
            }
        }
        int a = 0;
        while (a < axes && ++idx[a] == m) idx[a++] = 0;
        if (a == axes) break;
    }
    if (lat.count() == 0) throw ConfigError("lattice_in_ball: spacing too coarse, no lattice point in the ball");
    return lat;
}

FlowHistory advance_probes(const FlowHistory& base, const ProbeLattice& probes) {
    if (base.options.mode == DriveMode::self_consistent && !base.has_step_sources())
        throw ConfigError("advance_probes: base history was not stored with step sources");
    if (probes.dim != base.dim) throw ConfigError("advance_probes: dimension mismatch");

    FlowHistory h;
    h.dim = base.dim;
    h.omega = base.omega;
    h.dt = base.dt;
    h.nsteps = base.nsteps;
    h.horizon = base.horizon;
    h.kernel = base.kernel;
    h.background = base.background;
    h.options = base.options;
    h.options.store_step_sources = false;
    h.lattice_seeded = true;
    h.seed_cell_volume = probes.cell_volume;
    h.seed_radius = probes.radius;

    h.initial.dim = base.dim;
    h.initial.pos = probes.pos;
    h.initial.vel = probes.vel;
    h.initial.weights.assign(probes.count(), probes.cell_volume);

    // replicate the base sampling schedule
    std::vector<long> sample_steps;
    for (const auto& s : base.samples)
        sample_steps.push_back(std::llround(s.time / base.dt));

    Soa3 x = probes.pos, v = probes.vel;
    Soa3 e;
    FieldScratch scratch;
    const Soa3 empty{};

    auto src_at = [&](long k) -> const Soa3& {
        return base.options.mode == DriveMode::self_consistent ? base.step_positions[k] : empty;
    };

    std::size_t next_sample = 0;
    if (!sample_steps.empty() && sample_steps[0] == 0) {
        h.samples.push_back(make_sample(0.0, x, v));
        ++next_sample;
    }

    frozen_field(base, src_at(0), x, e, scratch);
    check_finite(e, h.dim, 0, h.kernel.softening);
    for (long step = 0; step < base.nsteps; ++step) {
        kick(v, e, h.dim, 0.5 * base.dt);
        drift(x, v, h.dim, base.dt);
        frozen_field(base, src_at(step + 1), x, e, scratch);
        check_finite(e, h.dim, step + 1, h.kernel.softening);
        kick(v, e, h.dim, 0.5 * base.dt);
        if (next_sample < sample_steps.size() && sample_steps[next_sample] == step + 1) {
            h.samples.push_back(make_sample(base.dt * static_cast<double>(step + 1), x, v));
            ++next_sample;
        }
    }
    return h;
}

FlowSample states_at(const FlowHistory& h, double s) {
    const double tol = 1e-9 * std::max(1.0, std::abs(h.horizon));
    if (s < -tol || s > h.horizon + tol) throw ConfigError("states_at: time outside the stored horizon");
    // exact sample hit
    for (const auto& sample : h.samples)
        if (std::abs(sample.time - s) <= tol) return sample;
    // bracket and interpolate linearly
    std::size_t hi = 1;
    while (hi < h.samples.size() && h.samples[hi].time < s) ++hi;
    const FlowSample& a = h.samples[hi - 1];
    const FlowSample& b = h.samples[hi];
    const double th = (s - a.time) / (b.time - a.time);
    FlowSample out;
    out.time = s;
    for (int c = 0; c < 3; ++c) {
        const std::size_t n = a.pos[c].size();
        out.pos[c].resize(n);
        out.vel[c].resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            out.pos[c][i] = (1.0 - th) * a.pos[c][i] + th * b.pos[c][i];
            out.vel[c][i] = (1.0 - th) * a.vel[c][i] + th * b.vel[c][i];
        }
    }
    return out;
}

BackwardResult backward_to_initial(const FlowHistory& h, const std::array<std::vector<double>, 3>& x0,
                                   const std::array<std::vector<double>, 3>& v0, double t) {
    if (h.options.mode == DriveMode::self_consistent && !h.has_step_sources())
        throw ConfigError("backward_to_initial: history was not stored with step sources");
    const double tol = 1e-9 * std::max(1.0, std::abs(h.horizon));
    if (t < -tol || t > h.horizon + tol) throw ConfigError("backward_to_initial: time outside the stored horizon");
    const long kt = std::llround(t / h.dt);
    if (std::abs(kt * h.dt - t) > 1e-6 * std::max(1.0, h.horizon))
        throw ConfigError("backward_to_initial: time must lie on the step grid");

    // spatial support of the stored sources, inflated; queries leaving it
    // are flagged as extrapolation
    V3 lo{}, hi{};
    double span = 0.0;
    if (h.options.mode == DriveMode::self_consistent) {
        for (int a = 0; a < h.dim; ++a) {
            lo[a] = std::numeric_limits<double>::infinity();
            hi[a] = -std::numeric_limits<double>::infinity();
        }
        for (const auto& sp : h.step_positions)
            for (int a = 0; a < h.dim; ++a)
                for (double c : sp[a]) {
                    lo[a] = std::min(lo[a], c);
                    hi[a] = std::max(hi[a], c);
                }
        for (int a = 0; a < h.dim; ++a) span = std::max(span, hi[a] - lo[a]);
    }

    BackwardResult out;
    out.pos = x0;
    out.vel = v0;
    out.extrapolated.assign(x0[0].size(), 0);

    if (h.options.mode == DriveMode::self_consistent) {
        const double pad = 0.25 * span;
        for (std::size_t i = 0; i < x0[0].size(); ++i)
            for (int a = 0; a < h.dim; ++a)
                if (x0[a][i] < lo[a] - pad || x0[a][i] > hi[a] + pad) out.extrapolated[i] = 1;
    }

    Soa3 e;
    FieldScratch scratch;
    const Soa3 empty{};
    auto src_at = [&](long k) -> const Soa3& {
        return h.options.mode == DriveMode::self_consistent ? h.step_positions[k] : empty;
    };

    // reversed kick-drift-kick, step k -> k-1
    for (long k = kt; k >= 1; --k) {
        frozen_field(h, src_at(k), out.pos, e, scratch);
        check_finite(e, h.dim, k, h.kernel.softening);
        kick(out.vel, e, h.dim, -0.5 * h.dt);
        drift(out.pos, out.vel, h.dim, -h.dt);
        frozen_field(h, src_at(k - 1), out.pos, e, scratch);
        check_finite(e, h.dim, k - 1, h.kernel.softening);
        kick(out.vel, e, h.dim, -0.5 * h.dt);
    }
    return out;
}

PushForwardResult push_forward_eval(const FlowHistory& h,
                                    const std::function<double(const V3&, const V3&)>& f0, double t,
                                    const std::array<std::vector<double>, 3>& x,
                                    const std::array<std::vector<double>, 3>& v) {
    const BackwardResult back = backward_to_initial(h, x, v, t);
    PushForwardResult out;
    out.extrapolated = back.extrapolated;
    out.values.resize(x[0].size());
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        const V3 bx{back.pos[0][i], back.pos[1][i], back.pos[2][i]};
        const V3 bv{back.vel[0][i], back.vel[1][i], back.vel[2][i]};
        out.values[i] = f0(bx, bv);
    }
    return out;
}

std::vector<char> sublevel_mask(const FlowHistory& h, double lambda) {
    if (!(lambda >= 0.0)) throw ConfigError("sublevel_mask: lambda must be >= 0");
    std::vector<char> mask(h.count(), 1);
    for (const auto& s : h.samples) {
        for (std::size_t i = 0; i < h.count(); ++i) {
            if (!mask[i]) continue;
            double z2 = 0.0;
            for (int a = 0; a < h.dim; ++a)
                z2 += s.pos[a][i] * s.pos[a][i] + s.vel[a][i] * s.vel[a][i];
            if (z2 > lambda * lambda) mask[i] = 0;
        }
    }
    return mask;
}

namespace {

double initial_phase_norm2(const FlowHistory& h, std::size_t i) {
    double z2 = 0.0;
    for (int a = 0; a < h.dim; ++a)
        z2 += h.initial.pos[a][i] * h.initial.pos[a][i] + h.initial.vel[a][i] * h.initial.vel[a][i];
    return z2;
}

}  // namespace

double superlevel_measure(const FlowHistory& h, double r, double lambda, MeasureMode mode) {
    if (!(r > 0.0) || !(lambda > 0.0)) throw ConfigError("superlevel_measure: r and lambda must be positive");
    if (mode == MeasureMode::lattice && !h.lattice_seeded)
        throw ConfigError("superlevel_measure: lattice mode needs a lattice-seeded history");
    const auto mask = sublevel_mask(h, lambda);
    KahanSum acc;
    std::size_t seeded_in_ball = 0;
    for (std::size_t i = 0; i < h.count(); ++i) {
        if (initial_phase_norm2(h, i) > r * r) continue;
        ++seeded_in_ball;
        if (mask[i]) continue;
        acc.add(mode == MeasureMode::lattice ? h.seed_cell_volume : h.initial.weights[i]);
    }
    if (seeded_in_ball == 0) throw ConfigError("superlevel_measure: no seeds start inside B_r");
    return acc.value();
}

std::vector<double> superlevel_curve(const FlowHistory& h, double r, const std::vector<double>& lambdas,
                                     MeasureMode mode) {
    std::vector<double> out;
    out.reserve(lambdas.size());
    for (double l : lambdas) out.push_back(superlevel_measure(h, r, l, mode));
    return out;
}

CompressibilityResult compressibility_estimate(const FlowHistory& h, const std::vector<PhaseBox>& boxes) {
    if (!h.lattice_seeded) throw ConfigError("compressibility_estimate: needs a lattice-seeded history");
    if (boxes.empty()) throw ConfigError("compressibility_estimate: no probe boxes");
    CompressibilityResult res;
    res.per_box.assign(boxes.size(), 0.0);
    res.flagged.assign(boxes.size(), 0);
    for (std::size_t b = 0; b < boxes.size(); ++b) {
        const PhaseBox& box = boxes[b];
        double vol = 1.0;
        double corner2_max = 0.0;
        for (int a = 0; a < h.dim; ++a) {
            if (!(box.x_hi[a] > box.x_lo[a]) || !(box.v_hi[a] > box.v_lo[a]))
                throw ConfigError("compressibility_estimate: degenerate probe box");
            vol *= (box.x_hi[a] - box.x_lo[a]) * (box.v_hi[a] - box.v_lo[a]);
            const double cx = std::max(std::abs(box.x_lo[a]), std::abs(box.x_hi[a]));
            const double cv = std::max(std::abs(box.v_lo[a]), std::abs(box.v_hi[a]));
            corner2_max += cx * cx + cv * cv;
        }
        // a box poking outside the seeded ball undercounts preimages
        if (corner2_max > h.seed_radius * h.seed_radius) res.flagged[b] = 1;

        double worst = 0.0;
        for (const auto& s : h.samples) {
            std::size_t count = 0;
            for (std::size_t i = 0; i < h.count(); ++i) {
                bool in = true;
                for (int a = 0; a < h.dim && in; ++a) {
                    if (s.pos[a][i] < box.x_lo[a] || s.pos[a][i] > box.x_hi[a]) in = false;
                    if (s.vel[a][i] < box.v_lo[a] || s.vel[a][i] > box.v_hi[a]) in = false;
                }
                if (in) ++count;
            }
            worst = std::max(worst, static_cast<double>(count) * h.seed_cell_volume / vol);
        }
        res.per_box[b] = worst;
        res.l_estimate = std::max(res.l_estimate, worst);
    }
    return res;
}

std::pair<V3, V3> kdk_step_in_field(const std::function<V3(const V3&)>& field, const V3& x,
                                    const V3& v, double dt) {
    V3 vv = v + 0.5 * dt * field(x);
    const V3 xx = x + dt * vv;
    vv += 0.5 * dt * field(xx);
    return {xx, vv};
}

ParticleEnsemble ensemble_at_sample(const FlowHistory& h, std::size_t k) {
    if (k >= h.samples.size()) throw ConfigError("ensemble_at_sample: sample index out of range");
    ParticleEnsemble ens;
    ens.dim = h.dim;
    ens.pos = h.samples[k].pos;
    ens.vel = h.samples[k].vel;
    ens.weights = h.initial.weights;
    return ens;
}

}  // namespace vp
