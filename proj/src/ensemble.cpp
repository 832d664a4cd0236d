#include "vpflow/ensemble.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "vpflow/errors.hpp"
#include "vpflow/io.hpp"

namespace vp {

void ParticleEnsemble::resize(std::size_t n) {
    for (int a = 0; a < 3; ++a) {
        pos[a].assign(n, 0.0);
        vel[a].assign(n, 0.0);
    }
    weights.assign(n, 0.0);
}

void ParticleEnsemble::validate() const {
    if (dim < 1 || dim > 3) throw ConfigError("ensemble: dim must be 1, 2 or 3");
    if (count() == 0) throw ConfigError("ensemble: empty");
    double total = 0.0;
    for (int a = 0; a < 3; ++a) {
        if (pos[a].size() != count() || vel[a].size() != count())
            throw ConfigError("ensemble: component arrays disagree on particle count");
    }
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("ensemble: weights must be finite and >= 0");
        total += w;
    }
    if (!(total > 0.0) || !std::isfinite(total)) throw ConfigError("ensemble: total mass must be positive and finite");
}

DatumKind datum_kind_from_string(const std::string& s) {
    if (s == "gaussian") return DatumKind::gaussian;
    if (s == "uniform-ball") return DatumKind::uniform_ball;
    if (s == "two-stream") return DatumKind::two_stream;
    if (s == "product-of-marginals") return DatumKind::product_of_marginals;
    if (s == "table") return DatumKind::table;
    throw ConfigError("unknown datum kind '" + s +
                      "' (valid: gaussian, uniform-ball, two-stream, product-of-marginals, table)");
}

std::string to_string(DatumKind k) {
    switch (k) {
        case DatumKind::gaussian: return "gaussian";
        case DatumKind::uniform_ball: return "uniform-ball";
        case DatumKind::two_stream: return "two-stream";
        case DatumKind::product_of_marginals: return "product-of-marginals";
        case DatumKind::table: return "table";
    }
    return "?";
}

BackgroundKind background_kind_from_string(const std::string& s) {
    if (s == "zero") return BackgroundKind::zero;
    if (s == "gaussian") return BackgroundKind::gaussian;
    if (s == "table") return BackgroundKind::table;
    throw ConfigError("unknown background kind '" + s + "' (valid: zero, gaussian, table)");
}

std::string to_string(BackgroundKind k) {
    switch (k) {
        case BackgroundKind::zero: return "zero";
        case BackgroundKind::gaussian: return "gaussian";
        case BackgroundKind::table: return "table";
    }
    return "?";
}

void InitialDatumSpec::validate() const {
    if (dim < 1 || dim > 3) throw ConfigError("datum: dim must be 1, 2 or 3");
    if (!(mass > 0.0)) throw ConfigError("datum: mass must be positive");
    switch (kind) {
        case DatumKind::gaussian:
        case DatumKind::two_stream:
            if (!(sigma_x > 0.0)) throw ConfigError("datum: sigma_x must be positive");
            if (!(sigma_v > 0.0)) throw ConfigError("datum: sigma_v must be positive");
            break;
        case DatumKind::uniform_ball:
            if (!(radius_x > 0.0)) throw ConfigError("datum: radius_x must be positive");
            if (radius_v < 0.0) throw ConfigError("datum: radius_v must be >= 0");
            break;
        case DatumKind::product_of_marginals:
            if (!(radius_x > 0.0)) throw ConfigError("datum: radius_x must be positive");
            if (!(v_rmax > 0.0)) throw ConfigError("datum: v_rmax must be positive");
            if (!(v_power < dim)) throw ConfigError("datum: v_power must be < dim for an integrable singularity");
            if (v_power < 0.0) throw ConfigError("datum: v_power must be >= 0");
            break;
        case DatumKind::table:
            if (table_path.empty()) throw ConfigError("datum: table kind requires table_path");
            break;
    }
    if (osc_amplitude < 0.0 || osc_amplitude > 1.0)
        throw ConfigError("datum: osc_amplitude must lie in [0,1] to keep f0 nonnegative");
}

void BackgroundSpec::validate(int dim) const {
    if (mass < 0.0) throw ConfigError("background: mass must be >= 0");
    if (kind != BackgroundKind::zero && !(mass > 0.0))
        throw ConfigError("background: nonzero kind requires positive mass");
    if (kind == BackgroundKind::gaussian && !(sigma > 0.0))
        throw ConfigError("background: sigma must be positive");
    if (kind == BackgroundKind::table && table_path.empty())
        throw ConfigError("background: table kind requires table_path");
    // N=3 requires rho_b in L^1 cap L^p for some p > 3/2
    if (dim == 3 && kind == BackgroundKind::table && !(lp_exponent > 1.5))
        throw ConfigError("background: N=3 requires rho_b in L^p with p > 3/2; declared exponent is too low");
}

namespace {

// Unit vector uniform on S^{N-1}.
V3 random_direction(int dim, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    V3 u{};
    double n2 = 0.0;
    do {
        n2 = 0.0;
        for (int a = 0; a < dim; ++a) {
            u[a] = gauss(rng);
            n2 += u[a] * u[a];
        }
    } while (n2 == 0.0);
    const double inv = 1.0 / std::sqrt(n2);
    for (int a = 0; a < dim; ++a) u[a] *= inv;
    return u;
}

V3 uniform_in_ball(int dim, double radius, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const V3 dir = random_direction(dim, rng);
    const double r = radius * std::pow(uni(rng), 1.0 / dim);
    return r * dir;
}

}  // namespace

ParticleEnsemble sample_ensemble(const InitialDatumSpec& spec, std::size_t count, std::uint64_t seed) {
    spec.validate();
    if (count < 1) throw ConfigError("sample_ensemble: count must be >= 1");

    if (spec.kind == DatumKind::table) {
        ParticleEnsemble ens = read_snapshot(spec.table_path);
        ens.validate();
        return ens;
    }

    ParticleEnsemble ens;
    ens.dim = spec.dim;
    ens.resize(count);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double w0 = spec.mass / static_cast<double>(count);

    for (std::size_t i = 0; i < count; ++i) {
        V3 x{}, v{};
        switch (spec.kind) {
            case DatumKind::gaussian: {
                std::normal_distribution<double> gx(0.0, spec.sigma_x);
                std::normal_distribution<double> gv(0.0, spec.sigma_v);
                for (int a = 0; a < spec.dim; ++a) x[a] = spec.center[a] + gx(rng);
                for (int a = 0; a < spec.dim; ++a) v[a] = spec.mean_velocity[a] + gv(rng);
                break;
            }
            case DatumKind::uniform_ball: {
                x = uniform_in_ball(spec.dim, spec.radius_x, rng);
                for (int a = 0; a < spec.dim; ++a) x[a] += spec.center[a];
                if (spec.radius_v > 0.0) v = uniform_in_ball(spec.dim, spec.radius_v, rng);
                break;
            }
            case DatumKind::two_stream: {
                std::normal_distribution<double> gx(0.0, spec.sigma_x);
                std::normal_distribution<double> gv(0.0, spec.sigma_v);
                for (int a = 0; a < spec.dim; ++a) x[a] = spec.center[a] + gx(rng);
                for (int a = 0; a < spec.dim; ++a) v[a] = gv(rng);
                v[0] += (i % 2 == 0) ? spec.v_drift : -spec.v_drift;
                break;
            }
            case DatumKind::product_of_marginals: {
                x = uniform_in_ball(spec.dim, spec.radius_x, rng);
                for (int a = 0; a < spec.dim; ++a) x[a] += spec.center[a];
                // radial cdf of |v|^{-a} 1_{|v|<R} is (r/R)^{dim-a}
                const V3 dir = random_direction(spec.dim, rng);
                const double r = spec.v_rmax * std::pow(uni(rng), 1.0 / (spec.dim - spec.v_power));
                v = r * dir;
                break;
            }
            case DatumKind::table:
                break;  // handled above
        }
        ens.set_position(i, x);
        ens.set_velocity(i, v);
        double w = w0;
        if (spec.osc_amplitude > 0.0) w *= 1.0 + spec.osc_amplitude * std::sin(dot(spec.osc_wavevector, x));
        ens.weights[i] = w;
    }
    return ens;
}

}  // namespace vp
