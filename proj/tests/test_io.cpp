#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "vpflow/ensemble.hpp"
#include "vpflow/errors.hpp"
#include "vpflow/io.hpp"

using namespace vp;

namespace {

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("snapshot round trip preserves every byte of particle state") {
    std::mt19937_64 rng(123);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    for (int dim = 1; dim <= 3; ++dim) {
        ParticleEnsemble ens;
        ens.dim = dim;
        ens.resize(257);
        for (std::size_t i = 0; i < ens.count(); ++i) {
            V3 x{}, v{};
            for (int a = 0; a < dim; ++a) {
                x[a] = u(rng);
                v[a] = u(rng);
            }
            ens.set_position(i, x);
            ens.set_velocity(i, v);
            ens.weights[i] = std::abs(u(rng));
        }
        const auto path = temp_path("vpflow_test.vlen");
        write_snapshot(path, ens);
        const auto back = read_snapshot(path);
        REQUIRE(back.dim == dim);
        REQUIRE(back.count() == ens.count());
        for (std::size_t i = 0; i < ens.count(); ++i) {
            for (int a = 0; a < 3; ++a) {
                CHECK(back.pos[a][i] == ens.pos[a][i]);
                CHECK(back.vel[a][i] == ens.vel[a][i]);
            }
            CHECK(back.weights[i] == ens.weights[i]);
        }
        std::remove(path.c_str());
    }
}

TEST_CASE("grid field round trip preserves spec and values") {
    GridSpec g;
    g.dim = 2;
    g.origin = v3(-1.5, 0.5);
    g.extent = v3(3.0, 2.0);
    g.cells = {6, 4, 1};
    GridField f(g, FieldRank::vector);
    for (std::size_t k = 0; k < f.values.size(); ++k) f.values[k] = 0.25 * k - 3.0;
    const auto path = temp_path("vpflow_test.vlgf");
    write_grid_field(path, f);
    const auto back = read_grid_field(path);
    CHECK(back.grid == g);
    CHECK(back.rank == FieldRank::vector);
    CHECK(back.values == f.values);
    std::remove(path.c_str());
}

TEST_CASE("malformed files are rejected") {
    const auto path = temp_path("vpflow_bad.bin");
    {
        std::ofstream os(path, std::ios::binary);
        os << "JUNKJUNKJUNK";
    }
    CHECK_THROWS_AS(read_snapshot(path), ConfigError);
    CHECK_THROWS_AS(read_grid_field(path), ConfigError);
    CHECK_THROWS_AS(read_snapshot(temp_path("vpflow_missing_file.vlen")), ConfigError);
    std::remove(path.c_str());
}

TEST_CASE("manifest round trip") {
    const auto path = temp_path("vpflow_test.manifest");
    write_manifest(path, {{"run.dt", "0.001"}, {"run.seed", "42"}, {"datum.kind", "gaussian"}});
    const auto back = read_manifest(path);
    CHECK(back.at("run.dt") == "0.001");
    CHECK(back.at("run.seed") == "42");
    CHECK(back.at("datum.kind") == "gaussian");
    std::remove(path.c_str());
}
