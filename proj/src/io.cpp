#include "vpflow/io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vpflow/errors.hpp"

namespace vp {

static_assert(std::endian::native == std::endian::little,
              "snapshot and grid-field files are little-endian; big-endian hosts are not supported");

namespace {

void put_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void get_bytes(std::istream& is, void* p, std::size_t n, const char* what) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!is) throw ConfigError(std::string("truncated file while reading ") + what);
}

template <class T>
void put(std::ostream& os, T v) { put_bytes(os, &v, sizeof(T)); }

template <class T>
T get(std::istream& is, const char* what) {
    T v;
    get_bytes(is, &v, sizeof(T), what);
    return v;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot open '" + path + "' for writing");
    return os;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open '" + path + "' for reading");
    return is;
}

}  // namespace

void write_snapshot(const std::string& path, const ParticleEnsemble& ens) {
    auto os = open_out(path);
    put_bytes(os, "VLEN", 4);
    put<std::uint32_t>(os, kSnapshotVersion);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(ens.dim));
    put<std::uint64_t>(os, ens.count());
    for (std::size_t i = 0; i < ens.count(); ++i)
        for (int a = 0; a < ens.dim; ++a) put<double>(os, ens.pos[a][i]);
    for (std::size_t i = 0; i < ens.count(); ++i)
        for (int a = 0; a < ens.dim; ++a) put<double>(os, ens.vel[a][i]);
    for (std::size_t i = 0; i < ens.count(); ++i) put<double>(os, ens.weights[i]);
    if (!os) throw ConfigError("write failed for '" + path + "'");
}

ParticleEnsemble read_snapshot(const std::string& path) {
    auto is = open_in(path);
    char magic[4];
    get_bytes(is, magic, 4, "magic");
    if (std::memcmp(magic, "VLEN", 4) != 0) throw ConfigError("'" + path + "' is not a VLEN snapshot");
    const auto version = get<std::uint32_t>(is, "version");
    if (version != kSnapshotVersion) throw ConfigError("unsupported VLEN version in '" + path + "'");
    const auto dim = get<std::uint32_t>(is, "dim");
    if (dim < 1 || dim > 3) throw ConfigError("bad dim in '" + path + "'");
    const auto count = get<std::uint64_t>(is, "count");
    ParticleEnsemble ens;
    ens.dim = static_cast<int>(dim);
    ens.resize(count);
    for (std::size_t i = 0; i < count; ++i)
        for (std::uint32_t a = 0; a < dim; ++a) ens.pos[a][i] = get<double>(is, "positions");
    for (std::size_t i = 0; i < count; ++i)
        for (std::uint32_t a = 0; a < dim; ++a) ens.vel[a][i] = get<double>(is, "velocities");
    for (std::size_t i = 0; i < count; ++i) ens.weights[i] = get<double>(is, "weights");
    return ens;
}

void write_grid_field(const std::string& path, const GridField& field) {
    auto os = open_out(path);
    put_bytes(os, "VLGF", 4);
    put<std::uint32_t>(os, kGridFieldVersion);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(field.grid.dim));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(field.rank));
    for (int a = 0; a < field.grid.dim; ++a) put<std::uint64_t>(os, static_cast<std::uint64_t>(field.grid.cells[a]));
    for (int a = 0; a < field.grid.dim; ++a) put<double>(os, field.grid.origin[a]);
    for (int a = 0; a < field.grid.dim; ++a) put<double>(os, field.grid.extent[a]);
    for (double v : field.values) put<double>(os, v);
    if (!os) throw ConfigError("write failed for '" + path + "'");
}

GridField read_grid_field(const std::string& path) {
    auto is = open_in(path);
    char magic[4];
    get_bytes(is, magic, 4, "magic");
    if (std::memcmp(magic, "VLGF", 4) != 0) throw ConfigError("'" + path + "' is not a VLGF grid field");
    const auto version = get<std::uint32_t>(is, "version");
    if (version != kGridFieldVersion) throw ConfigError("unsupported VLGF version in '" + path + "'");
    const auto dim = get<std::uint32_t>(is, "dim");
    if (dim < 1 || dim > 3) throw ConfigError("bad dim in '" + path + "'");
    const auto rank_raw = get<std::uint32_t>(is, "rank");
    if (rank_raw > 2) throw ConfigError("bad rank in '" + path + "'");
    GridSpec g;
    g.dim = static_cast<int>(dim);
    for (std::uint32_t a = 0; a < dim; ++a) g.cells[a] = static_cast<int>(get<std::uint64_t>(is, "cells"));
    for (std::uint32_t a = 0; a < dim; ++a) g.origin[a] = get<double>(is, "origin");
    for (std::uint32_t a = 0; a < dim; ++a) g.extent[a] = get<double>(is, "extent");
    g.validate();
    GridField f(g, static_cast<FieldRank>(rank_raw));
    for (double& v : f.values) v = get<double>(is, "values");
    return f;
}

void write_manifest(const std::string& path, const std::map<std::string, std::string>& entries) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot open '" + path + "' for writing");
    for (const auto& [k, v] : entries) os << k << " = " << v << "\n";
}

std::map<std::string, std::string> read_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open '" + path + "' for reading");
    std::map<std::string, std::string> out;
    std::string line;
    while (std::getline(is, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return out;
}

void CsvWriter::row(const std::vector<double>& values) {
    if (values.size() != columns_.size()) throw ConfigError("csv row width mismatch");
    rows_.push_back(values);
}

void CsvWriter::save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot open '" + path + "' for writing");
    os.precision(17);
    for (const auto& c : comments_) os << "# " << c << "\n";
    for (std::size_t i = 0; i < columns_.size(); ++i) os << (i ? "," : "") << columns_[i];
    os << "\n";
    for (const auto& r : rows_) {
        for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
        os << "\n";
    }
}

void ensure_directory(const std::string& path) {
    std::error_code ec;
    std::filesystem::create_directories(path, ec);
    if (ec) throw ConfigError("cannot create directory '" + path + "': " + ec.message());
}

}  // namespace vp
