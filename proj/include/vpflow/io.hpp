#pragma once

#include <map>
#include <string>
#include <vector>

#include "vpflow/ensemble.hpp"
#include "vpflow/grid.hpp"

namespace vp {

// Binary formats (both little-endian, 64-bit IEEE floats):
//
// Ensemble snapshot, magic "VLEN":
//   magic[4] | version u32 | dim u32 | count u64
//   positions  count*dim f64, particle-major (x0...x_{dim-1} per particle)
//   velocities count*dim f64, particle-major
//   weights    count f64
//
// Grid field, magic "VLGF":
//   magic[4] | version u32 | dim u32 | rank u32 (0 scalar, 1 vector, 2 matrix)
//   cells  dim*u64 | origin dim*f64 | extent dim*f64
//   values node-major f64 (ncomp per node; vector dim, matrix dim*dim)
//
// Full byte layouts are documented in docs/FORMATS.md.

inline constexpr std::uint32_t kSnapshotVersion = 1;
inline constexpr std::uint32_t kGridFieldVersion = 1;

void write_snapshot(const std::string& path, const ParticleEnsemble& ens);
ParticleEnsemble read_snapshot(const std::string& path);

void write_grid_field(const std::string& path, const GridField& field);
GridField read_grid_field(const std::string& path);

// "key = value" lines, sorted by key; reproducibility record for artifacts.
void write_manifest(const std::string& path, const std::map<std::string, std::string>& entries);
std::map<std::string, std::string> read_manifest(const std::string& path);

// CSV with '#'-prefixed header comments (units etc.) then a column-name row.
struct CsvWriter {
    explicit CsvWriter(std::vector<std::string> columns) : columns_(std::move(columns)) {}
    void comment(const std::string& line) { comments_.push_back(line); }
    void row(const std::vector<double>& values);
    void save(const std::string& path) const;

  private:
    std::vector<std::string> columns_;
    std::vector<std::string> comments_;
    std::vector<std::vector<double>> rows_;
};

void ensure_directory(const std::string& path);

}  // namespace vp
