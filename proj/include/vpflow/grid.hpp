#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "vpflow/errors.hpp"
#include "vpflow/vec.hpp"

namespace vp {

// Uniform spatial grid. Nodes sit at cell corners: axis a carries cells[a]+1
// nodes at origin[a] + i*spacing(a). Discrete integrals use the plain
// convention sum(node values) * cell_volume(), which makes cloud-in-cell
// deposits exactly conservative.
struct GridSpec {
    int dim = 3;
    V3 origin{};
    V3 extent{};
    std::array<int, 3> cells{1, 1, 1};

    static GridSpec cube(int dim, double half_width, int cells_per_axis);

    void validate() const;
    double spacing(int axis) const { return extent[axis] / cells[axis]; }
    int nodes_along(int axis) const { return axis < dim ? cells[axis] + 1 : 1; }
    std::size_t node_count() const;
    double cell_volume() const;
    double total_volume() const;

    std::size_t flatten(const std::array<int, 3>& idx) const;
    std::array<int, 3> unflatten(std::size_t node) const;
    V3 node_position(std::size_t node) const;

    bool operator==(const GridSpec&) const = default;
};

enum class FieldRank { scalar, vector, matrix };

// Scalar / vector / matrix values sampled on the nodes of a GridSpec.
// Storage is node-major: all components of node 0, then node 1, ...
struct GridField {
    GridSpec grid;
    FieldRank rank = FieldRank::scalar;
    std::vector<double> values;

    GridField() = default;
    GridField(const GridSpec& g, FieldRank r);

    int ncomp() const;
    std::size_t node_count() const { return grid.node_count(); }

    double& scalar_at(std::size_t node) { return values[node]; }
    double scalar_at(std::size_t node) const { return values[node]; }
    V3 vector_at(std::size_t node) const;
    void set_vector_at(std::size_t node, const V3& v);
    double& comp_at(std::size_t node, int c) { return values[node * ncomp() + c]; }
    double comp_at(std::size_t node, int c) const { return values[node * ncomp() + c]; }
    // matrix entries are row-major dim x dim per node
    double& mat_at(std::size_t node, int i, int j) { return values[(node * grid.dim + i) * grid.dim + j]; }
    double mat_at(std::size_t node, int i, int j) const { return values[(node * grid.dim + i) * grid.dim + j]; }

    // sum over nodes of a scalar field times cell volume
    double integrate() const;
    // per-node Euclidean magnitude (any rank)
    double magnitude_at(std::size_t node) const;
};

}  // namespace vp
