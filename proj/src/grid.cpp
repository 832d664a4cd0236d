#include "vpflow/grid.hpp"

#include <cmath>

#include "vpflow/kahan.hpp"

namespace vp {

GridSpec GridSpec::cube(int dim, double half_width, int cells_per_axis) {
    GridSpec g;
    g.dim = dim;
    for (int a = 0; a < dim; ++a) {
        g.origin[a] = -half_width;
        g.extent[a] = 2.0 * half_width;
        g.cells[a] = cells_per_axis;
    }
    for (int a = dim; a < 3; ++a) {
        g.origin[a] = 0.0;
        g.extent[a] = 0.0;
        g.cells[a] = 1;
    }
    g.validate();
    return g;
}

void GridSpec::validate() const {
    if (dim < 1 || dim > 3) throw ConfigError("grid: dim must be 1, 2 or 3");
    for (int a = 0; a < dim; ++a) {
        if (cells[a] < 1) throw ConfigError("grid: cells per axis must be >= 1");
        if (!(extent[a] > 0.0)) throw ConfigError("grid: extent must be positive");
    }
}

std::size_t GridSpec::node_count() const {
    std::size_t n = 1;
    for (int a = 0; a < dim; ++a) n *= static_cast<std::size_t>(cells[a] + 1);
    return n;
}

double GridSpec::cell_volume() const {
    double v = 1.0;
    for (int a = 0; a < dim; ++a) v *= spacing(a);
    return v;
}

double GridSpec::total_volume() const {
    double v = 1.0;
    for (int a = 0; a < dim; ++a) v *= extent[a];
    return v;
}

std::size_t GridSpec::flatten(const std::array<int, 3>& idx) const {
    std::size_t n = 0;
    for (int a = dim - 1; a >= 0; --a) n = n * (cells[a] + 1) + idx[a];
    return n;
}

std::array<int, 3> GridSpec::unflatten(std::size_t node) const {
    std::array<int, 3> idx{0, 0, 0};
    for (int a = 0; a < dim; ++a) {
        const std::size_t na = cells[a] + 1;
        idx[a] = static_cast<int>(node % na);
        node /= na;
    }
    return idx;
}

V3 GridSpec::node_position(std::size_t node) const {
    const auto idx = unflatten(node);
    V3 p{};
    for (int a = 0; a < dim; ++a) p[a] = origin[a] + idx[a] * spacing(a);
    return p;
}

GridField::GridField(const GridSpec& g, FieldRank r) : grid(g), rank(r) {
    grid.validate();
    values.assign(grid.node_count() * ncomp(), 0.0);
}

int GridField::ncomp() const {
    switch (rank) {
        case FieldRank::scalar: return 1;
        case FieldRank::vector: return grid.dim;
        case FieldRank::matrix: return grid.dim * grid.dim;
    }
    return 1;
}

V3 GridField::vector_at(std::size_t node) const {
    V3 v{};
    for (int c = 0; c < grid.dim; ++c) v[c] = values[node * grid.dim + c];
    return v;
}

void GridField::set_vector_at(std::size_t node, const V3& v) {
    for (int c = 0; c < grid.dim; ++c) values[node * grid.dim + c] = v[c];
}

double GridField::integrate() const {
    KahanSum s;
    for (double v : values) s.add(v);
    return s.value() * grid.cell_volume();
}

double GridField::magnitude_at(std::size_t node) const {
    const int nc = ncomp();
    double m = 0.0;
    for (int c = 0; c < nc; ++c) {
        const double v = values[node * nc + c];
        m += v * v;
    }
    return std::sqrt(m);
}

}  // namespace vp
