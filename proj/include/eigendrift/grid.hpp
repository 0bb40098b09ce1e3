#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "eigendrift/errors.hpp"

namespace eigendrift {

using Point = std::array<double, 2>;  // x2 is 0 in d=1

// Origin-centered lattice on a ball (inner_radius = 0) or annulus in
// d = 1, 2. Interior nodes satisfy inner_radius < |x| < radius strictly;
// everything else is a Dirichlet-zero position. n_per_axis is odd so the
// origin is a node whenever inner_radius = 0.
struct Grid {
    int dim = 1;
    double radius = 0.0;
    double inner_radius = 0.0;
    int n_per_axis = 0;
    double h = 0.0;
    std::vector<Point> nodes;       // row -> coordinates
    std::vector<int> lattice;       // lattice cell -> row, -1 if exterior
    int origin_row = -1;            // -1 for annuli

    int rows() const { return static_cast<int>(nodes.size()); }

    double axis_coord(int i) const { return -radius + i * h; }

    // row of the lattice neighbor one step along `axis` (0 or 1) in
    // direction `dir` (+1/-1); -1 if the neighbor is a Dirichlet position
    int neighbor(int row, int axis, int dir) const;

    // row whose node is nearest to p (by clamped lattice lookup)
    int nearest_row(const Point& p) const;

    // cell volume used as the quadrature weight for grid integrals
    double cell_volume() const { return dim == 1 ? h : h * h; }

    std::vector<int> lattice_of_row;  // row -> lattice cell
    std::vector<int> fallback;        // lattice cell -> nearest interior row
};

Grid build_grid(int dim, double radius, double inner_radius, int n_per_axis);

// Scalar field sampled on grid nodes, with multilinear interpolation
// inside the grid box and nearest-node extrapolation outside.
struct GridScalarField {
    Grid grid;
    std::vector<double> values;  // per row

    double at(const Point& p) const;
};

// Vector field on grid nodes (e.g. a twisted drift or a control field),
// stored per axis for cheap interpolation.
struct GridVectorField {
    Grid grid;
    std::array<std::vector<double>, 2> comps;  // comps[axis][row]

    static GridVectorField from_points(Grid g, const std::vector<Point>& v);
    Point at(const Point& p) const;
    Point at_node(int row) const {
        return {comps[0][row], grid.dim == 2 ? comps[1][row] : 0.0};
    }
};

namespace detail {
// Interpolation weights over up to 4 rows; rows outside the mask fall
// back to the nearest interior node.
double interpolate(const Grid& g, const std::vector<double>& v, const Point& p);
}  // namespace detail

}  // namespace eigendrift
