#include "eigendrift/grid.hpp"

#include <algorithm>
#include <deque>

namespace eigendrift {

namespace {

int lattice_cells(const Grid& g) {
    return g.dim == 1 ? g.n_per_axis : g.n_per_axis * g.n_per_axis;
}

int cell_index(const Grid& g, int i, int j) {
    return g.dim == 1 ? i : i + j * g.n_per_axis;
}

}  // namespace

Grid build_grid(int dim, double radius, double inner_radius, int n_per_axis) {
    if (dim != 1 && dim != 2) throw Error("dim must be 1 or 2");
    if (!(radius > inner_radius) || inner_radius < 0.0)
        throw BadRadius("need radius > inner_radius >= 0");
    if (n_per_axis < 5) throw EvenNodeCount("n_per_axis must be >= 5");
    if (n_per_axis % 2 == 0) throw EvenNodeCount("n_per_axis must be odd");

    Grid g;
    g.dim = dim;
    g.radius = radius;
    g.inner_radius = inner_radius;
    g.n_per_axis = n_per_axis;
    g.h = 2.0 * radius / (n_per_axis - 1);
    g.lattice.assign(lattice_cells(g), -1);

    auto interior = [&](double x1, double x2) {
        double d = std::hypot(x1, x2);
        if (!(d < radius)) return false;
        return inner_radius == 0.0 || d > inner_radius;
    };

    int nj = dim == 1 ? 1 : n_per_axis;
    for (int j = 0; j < nj; ++j) {
        double x2 = dim == 1 ? 0.0 : g.axis_coord(j);
        for (int i = 0; i < n_per_axis; ++i) {
            double x1 = g.axis_coord(i);
            if (!interior(x1, x2)) continue;
            int cell = cell_index(g, i, j);
            g.lattice[cell] = g.rows();
            g.nodes.push_back({x1, x2});
            g.lattice_of_row.push_back(cell);
            if (x1 == 0.0 && x2 == 0.0) g.origin_row = g.rows() - 1;
        }
    }
    if (g.nodes.empty()) throw BadRadius("grid has no interior nodes");

    // nearest-interior-row fallback per lattice cell (multi-source BFS),
    // used for nearest-node extrapolation of grid fields
    g.fallback.assign(lattice_cells(g), -1);
    std::deque<int> q;
    for (int row = 0; row < g.rows(); ++row) {
        g.fallback[g.lattice_of_row[row]] = row;
        q.push_back(g.lattice_of_row[row]);
    }
    while (!q.empty()) {
        int cell = q.front();
        q.pop_front();
        int i = cell % n_per_axis;
        int j = cell / n_per_axis;
        const int di[4] = {1, -1, 0, 0};
        const int dj[4] = {0, 0, 1, -1};
        for (int k = 0; k < (dim == 1 ? 2 : 4); ++k) {
            int ii = i + di[k], jj = j + dj[k];
            if (ii < 0 || ii >= n_per_axis) continue;
            if (dim == 2 && (jj < 0 || jj >= n_per_axis)) continue;
            int c2 = cell_index(g, ii, dim == 1 ? 0 : jj);
            if (g.fallback[c2] < 0) {
                g.fallback[c2] = g.fallback[cell];
                q.push_back(c2);
            }
        }
    }
    return g;
}

int Grid::neighbor(int row, int axis, int dir) const {
    int cell = lattice_of_row[row];
    int i = cell % n_per_axis;
    int j = cell / n_per_axis;
    if (axis == 0) {
        i += dir;
        if (i < 0 || i >= n_per_axis) return -1;
    } else {
        j += dir;
        if (j < 0 || j >= n_per_axis) return -1;
    }
    return lattice[cell_index(*this, i, j)];
}

int Grid::nearest_row(const Point& p) const {
    const auto& fb = fallback;
    auto clamp_idx = [&](double x) {
        int i = static_cast<int>(std::lround((x + radius) / h));
        return std::clamp(i, 0, n_per_axis - 1);
    };
    int i = clamp_idx(p[0]);
    int j = dim == 1 ? 0 : clamp_idx(p[1]);
    return fb[cell_index(*this, i, j)];
}

namespace detail {

double interpolate(const Grid& g, const std::vector<double>& v,
                   const Point& p) {
    const auto& fb = g.fallback;
    auto locate = [&](double x, int& i0, double& w) {
        double t = (x + g.radius) / g.h;
        i0 = static_cast<int>(std::floor(t));
        i0 = std::clamp(i0, 0, g.n_per_axis - 2);
        w = std::clamp(t - i0, 0.0, 1.0);
    };
    auto value_at = [&](int i, int j) {
        int row = fb[cell_index(g, i, j)];
        return v[row];
    };
    int i0;
    double wx;
    locate(p[0], i0, wx);
    if (g.dim == 1)
        return (1 - wx) * value_at(i0, 0) + wx * value_at(i0 + 1, 0);
    int j0;
    double wy;
    locate(p[1], j0, wy);
    return (1 - wx) * (1 - wy) * value_at(i0, j0) +
           wx * (1 - wy) * value_at(i0 + 1, j0) +
           (1 - wx) * wy * value_at(i0, j0 + 1) +
           wx * wy * value_at(i0 + 1, j0 + 1);
}

}  // namespace detail

double GridScalarField::at(const Point& p) const {
    return detail::interpolate(grid, values, p);
}

GridVectorField GridVectorField::from_points(Grid g,
                                             const std::vector<Point>& v) {
    GridVectorField f;
    f.grid = std::move(g);
    for (int ax = 0; ax < f.grid.dim; ++ax) {
        f.comps[ax].resize(v.size());
        for (std::size_t r = 0; r < v.size(); ++r) f.comps[ax][r] = v[r][ax];
    }
    return f;
}

Point GridVectorField::at(const Point& p) const {
    Point out{0.0, 0.0};
    for (int ax = 0; ax < grid.dim; ++ax)
        out[ax] = detail::interpolate(grid, comps[ax], p);
    return out;
}

}  // namespace eigendrift
