#include "eigendrift/operator.hpp"

#include <cstdio>
#include <fstream>
#include <vector>

namespace eigendrift {

CoefficientSet CoefficientSet::make(int dim, std::vector<std::string> a,
                                    std::vector<std::string> b,
                                    std::string f) {
    if (dim == 2 && (a.size() != 2 || b.size() != 2))
        throw NonDiagonalDiffusion2D(
            "d=2 requires one diagonal diffusion entry and one drift "
            "component per axis");
    CoefficientSet cs;
    cs.dim = dim;
    for (auto& s : a) cs.a.push_back(Expression::parse(s));
    for (auto& s : b) cs.b.push_back(Expression::parse(s));
    cs.f = Expression::parse(f);
    return cs;
}

CoefficientSet CoefficientSet::with_shifted_f(double scale,
                                              const Expression& bump) const {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", scale);
    return with_f(Expression::parse("(" + f.serialize() + ")+(" +
                                    std::string(buf) + ")*(" +
                                    bump.serialize() + ")"));
}

NodeFields sample_coefficients(const Grid& grid, const CoefficientSet& coeffs,
                               const Control& control) {
    if (static_cast<int>(coeffs.a.size()) != grid.dim ||
        static_cast<int>(coeffs.b.size()) != grid.dim)
        throw Error("coefficient count does not match grid dimension");

    const int n = grid.rows();
    NodeFields nf;
    nf.a.resize(n);
    nf.b.resize(n);
    nf.f.resize(n);

    auto u_at = [&](int row) -> std::optional<double> {
        if (std::holds_alternative<double>(control))
            return std::get<double>(control);
        if (std::holds_alternative<std::vector<double>>(control))
            return std::get<std::vector<double>>(control)[row];
        return {};
    };

    for (int row = 0; row < n; ++row) {
        Bindings bnd;
        bnd.x1 = grid.nodes[row][0];
        if (grid.dim == 2) bnd.x2 = grid.nodes[row][1];
        bnd.u = u_at(row);
        for (int ax = 0; ax < grid.dim; ++ax) {
            nf.a[row][ax] = coeffs.a[ax].evaluate(bnd);
            nf.b[row][ax] = coeffs.b[ax].evaluate(bnd);
        }
        nf.f[row] = coeffs.f.evaluate(bnd);
    }
    return nf;
}

DiscreteOperator assemble(const Grid& grid, const NodeFields& fields,
                          double ellipticity_floor, double f_lower_bound) {
    const int n = grid.rows();
    const double h = grid.h;

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(n) * (2 * grid.dim + 1));

    for (int row = 0; row < n; ++row) {
        double diag = 0.0;
        for (int ax = 0; ax < grid.dim; ++ax) {
            double aa = fields.a[row][ax];
            double bb = fields.b[row][ax];
            if (!(aa > ellipticity_floor)) throw EllipticityViolation(row);

            // central drift differencing iff both off-diagonals stay
            // strictly positive; otherwise first-order upwind
            double up, dn;
            if (aa / (h * h) - std::abs(bb) / (2.0 * h) > 0.0) {
                up = aa / (h * h) + bb / (2.0 * h);
                dn = aa / (h * h) - bb / (2.0 * h);
            } else {
                up = aa / (h * h) + std::max(bb, 0.0) / h;
                dn = aa / (h * h) + std::max(-bb, 0.0) / h;
            }
            diag -= up + dn;
            int nb_up = grid.neighbor(row, ax, +1);
            int nb_dn = grid.neighbor(row, ax, -1);
            if (nb_up >= 0) trip.emplace_back(row, nb_up, up);
            if (nb_dn >= 0) trip.emplace_back(row, nb_dn, dn);
        }
        double fv = fields.f[row];
        if (!std::isfinite(fv) || fv < f_lower_bound) throw UnboundedBelow(row);
        trip.emplace_back(row, row, diag + fv);
    }

    DiscreteOperator op;
    op.grid = grid;
    op.A.resize(n, n);
    op.A.setFromTriplets(trip.begin(), trip.end());
    op.A.makeCompressed();

    op.diag_max = -1e300;
    for (int row = 0; row < n; ++row)
        op.diag_max = std::max(op.diag_max, op.A.coeff(row, row));

    // connectivity of the interior stencil graph
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
        int row = stack.back();
        stack.pop_back();
        for (int ax = 0; ax < grid.dim; ++ax)
            for (int dir : {-1, +1}) {
                int nb = grid.neighbor(row, ax, dir);
                if (nb >= 0 && !seen[nb]) {
                    seen[nb] = 1;
                    ++count;
                    stack.push_back(nb);
                }
            }
    }
    op.irreducible = (count == n);
    return op;
}

DiscreteOperator assemble(const Grid& grid, const CoefficientSet& coeffs,
                          const Control& control) {
    NodeFields nf = sample_coefficients(grid, coeffs, control);
    return assemble(grid, nf, coeffs.ellipticity_floor, coeffs.f_lower_bound);
}

void write_matrix_market(const DiscreteOperator& op, const std::string& path) {
    std::ofstream out(path);
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << op.A.rows() << " " << op.A.cols() << " " << op.A.nonZeros() << "\n";
    for (int k = 0; k < op.A.outerSize(); ++k)
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(
                 op.A, k);
             it; ++it)
            out << it.row() + 1 << " " << it.col() + 1 << " " << it.value()
                << "\n";
}

}  // namespace eigendrift
