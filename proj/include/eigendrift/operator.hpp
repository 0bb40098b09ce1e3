#pragma once

#include <Eigen/SparseCore>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "eigendrift/expr.hpp"
#include "eigendrift/grid.hpp"

namespace eigendrift {

// Operator data a(x), b(x[,u]), f(x) and optionally a running cost
// c(x,u). The diffusion matrix is diagonal; a has one entry per axis
// (one in d=1).
struct CoefficientSet {
    int dim = 1;
    std::vector<Expression> a;
    std::vector<Expression> b;
    Expression f = Expression::constant(0.0);
    std::optional<Expression> c;

    double f_lower_bound = -1e12;     // declared bound; checked at assembly
    double ellipticity_floor = 1e-10;

    static CoefficientSet make(int dim, std::vector<std::string> a,
                               std::vector<std::string> b, std::string f);

    CoefficientSet with_f(Expression nf) const {
        CoefficientSet out = *this;
        out.f = std::move(nf);
        return out;
    }
    // f + scale * bump, built through the expression language
    CoefficientSet with_shifted_f(double scale, const Expression& bump) const;
};

// Fixed control value or a per-node action field.
using Control = std::variant<std::monostate, double, std::vector<double>>;

// Pointwise coefficient samples on a grid; the low-level assembly input.
// Lets callers swap in grid fields (twisted drifts, blended policies)
// for any coefficient.
struct NodeFields {
    std::vector<std::array<double, 2>> a;  // per row, per axis
    std::vector<std::array<double, 2>> b;
    std::vector<double> f;
};

NodeFields sample_coefficients(const Grid& grid, const CoefficientSet& coeffs,
                               const Control& control = {});

// Sparse monotone discretization of a^i d_ii + b^i d_i + f with
// Dirichlet-zero exterior. Off-diagonals are nonnegative: second
// derivatives use the central 3-point stencil, drift uses central
// differencing where that preserves the sign structure and first-order
// upwinding otherwise.
struct DiscreteOperator {
    Eigen::SparseMatrix<double, Eigen::RowMajor> A;
    Grid grid;
    double diag_max = 0.0;
    bool irreducible = false;
};

DiscreteOperator assemble(const Grid& grid, const NodeFields& fields,
                          double ellipticity_floor = 1e-10,
                          double f_lower_bound = -1e12);
DiscreteOperator assemble(const Grid& grid, const CoefficientSet& coeffs,
                          const Control& control = {});

// Matrix Market export for debugging.
void write_matrix_market(const DiscreteOperator& op, const std::string& path);

}  // namespace eigendrift
