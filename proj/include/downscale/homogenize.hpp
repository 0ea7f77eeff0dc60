#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <vector>

#include "downscale/grid.hpp"

namespace downscale {

// Cell-problem solutions chi_k on the unit cell [0,1]^d, one field per
// direction, stored with the wraparound nodes duplicated so that periodic
// interpolation is plain interpolation.
struct CellSolution {
    int dim = 1;
    std::vector<GridField> chi;
    // Residual cell averages after zero-mean normalization.
    std::array<double, 2> mean{0.0, 0.0};
};

// Effective (homogenized) coefficient tensor; 1x1 in 1D.
struct EffectiveCoefficient {
    int dim = 1;
    std::array<std::array<double, 2>, 2> a{{{0.0, 0.0}, {0.0, 0.0}}};

    double scalar() const { return a[0][0]; }
};

struct CorrectorExpansion {
    GridField u0;
    CellSolution chi;
    double epsilon = 0.0;
};

// a* = (integral of 1/a over the unit period)^-1, composite trapezoid with
// quad_n panels. The coefficient must be 1-periodic in its argument.
EffectiveCoefficient effective_coefficient_1d(const PermeabilityField& a, int quad_n);

// Closed-form 1D cell solution: chi'(y) = a*/a(y) - 1 integrated with zero
// mean, using cell_n midpoint panels and the matching discrete a* so the
// periodic closure is exact.
CellSolution cell_solution_1d(const PermeabilityField& a, int cell_n);

// Periodic 5-point cell problems for chi_1, chi_2 on a cell_n x cell_n
// lattice; the constant null space is projected out inside CG.
CellSolution solve_cell_problem_2d(const PermeabilityField& a, int cell_n,
                                   double tol = 1e-10);

// a*_ik = integral over Y of a (delta_ik + d chi_k / d y_i), composite
// midpoint over the cells of the chi lattice, symmetrized.
EffectiveCoefficient effective_coefficient_2d(const PermeabilityField& a,
                                              const CellSolution& chi);

// Constant-coefficient solve with the effective tensor (diagonal tensors
// only; the shipped problems are isotropic).
GridField solve_homogenized(const EffectiveCoefficient& a_star,
                            const std::function<double(double, double)>& forcing,
                            const Grid& grid);

// u0(x) + eps * sum_j chi_j(frac(x/eps)) * du0/dx_j(x); the gradient uses
// centered differences on u0's grid (one-sided at the boundary).
double corrector_solution(const CorrectorExpansion& exp, const std::array<double, 2>& x);

GridField corrector_field(const CorrectorExpansion& exp, const Grid& eval_grid);

// CSV with a `# cell` header flag, fields in direction order.
void write_cell_solution_csv(const CellSolution& cell, std::ostream& out);
CellSolution read_cell_solution_csv(std::istream& in);
void write_effective_csv(const EffectiveCoefficient& eff, std::ostream& out);
EffectiveCoefficient read_effective_csv(std::istream& in);

}  // namespace downscale
