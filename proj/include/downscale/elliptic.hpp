#pragma once

#include <functional>
#include <vector>

#include "downscale/grid.hpp"

namespace downscale {

// -div(kappa grad u) = f with u = 0 on the boundary.
struct EllipticProblem {
    PermeabilityField permeability;
    std::function<double(double, double)> forcing;
    Grid grid;
    // smallest oscillation scale of kappa, if it has one; lets the coarse
    // solver verify that its grid does not resolve the fast variable
    double eps_min = 0.0;
};

// Matrix-free symmetric positive definite system over interior nodes.
struct SparseSystem {
    std::size_t size = 0;
    std::function<void(const std::vector<double>&, std::vector<double>&)> apply;
    std::vector<double> rhs;
    std::vector<double> diagonal;  // Jacobi preconditioner
};

// Conservative scheme with kappa at cell midpoints, direct tridiagonal
// elimination. Requires n >= 2.
GridField solve_fine_1d(const EllipticProblem& problem);

// Conservative 5-point scheme with kappa at edge midpoints, solved by
// Jacobi-preconditioned conjugate gradients to relative residual <= tol.
// max_iter < 0 selects the default cap of 50*n^2.
GridField solve_fine_2d(const EllipticProblem& problem, double tol = 1e-10,
                        long max_iter = -1);

// Same 5-point scheme on a deliberately coarse grid; each edge coefficient
// is the harmonic average of kappa along the edge (16-point composite
// midpoint rule). Produces a cheap low-accuracy field on the coarse grid.
GridField solve_coarse_2d(const EllipticProblem& problem, int coarse_n);

// Assembled interior system for the fine 2D scheme (exposed for property
// tests of symmetry and for reuse by the periodic cell solver).
SparseSystem assemble_fine_2d(const EllipticProblem& problem);

// Preconditioned CG shared by the fine and cell solvers. project_mean
// removes the constant component each iteration (for singular periodic
// systems). Returns the solution; throws IterationLimitError on failure.
std::vector<double> solve_cg(const SparseSystem& system, double tol,
                             long max_iter, bool project_mean = false);

}  // namespace downscale
