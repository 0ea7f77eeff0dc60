#include "downscale/elliptic.hpp"

#include <cmath>
#include <string>

#include "downscale/errors.hpp"

namespace downscale {

namespace {

double checked_kappa(const PermeabilityField& perm, double x, double y) {
    const double k = perm(x, y);
    if (!(k > 0.0))
        throw EllipticityError("coefficient is " + std::to_string(k) + " at (" +
                               std::to_string(x) + ", " + std::to_string(y) + ")");
    return k;
}

}  // namespace

GridField solve_fine_1d(const EllipticProblem& problem) {
    const Grid& g = problem.grid;
    if (g.dim != 1) throw ShapeError("solve_fine_1d requires a 1D grid");
    const int n = g.n[0];
    if (n < 2) throw ShapeError("solver requires at least 2 cells");
    const double h = g.spacing(0);

    // kappa at the n cell midpoints
    std::vector<double> k(n);
    for (int i = 0; i < n; ++i)
        k[i] = checked_kappa(problem.permeability, g.node_coord(0, i) + 0.5 * h, 0.0);

    // interior tridiagonal system: (k[i] + k[i+1]) u_i - ... = h^2 f_i
    const int m = n - 1;
    std::vector<double> diag(m), rhs(m);
    for (int i = 0; i < m; ++i) {
        diag[i] = k[i] + k[i + 1];
        rhs[i] = h * h * problem.forcing(g.node_coord(0, i + 1), 0.0);
    }
    // Thomas elimination; off-diagonals are -k[i+1] between unknowns i, i+1
    std::vector<double> cp(m, 0.0), dp(m, 0.0);
    cp[0] = -k[1] / diag[0];
    dp[0] = rhs[0] / diag[0];
    for (int i = 1; i < m; ++i) {
        const double lower = -k[i];
        const double denom = diag[i] - lower * cp[i - 1];
        cp[i] = (i < m - 1) ? -k[i + 1] / denom : 0.0;
        dp[i] = (rhs[i] - lower * dp[i - 1]) / denom;
    }
    GridField u = make_field(g);
    u.values[m] = dp[m - 1];  // node index m == interior unknown m-1
    for (int i = m - 2; i >= 0; --i)
        u.values[i + 1] = dp[i] - cp[i] * u.values[i + 2];
    return u;
}

SparseSystem assemble_fine_2d(const EllipticProblem& problem) {
    const Grid& g = problem.grid;
    if (g.dim != 2) throw ShapeError("2D assembly requires a 2D grid");
    const int nx = g.n[0], ny = g.n[1];
    if (nx < 2 || ny < 2) throw ShapeError("solver requires at least 2 cells per axis");
    const double hx = g.spacing(0), hy = g.spacing(1);
    const int mx = nx - 1, my = ny - 1;

    // edge-midpoint coefficients around each interior node (ix, iy):
    // west/east edges at (x -+ hx/2, y), south/north at (x, y -+ hy/2)
    std::vector<double> kw(mx * my), ke(mx * my), ks(mx * my), kn(mx * my);
    for (int ix = 0; ix < mx; ++ix) {
        const double x = g.node_coord(0, ix + 1);
        for (int iy = 0; iy < my; ++iy) {
            const double y = g.node_coord(1, iy + 1);
            const int id = ix * my + iy;
            kw[id] = checked_kappa(problem.permeability, x - 0.5 * hx, y);
            ke[id] = checked_kappa(problem.permeability, x + 0.5 * hx, y);
            ks[id] = checked_kappa(problem.permeability, x, y - 0.5 * hy);
            kn[id] = checked_kappa(problem.permeability, x, y + 0.5 * hy);
        }
    }

    SparseSystem sys;
    sys.size = static_cast<std::size_t>(mx) * my;
    sys.rhs.resize(sys.size);
    sys.diagonal.resize(sys.size);
    const double ax = 1.0 / (hx * hx), ay = 1.0 / (hy * hy);
    for (int ix = 0; ix < mx; ++ix)
        for (int iy = 0; iy < my; ++iy) {
            const int id = ix * my + iy;
            sys.rhs[id] = problem.forcing(g.node_coord(0, ix + 1), g.node_coord(1, iy + 1));
            sys.diagonal[id] = ax * (kw[id] + ke[id]) + ay * (ks[id] + kn[id]);
        }
    sys.apply = [mx, my, ax, ay, kw, ke, ks, kn](const std::vector<double>& v,
                                                 std::vector<double>& out) {
        for (int ix = 0; ix < mx; ++ix)
            for (int iy = 0; iy < my; ++iy) {
                const int id = ix * my + iy;
                double acc = (ax * (kw[id] + ke[id]) + ay * (ks[id] + kn[id])) * v[id];
                if (ix > 0) acc -= ax * kw[id] * v[id - my];
                if (ix < mx - 1) acc -= ax * ke[id] * v[id + my];
                if (iy > 0) acc -= ay * ks[id] * v[id - 1];
                if (iy < my - 1) acc -= ay * kn[id] * v[id + 1];
                out[id] = acc;
            }
    };
    return sys;
}

std::vector<double> solve_cg(const SparseSystem& sys, double tol, long max_iter,
                             bool project_mean) {
    const std::size_t n = sys.size;
    std::vector<double> x(n, 0.0), r = sys.rhs, z(n), p(n), ap(n);

    auto remove_mean = [n](std::vector<double>& v) {
        double mean = 0.0;
        for (double vi : v) mean += vi;
        mean /= static_cast<double>(n);
        for (double& vi : v) vi -= mean;
    };
    if (project_mean) remove_mean(r);

    double bnorm = 0.0;
    for (double ri : r) bnorm += ri * ri;
    bnorm = std::sqrt(bnorm);
    if (bnorm == 0.0) return x;

    for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / sys.diagonal[i];
    if (project_mean) remove_mean(z);
    p = z;
    double rz = 0.0;
    for (std::size_t i = 0; i < n; ++i) rz += r[i] * z[i];

    double rnorm = bnorm;
    for (long it = 0; it < max_iter; ++it) {
        sys.apply(p, ap);
        double pap = 0.0;
        for (std::size_t i = 0; i < n; ++i) pap += p[i] * ap[i];
        const double alpha = rz / pap;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if (project_mean) {
            remove_mean(x);
            remove_mean(r);
        }
        rnorm = 0.0;
        for (double ri : r) rnorm += ri * ri;
        rnorm = std::sqrt(rnorm);
        if (rnorm <= tol * bnorm) return x;
        for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / sys.diagonal[i];
        if (project_mean) remove_mean(z);
        double rz_next = 0.0;
        for (std::size_t i = 0; i < n; ++i) rz_next += r[i] * z[i];
        const double beta = rz_next / rz;
        rz = rz_next;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    throw IterationLimitError(
        "conjugate gradients hit the iteration cap at relative residual " +
            std::to_string(rnorm / bnorm),
        rnorm / bnorm);
}

GridField solve_fine_2d(const EllipticProblem& problem, double tol, long max_iter) {
    const Grid& g = problem.grid;
    if (!(tol > 0.0)) throw ShapeError("tolerance must be positive");
    SparseSystem sys = assemble_fine_2d(problem);
    if (max_iter < 0)
        max_iter = 50L * g.n[0] * g.n[1];
    std::vector<double> u = solve_cg(sys, tol, max_iter);
    GridField field = make_field(g);
    const int my = g.n[1] - 1;
    for (int ix = 1; ix < g.n[0]; ++ix)
        for (int iy = 1; iy < g.n[1]; ++iy)
            field.at(ix, iy) = u[(ix - 1) * my + (iy - 1)];
    return field;
}

GridField solve_coarse_2d(const EllipticProblem& problem, int coarse_n) {
    const Grid& g = problem.grid;
    if (g.dim != 2) throw ShapeError("solve_coarse_2d requires a 2D problem");
    if (coarse_n < 2) throw ShapeError("coarse grid needs at least 2 cells");
    if (problem.eps_min > 0.0 && coarse_n * problem.eps_min > 2.0)
        throw DomainError("coarse grid would resolve the fast scale (n*eps > 2)");

    Grid cg = make_grid_2d(g.lo[0], g.hi[0], coarse_n, g.lo[1], g.hi[1], coarse_n);
    const double hx = cg.spacing(0), hy = cg.spacing(1);

    // harmonic average of kappa along an edge, 16-point composite midpoint
    auto edge_harmonic = [&](double x0, double y0, double dx, double dy) {
        double acc = 0.0;
        for (int s = 0; s < 16; ++s) {
            const double t = (s + 0.5) / 16.0;
            acc += 1.0 / checked_kappa(problem.permeability, x0 + t * dx, y0 + t * dy);
        }
        return 16.0 / acc;
    };

    EllipticProblem averaged;
    averaged.forcing = problem.forcing;
    averaged.grid = cg;
    averaged.permeability = problem.permeability;  // placeholder, replaced below

    // Assemble directly: the averaged coefficient is edge-specific, not a
    // pointwise field, so the generic assembler does not apply.
    const int m = coarse_n - 1;
    SparseSystem sys;
    sys.size = static_cast<std::size_t>(m) * m;
    sys.rhs.resize(sys.size);
    sys.diagonal.resize(sys.size);
    std::vector<double> kw(sys.size), ke(sys.size), ks(sys.size), kn(sys.size);
    for (int ix = 0; ix < m; ++ix) {
        const double x = cg.node_coord(0, ix + 1);
        for (int iy = 0; iy < m; ++iy) {
            const double y = cg.node_coord(1, iy + 1);
            const int id = ix * m + iy;
            kw[id] = edge_harmonic(x - hx, y, hx, 0.0);
            ke[id] = edge_harmonic(x, y, hx, 0.0);
            ks[id] = edge_harmonic(x, y - hy, 0.0, hy);
            kn[id] = edge_harmonic(x, y, 0.0, hy);
            sys.rhs[id] = problem.forcing(x, y);
        }
    }
    const double ax = 1.0 / (hx * hx), ay = 1.0 / (hy * hy);
    for (std::size_t id = 0; id < sys.size; ++id)
        sys.diagonal[id] = ax * (kw[id] + ke[id]) + ay * (ks[id] + kn[id]);
    sys.apply = [m, ax, ay, kw, ke, ks, kn](const std::vector<double>& v,
                                            std::vector<double>& out) {
        for (int ix = 0; ix < m; ++ix)
            for (int iy = 0; iy < m; ++iy) {
                const int id = ix * m + iy;
                double acc = (ax * (kw[id] + ke[id]) + ay * (ks[id] + kn[id])) * v[id];
                if (ix > 0) acc -= ax * kw[id] * v[id - m];
                if (ix < m - 1) acc -= ax * ke[id] * v[id + m];
                if (iy > 0) acc -= ay * ks[id] * v[id - 1];
                if (iy < m - 1) acc -= ay * kn[id] * v[id + 1];
                out[id] = acc;
            }
    };

    std::vector<double> u = solve_cg(sys, 1e-10, 50L * coarse_n * coarse_n);
    GridField field = make_field(cg);
    for (int ix = 1; ix < coarse_n; ++ix)
        for (int iy = 1; iy < coarse_n; ++iy)
            field.at(ix, iy) = u[(ix - 1) * m + (iy - 1)];
    return field;
}

}  // namespace downscale
