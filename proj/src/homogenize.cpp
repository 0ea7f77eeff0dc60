#include "downscale/homogenize.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "downscale/elliptic.hpp"
#include "downscale/errors.hpp"

namespace downscale {

namespace {

double checked_sample(const PermeabilityField& a, double x, double y) {
    const double v = a(x, y);
    if (!(v > 0.0))
        throw EllipticityError("coefficient is " + std::to_string(v) + " at (" +
                               std::to_string(x) + ", " + std::to_string(y) + ")");
    return v;
}

double wrap_unit(double t) { return t - std::floor(t); }

// Nodal derivative of a field along `axis`, centered inside, one-sided at
// the boundary, then (bi)linearly interpolated at x.
double gradient_at(const GridField& field, int axis, const std::array<double, 2>& x) {
    const Grid& g = field.grid;
    auto locate = [&](int ax) {
        if (g.degenerate(ax)) return std::pair<int, double>(0, 0.0);
        const double h = g.spacing(ax);
        double t = (x[ax] - g.lo[ax]) / h;
        t = std::min(std::max(t, 0.0), static_cast<double>(g.n[ax]));
        int i = std::min(static_cast<int>(t), g.n[ax] - 1);
        return std::pair<int, double>(i, t - i);
    };
    auto nodal = [&](int ix, int iy) {
        const int k = axis == 0 ? ix : iy;
        const int nk = g.n[axis];
        const double h = g.spacing(axis);
        auto value = [&](int j) { return axis == 0 ? field.at(j, iy) : field.at(ix, j); };
        if (k == 0) return (value(1) - value(0)) / h;
        if (k == nk) return (value(nk) - value(nk - 1)) / h;
        return (value(k + 1) - value(k - 1)) / (2.0 * h);
    };
    const auto [i0, t0] = locate(0);
    if (g.dim == 1) return (1.0 - t0) * nodal(i0, 0) + t0 * nodal(i0 + 1, 0);
    const auto [i1, t1] = locate(1);
    return (1.0 - t0) * (1.0 - t1) * nodal(i0, i1) + t0 * (1.0 - t1) * nodal(i0 + 1, i1) +
           (1.0 - t0) * t1 * nodal(i0, i1 + 1) + t0 * t1 * nodal(i0 + 1, i1 + 1);
}

void check_cell_invariants(CellSolution& cell) {
    for (int k = 0; k < cell.dim; ++k) {
        GridField& f = cell.chi[static_cast<std::size_t>(k)];
        const Grid& g = f.grid;
        const int m0 = g.n[0];
        double norm = 0.0;
        for (double v : f.values) norm += v * v;
        norm = std::sqrt(norm / static_cast<double>(f.values.size()));
        const double tol = 1e-10 * std::max(1.0, norm);
        if (g.dim == 1) {
            if (std::abs(f.at(0, 0) - f.at(m0, 0)) > tol)
                throw DomainError("cell solution is not periodic");
        } else {
            const int m1 = g.n[1];
            for (int i = 0; i <= m0; ++i)
                if (std::abs(f.at(i, 0) - f.at(i, m1)) > tol)
                    throw DomainError("cell solution is not periodic across y faces");
            for (int j = 0; j <= m1; ++j)
                if (std::abs(f.at(0, j) - f.at(m0, j)) > tol)
                    throw DomainError("cell solution is not periodic across x faces");
        }
        if (std::abs(cell.mean[static_cast<std::size_t>(k)]) > 1e-8 * std::max(1.0, norm))
            throw DomainError("cell solution mean was not removed");
    }
}

SparseSystem constant_system_2d(double kx, double ky,
                                const std::function<double(double, double)>& forcing,
                                const Grid& g) {
    const int nx = g.n[0], ny = g.n[1];
    const int mx = nx - 1, my = ny - 1;
    const double ax = kx / (g.spacing(0) * g.spacing(0));
    const double ay = ky / (g.spacing(1) * g.spacing(1));
    SparseSystem sys;
    sys.size = static_cast<std::size_t>(mx) * my;
    sys.rhs.resize(sys.size);
    sys.diagonal.assign(sys.size, 2.0 * (ax + ay));
    for (int ix = 0; ix < mx; ++ix)
        for (int iy = 0; iy < my; ++iy)
            sys.rhs[ix * my + iy] = forcing(g.node_coord(0, ix + 1), g.node_coord(1, iy + 1));
    sys.apply = [mx, my, ax, ay](const std::vector<double>& v, std::vector<double>& out) {
        for (int ix = 0; ix < mx; ++ix)
            for (int iy = 0; iy < my; ++iy) {
                const int id = ix * my + iy;
                double acc = 2.0 * (ax + ay) * v[id];
                if (ix > 0) acc -= ax * v[id - my];
                if (ix < mx - 1) acc -= ax * v[id + my];
                if (iy > 0) acc -= ay * v[id - 1];
                if (iy < my - 1) acc -= ay * v[id + 1];
                out[id] = acc;
            }
    };
    return sys;
}

}  // namespace

EffectiveCoefficient effective_coefficient_1d(const PermeabilityField& a, int quad_n) {
    if (quad_n < 16) throw ShapeError("quadrature needs at least 16 panels");
    const double h = 1.0 / quad_n;
    double integral = 0.5 / checked_sample(a, 0.0, 0.0) + 0.5 / checked_sample(a, 1.0, 0.0);
    for (int i = 1; i < quad_n; ++i) integral += 1.0 / checked_sample(a, i * h, 0.0);
    integral *= h;
    EffectiveCoefficient eff;
    eff.dim = 1;
    eff.a[0][0] = 1.0 / integral;
    return eff;
}

CellSolution cell_solution_1d(const PermeabilityField& a, int cell_n) {
    if (cell_n < 8) throw ShapeError("cell lattice needs at least 8 panels");
    const int m = cell_n;
    const double h = 1.0 / m;
    std::vector<double> inv(m);
    double inv_mean = 0.0;
    for (int i = 0; i < m; ++i) {
        inv[i] = 1.0 / checked_sample(a, (i + 0.5) * h, 0.0);
        inv_mean += inv[i];
    }
    inv_mean /= m;
    const double a_star = 1.0 / inv_mean;  // midpoint-rule harmonic mean

    GridField chi = make_field(make_grid_1d(0.0, 1.0, m));
    double acc = 0.0, node_sum = 0.0;
    chi.values[0] = 0.0;
    for (int i = 0; i < m; ++i) {
        acc += h * (a_star * inv[i] - 1.0);
        chi.values[static_cast<std::size_t>(i) + 1] = acc;
        node_sum += chi.values[i];  // unique nodes 0..m-1
    }
    const double mean = node_sum / m;
    for (double& v : chi.values) v -= mean;

    CellSolution cell;
    cell.dim = 1;
    cell.chi.push_back(std::move(chi));
    double residual = 0.0;
    for (int i = 0; i < m; ++i) residual += cell.chi[0].values[static_cast<std::size_t>(i)];
    cell.mean[0] = residual / m;
    check_cell_invariants(cell);
    return cell;
}

CellSolution solve_cell_problem_2d(const PermeabilityField& a, int cell_n, double tol) {
    if (cell_n < 8) throw ShapeError("cell lattice needs at least 8 panels");
    const int m = cell_n;
    const double h = 1.0 / m;
    const std::size_t mm = static_cast<std::size_t>(m) * m;

    // Edge-midpoint samples, wrapped into the unit cell.
    std::vector<double> aw(mm), ae(mm), as(mm), an(mm);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            const std::size_t id = static_cast<std::size_t>(i) * m + j;
            aw[id] = checked_sample(a, wrap_unit((i - 0.5) * h), j * h);
            ae[id] = checked_sample(a, wrap_unit((i + 0.5) * h), j * h);
            as[id] = checked_sample(a, i * h, wrap_unit((j - 0.5) * h));
            an[id] = checked_sample(a, i * h, wrap_unit((j + 0.5) * h));
        }

    SparseSystem sys;
    sys.size = mm;
    sys.diagonal.resize(mm);
    const double scale = 1.0 / (h * h);
    for (std::size_t id = 0; id < mm; ++id)
        sys.diagonal[id] = scale * (aw[id] + ae[id] + as[id] + an[id]);
    sys.apply = [m, scale, &aw, &ae, &as, &an](const std::vector<double>& v,
                                               std::vector<double>& out) {
        for (int i = 0; i < m; ++i) {
            const int iw = (i + m - 1) % m, ie = (i + 1) % m;
            for (int j = 0; j < m; ++j) {
                const int js = (j + m - 1) % m, jn = (j + 1) % m;
                const std::size_t id = static_cast<std::size_t>(i) * m + j;
                out[id] = scale * ((aw[id] + ae[id] + as[id] + an[id]) * v[id] -
                                   aw[id] * v[static_cast<std::size_t>(iw) * m + j] -
                                   ae[id] * v[static_cast<std::size_t>(ie) * m + j] -
                                   as[id] * v[static_cast<std::size_t>(i) * m + js] -
                                   an[id] * v[static_cast<std::size_t>(i) * m + jn]);
            }
        }
    };

    CellSolution cell;
    cell.dim = 2;
    for (int k = 0; k < 2; ++k) {
        sys.rhs.resize(mm);
        double rhs_sum = 0.0, rhs_abs = 0.0;
        for (std::size_t id = 0; id < mm; ++id) {
            sys.rhs[id] = (k == 0 ? ae[id] - aw[id] : an[id] - as[id]) / h;
            rhs_sum += sys.rhs[id];
            rhs_abs += std::abs(sys.rhs[id]);
        }
        if (std::abs(rhs_sum) > 1e-8 * std::max(1.0, rhs_abs))
            throw DomainError("cell problem right-hand side is incompatible");
        std::vector<double> v = solve_cg(sys, tol, 200L * m * m, /*project_mean=*/true);

        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(mm);

        GridField chi = make_field(make_grid_2d(0.0, 1.0, m, 0.0, 1.0, m));
        for (int i = 0; i <= m; ++i)
            for (int j = 0; j <= m; ++j)
                chi.at(i, j) = v[static_cast<std::size_t>(i % m) * m + (j % m)] - mean;
        double residual = 0.0;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) residual += chi.at(i, j);
        cell.mean[static_cast<std::size_t>(k)] = residual / static_cast<double>(mm);
        cell.chi.push_back(std::move(chi));
    }
    check_cell_invariants(cell);
    return cell;
}

EffectiveCoefficient effective_coefficient_2d(const PermeabilityField& a,
                                              const CellSolution& chi) {
    if (chi.dim != 2 || chi.chi.size() != 2)
        throw ShapeError("effective_coefficient_2d needs a 2D cell solution");
    const Grid& g = chi.chi[0].grid;
    if (!(chi.chi[1].grid == g)) throw ShapeError("cell solution grids disagree");
    const int m = g.n[0];
    const double h = 1.0 / m;

    std::array<std::array<double, 2>, 2> acc{{{0.0, 0.0}, {0.0, 0.0}}};
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            const double ac = checked_sample(a, (i + 0.5) * h, (j + 0.5) * h);
            for (int k = 0; k < 2; ++k) {
                const GridField& c = chi.chi[static_cast<std::size_t>(k)];
                const double d1 = (c.at(i + 1, j) + c.at(i + 1, j + 1) - c.at(i, j) -
                                   c.at(i, j + 1)) /
                                  (2.0 * h);
                const double d2 = (c.at(i, j + 1) + c.at(i + 1, j + 1) - c.at(i, j) -
                                   c.at(i + 1, j)) /
                                  (2.0 * h);
                acc[0][static_cast<std::size_t>(k)] += ac * ((k == 0 ? 1.0 : 0.0) + d1) * h * h;
                acc[1][static_cast<std::size_t>(k)] += ac * ((k == 1 ? 1.0 : 0.0) + d2) * h * h;
            }
        }

    EffectiveCoefficient eff;
    eff.dim = 2;
    eff.a[0][0] = acc[0][0];
    eff.a[1][1] = acc[1][1];
    eff.a[0][1] = eff.a[1][0] = 0.5 * (acc[0][1] + acc[1][0]);
    const double tr = eff.a[0][0] + eff.a[1][1];
    const double det = eff.a[0][0] * eff.a[1][1] - eff.a[0][1] * eff.a[1][0];
    if (!(tr > 0.0) || !(det > 0.0))
        throw EllipticityError("effective tensor is not positive definite");
    return eff;
}

GridField solve_homogenized(const EffectiveCoefficient& a_star,
                            const std::function<double(double, double)>& forcing,
                            const Grid& grid) {
    if (a_star.dim != grid.dim) throw ShapeError("tensor and grid dimensions disagree");
    if (grid.dim == 1) {
        if (!(a_star.a[0][0] > 0.0)) throw EllipticityError("effective coefficient is not positive");
        EllipticProblem p;
        p.permeability = perm_const(a_star.a[0][0]);
        p.forcing = forcing;
        p.grid = grid;
        return solve_fine_1d(p);
    }
    const double a00 = a_star.a[0][0], a11 = a_star.a[1][1], a01 = a_star.a[0][1];
    if (!(a00 > 0.0) || !(a11 > 0.0))
        throw EllipticityError("effective tensor is not positive definite");
    if (std::abs(a01) > 1e-10 * (a00 + a11))
        throw DomainError("off-diagonal effective tensors are not supported");
    SparseSystem sys = constant_system_2d(a00, a11, forcing, grid);
    std::vector<double> v = solve_cg(sys, 1e-10, 50L * grid.n[0] * grid.n[1]);
    GridField field = make_field(grid);
    const int my = grid.n[1] - 1;
    for (int ix = 1; ix < grid.n[0]; ++ix)
        for (int iy = 1; iy < grid.n[1]; ++iy)
            field.at(ix, iy) = v[(ix - 1) * my + (iy - 1)];
    return field;
}

double corrector_solution(const CorrectorExpansion& exp, const std::array<double, 2>& x) {
    double value = interpolate(exp.u0, x);
    if (exp.epsilon == 0.0 || exp.chi.chi.empty()) return value;
    std::array<double, 2> y{0.0, 0.0};
    for (int j = 0; j < exp.u0.grid.dim; ++j)
        y[static_cast<std::size_t>(j)] = wrap_unit(x[static_cast<std::size_t>(j)] / exp.epsilon);
    for (int j = 0; j < exp.u0.grid.dim; ++j) {
        const GridField& chi_j = exp.chi.chi[static_cast<std::size_t>(j)];
        value += exp.epsilon * interpolate(chi_j, y) * gradient_at(exp.u0, j, x);
    }
    return value;
}

GridField corrector_field(const CorrectorExpansion& exp, const Grid& eval_grid) {
    GridField out = make_field(eval_grid);
    for (int ix = 0; ix < eval_grid.nodes(0); ++ix)
        for (int iy = 0; iy < (eval_grid.dim == 2 ? eval_grid.nodes(1) : 1); ++iy)
            out.at(ix, iy) = corrector_solution(
                exp, {eval_grid.node_coord(0, ix),
                      eval_grid.dim == 2 ? eval_grid.node_coord(1, iy) : 0.0});
    return out;
}

void write_cell_solution_csv(const CellSolution& cell, std::ostream& out) {
    out << "# cell: dim=" << cell.dim << "\n";
    for (const GridField& f : cell.chi) write_field_csv(f, out);
}

CellSolution read_cell_solution_csv(std::istream& in) {
    std::string header;
    if (!std::getline(in, header) || header.rfind("# cell: dim=", 0) != 0)
        throw IoError("missing cell header");
    CellSolution cell;
    cell.dim = std::stoi(header.substr(12));
    if (cell.dim < 1 || cell.dim > 2) throw IoError("unsupported cell dimension");
    for (int k = 0; k < cell.dim; ++k) cell.chi.push_back(read_field_csv(in));
    return cell;
}

void write_effective_csv(const EffectiveCoefficient& eff, std::ostream& out) {
    out << "# cell: a_star dim=" << eff.dim << "\n";
    for (int i = 0; i < eff.dim; ++i) {
        for (int j = 0; j < eff.dim; ++j)
            out << (j ? "," : "") << fmt17(eff.a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
        out << "\n";
    }
}

EffectiveCoefficient read_effective_csv(std::istream& in) {
    std::string header;
    if (!std::getline(in, header) || header.rfind("# cell: a_star dim=", 0) != 0)
        throw IoError("missing effective-coefficient header");
    EffectiveCoefficient eff;
    eff.dim = std::stoi(header.substr(19));
    if (eff.dim < 1 || eff.dim > 2) throw IoError("unsupported tensor dimension");
    for (int i = 0; i < eff.dim; ++i) {
        std::string line;
        if (!std::getline(in, line)) throw IoError("truncated effective-coefficient row");
        std::istringstream row(line);
        std::string item;
        for (int j = 0; j < eff.dim; ++j) {
            if (!std::getline(row, item, ',')) throw IoError("short effective-coefficient row");
            eff.a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = std::stod(item);
        }
    }
    return eff;
}

}  // namespace downscale
