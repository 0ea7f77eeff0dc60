#include "downscale/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "downscale/errors.hpp"

namespace downscale {

double Grid::spacing(int axis) const {
    if (degenerate(axis)) return 0.0;
    return (hi[axis] - lo[axis]) / n[axis];
}

std::size_t Grid::node_count() const {
    std::size_t count = nodes(0);
    if (dim == 2) count *= nodes(1);
    return count;
}

double Grid::node_coord(int axis, int k) const {
    return lo[axis] + k * spacing(axis);
}

bool Grid::operator==(const Grid& other) const {
    if (dim != other.dim) return false;
    for (int a = 0; a < dim; ++a) {
        if (n[a] != other.n[a] || lo[a] != other.lo[a] || hi[a] != other.hi[a])
            return false;
    }
    return true;
}

namespace {

void check_axis(double lo, double hi, int n) {
    if (n < 0) throw ShapeError("grid cell count must be non-negative");
    if (n == 0) {
        if (lo != hi)
            throw ShapeError("degenerate grid axis requires lo == hi");
        return;
    }
    if (!(hi > lo))
        throw ShapeError("grid axis requires hi > lo");
}

}  // namespace

Grid make_grid_1d(double lo, double hi, int n) {
    check_axis(lo, hi, n);
    Grid g;
    g.dim = 1;
    g.n = {n, 0};
    g.lo = {lo, 0.0};
    g.hi = {hi, 0.0};
    return g;
}

Grid make_grid_2d(double lo0, double hi0, int n0,
                  double lo1, double hi1, int n1) {
    check_axis(lo0, hi0, n0);
    check_axis(lo1, hi1, n1);
    Grid g;
    g.dim = 2;
    g.n = {n0, n1};
    g.lo = {lo0, lo1};
    g.hi = {hi0, hi1};
    return g;
}

GridField make_field(const Grid& grid, double fill) {
    return GridField{grid, std::vector<double>(grid.node_count(), fill)};
}

GridField sample_field(const Grid& grid,
                       const std::function<double(double, double)>& f) {
    GridField field = make_field(grid);
    if (grid.dim == 1) {
        for (int i = 0; i <= grid.n[0]; ++i)
            field.values[i] = f(grid.node_coord(0, i), 0.0);
    } else {
        for (int ix = 0; ix <= grid.n[0]; ++ix)
            for (int iy = 0; iy <= grid.n[1]; ++iy)
                field.at(ix, iy) = f(grid.node_coord(0, ix), grid.node_coord(1, iy));
    }
    return field;
}

namespace {

// Locate x on one axis: cell index plus fractional offset in [0,1].
// Offsets within 1e-9 of a node are snapped so interpolation reproduces
// nodal values bitwise.
struct AxisPos {
    int cell;
    double t;
};

AxisPos locate(const Grid& grid, int axis, double x) {
    if (grid.degenerate(axis)) {
        if (std::abs(x - grid.lo[axis]) > 1e-12)
            throw DomainError("coordinate " + std::to_string(x) +
                              " outside degenerate axis at " +
                              std::to_string(grid.lo[axis]));
        return {0, 0.0};
    }
    const double h = grid.spacing(axis);
    const double tol = 1e-12 * h;
    if (x < grid.lo[axis] - tol || x > grid.hi[axis] + tol)
        throw DomainError("coordinate " + std::to_string(x) +
                          " outside grid axis [" + std::to_string(grid.lo[axis]) +
                          ", " + std::to_string(grid.hi[axis]) + "]");
    double s = (x - grid.lo[axis]) / h;
    s = std::min(std::max(s, 0.0), static_cast<double>(grid.n[axis]));
    int cell = std::min(static_cast<int>(s), grid.n[axis] - 1);
    double t = s - cell;
    if (t < 1e-9) t = 0.0;
    if (t > 1.0 - 1e-9) {
        t = 0.0;
        ++cell;
        if (cell > grid.n[axis] - 1) {
            // x at (or snapped to) the last node
            return {grid.n[axis] - 1, 1.0};
        }
    }
    return {cell, t};
}

double node_or_blend_1d(const GridField& f, AxisPos p) {
    if (p.t == 0.0) return f.values[p.cell];
    if (p.t == 1.0) return f.values[p.cell + 1];
    return (1.0 - p.t) * f.values[p.cell] + p.t * f.values[p.cell + 1];
}

}  // namespace

double interpolate(const GridField& field, const std::array<double, 2>& x) {
    const Grid& g = field.grid;
    if (g.dim == 1) {
        if (g.degenerate(0)) {
            locate(g, 0, x[0]);
            return field.values[0];
        }
        return node_or_blend_1d(field, locate(g, 0, x[0]));
    }
    const AxisPos px = locate(g, 0, x[0]);
    const AxisPos py = locate(g, 1, x[1]);
    auto value = [&](int ix, int iy) { return field.at(ix, iy); };
    const int ix = px.cell, iy = py.cell;
    const double tx = px.t, ty = py.t;
    if (tx == 0.0 && ty == 0.0) return value(ix, iy);
    if (tx == 1.0 && ty == 0.0) return value(ix + 1, iy);
    if (tx == 0.0 && ty == 1.0) return value(ix, iy + 1);
    if (tx == 1.0 && ty == 1.0) return value(ix + 1, iy + 1);
    const int ix1 = g.degenerate(0) ? ix : ix + 1;
    const int iy1 = g.degenerate(1) ? iy : iy + 1;
    return value(ix, iy) * (1 - tx) * (1 - ty) +
           value(ix1, iy) * tx * (1 - ty) +
           value(ix, iy1) * (1 - tx) * ty +
           value(ix1, iy1) * tx * ty;
}

double relative_l2_error(const GridField& approx, const GridField& reference) {
    if (!(approx.grid == reference.grid))
        throw ShapeError("relative_l2_error requires identical grids");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < reference.values.size(); ++i) {
        const double d = approx.values[i] - reference.values[i];
        num += d * d;
        den += reference.values[i] * reference.values[i];
    }
    if (den == 0.0)
        throw DegenerateReferenceError("reference field has zero norm");
    return std::sqrt(num) / std::sqrt(den);
}

GridField restrict_field(const GridField& field, const Grid& coarse) {
    if (coarse.dim != field.grid.dim)
        throw DomainError("restriction target has different dimension");
    for (int a = 0; a < coarse.dim; ++a) {
        if (std::abs(coarse.lo[a] - field.grid.lo[a]) > 1e-12 ||
            std::abs(coarse.hi[a] - field.grid.hi[a]) > 1e-12)
            throw DomainError("restriction target bounds differ from field bounds");
    }
    GridField out = make_field(coarse);
    if (coarse.dim == 1) {
        for (int i = 0; i <= coarse.n[0]; ++i)
            out.values[i] = interpolate(field, {coarse.node_coord(0, i), 0.0});
    } else {
        for (int ix = 0; ix <= coarse.n[0]; ++ix)
            for (int iy = 0; iy <= coarse.n[1]; ++iy)
                out.at(ix, iy) = interpolate(
                    field, {coarse.node_coord(0, ix), coarse.node_coord(1, iy)});
    }
    return out;
}

PermeabilityField perm_1d_sin(double b, double c, double eps) {
    if (!(b - std::abs(c) > 0.0))
        throw EllipticityError("1d sin coefficient is not uniformly positive");
    PermeabilityField p;
    p.kind = PermeabilityField::Kind::closed_form_1d;
    p.c_min = b - std::abs(c);
    p.eval = [b, c, eps](double x, double) {
        return b + c * std::sin(2.0 * M_PI * x / eps);
    };
    return p;
}

PermeabilityField perm_2d_fast(double eps) {
    PermeabilityField p;
    p.kind = PermeabilityField::Kind::closed_form_2d;
    p.c_min = 1.0;
    p.eval = [eps](double x, double y) {
        return 2.0 + std::sin(2.0 * M_PI * x / eps) * std::cos(2.0 * M_PI * y / eps);
    };
    return p;
}

PermeabilityField perm_2d_multiscale(const std::array<double, 8>& eps,
                                     double floor_value) {
    if (!(floor_value > 0.0))
        throw EllipticityError("multiscale coefficient floor must be positive");
    PermeabilityField p;
    p.kind = PermeabilityField::Kind::closed_form_2d;
    p.c_min = floor_value;
    p.eval = [eps, floor_value](double x, double y) {
        const double t1 = std::sin(2 * M_PI * x / eps[0]) * std::cos(2 * M_PI * y / eps[1]);
        const double d1 = 2.0 + std::cos(2 * M_PI * x / eps[2]) * std::sin(2 * M_PI * y / eps[3]);
        const double t2 = std::sin(2 * M_PI * x / eps[4]) * std::cos(2 * M_PI * y / eps[5]);
        const double d2 = 2.0 + std::cos(2 * M_PI * x / eps[6]) * std::sin(2 * M_PI * y / eps[7]);
        return std::max(1.0 + t1 / d1 + t2 / d2, floor_value);
    };
    return p;
}

PermeabilityField perm_const(double c, int dim) {
    if (!(c > 0.0))
        throw EllipticityError("constant coefficient must be positive");
    PermeabilityField p;
    p.kind = dim == 1 ? PermeabilityField::Kind::closed_form_1d
                      : PermeabilityField::Kind::closed_form_2d;
    p.c_min = c;
    p.eval = [c](double, double) { return c; };
    return p;
}

PermeabilityField perm_2d_from_fn(std::function<double(double, double)> f,
                                  double c_min) {
    if (!(c_min > 0.0))
        throw EllipticityError("coefficient lower bound must be positive");
    PermeabilityField p;
    p.kind = PermeabilityField::Kind::closed_form_2d;
    p.c_min = c_min;
    p.eval = std::move(f);
    return p;
}

PermeabilityField perm_tabulated(GridField samples) {
    double lowest = samples.values.empty() ? 0.0 : samples.values[0];
    for (double v : samples.values) lowest = std::min(lowest, v);
    if (!(lowest > 0.0))
        throw EllipticityError("tabulated coefficient has a non-positive sample");
    PermeabilityField p;
    p.kind = PermeabilityField::Kind::tabulated;
    p.c_min = lowest;
    auto table = std::make_shared<GridField>(std::move(samples));
    const int dim = table->grid.dim;
    p.eval = [table, dim](double x, double y) {
        return interpolate(*table, {x, dim == 2 ? y : 0.0});
    };
    return p;
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_field_csv(const GridField& field, std::ostream& out) {
    const Grid& g = field.grid;
    out << "# grid: " << g.dim;
    for (int a = 0; a < g.dim; ++a) out << ',' << g.n[a];
    for (int a = 0; a < g.dim; ++a) out << ',' << fmt17(g.lo[a]);
    for (int a = 0; a < g.dim; ++a) out << ',' << fmt17(g.hi[a]);
    out << '\n';
    for (double v : field.values) out << fmt17(v) << '\n';
}

GridField read_field_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line))
        throw IoError("empty field CSV");
    const std::string prefix = "# grid: ";
    if (line.rfind(prefix, 0) != 0)
        throw IoError("field CSV missing grid header");
    std::stringstream hdr(line.substr(prefix.size()));
    std::vector<double> nums;
    std::string tok;
    while (std::getline(hdr, tok, ','))
        nums.push_back(std::stod(tok));
    if (nums.empty())
        throw IoError("malformed grid header");
    const int dim = static_cast<int>(nums[0]);
    Grid g;
    if (dim == 1 && nums.size() == 4) {
        g = make_grid_1d(nums[2], nums[3], static_cast<int>(nums[1]));
    } else if (dim == 2 && nums.size() == 7) {
        g = make_grid_2d(nums[3], nums[5], static_cast<int>(nums[1]),
                         nums[4], nums[6], static_cast<int>(nums[2]));
    } else {
        throw IoError("malformed grid header");
    }
    GridField field = make_field(g);
    for (std::size_t i = 0; i < field.values.size(); ++i) {
        if (!std::getline(in, line))
            throw IoError("field CSV truncated at value " + std::to_string(i));
        field.values[i] = std::stod(line);
    }
    return field;
}

void write_field_csv_file(const GridField& field, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    write_field_csv(field, out);
}

GridField read_field_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return read_field_csv(in);
}

}  // namespace downscale
