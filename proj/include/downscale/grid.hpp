#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace downscale {

// Uniform structured grid on an axis-aligned box, 1D or 2D.
// n counts cells, so each axis carries n+1 nodes at lo + k*h.
// A degenerate axis (n == 0 with lo == hi) represents a single-point
// lattice; solvers reject it, interpolation and restriction accept it.
struct Grid {
    int dim = 1;
    std::array<int, 2> n{0, 0};
    std::array<double, 2> lo{0.0, 0.0};
    std::array<double, 2> hi{0.0, 0.0};

    double spacing(int axis) const;
    int nodes(int axis) const { return n[axis] + 1; }
    std::size_t node_count() const;
    double node_coord(int axis, int k) const;
    bool degenerate(int axis) const { return n[axis] == 0; }

    // Row-major with the y index varying fastest.
    std::size_t index(int ix, int iy) const {
        return static_cast<std::size_t>(ix) * nodes(1) + iy;
    }

    bool operator==(const Grid& other) const;
};

Grid make_grid_1d(double lo, double hi, int n);
Grid make_grid_2d(double lo0, double hi0, int n0,
                  double lo1, double hi1, int n1);

// Scalar field sampled at every node of a grid.
struct GridField {
    Grid grid;
    std::vector<double> values;

    double& at(int ix, int iy) { return values[grid.index(ix, iy)]; }
    double at(int ix, int iy) const { return values[grid.index(ix, iy)]; }
};

GridField make_field(const Grid& grid, double fill = 0.0);
GridField sample_field(const Grid& grid,
                       const std::function<double(double, double)>& f);

// Linear (1D) / bilinear (2D) interpolation; exact at nodes.
// Throws DomainError if x lies outside the bounds by more than 1e-12*h.
double interpolate(const GridField& field, const std::array<double, 2>& x);

// sqrt(sum (approx - ref)^2) / sqrt(sum ref^2) over all nodes.
double relative_l2_error(const GridField& approx, const GridField& reference);

// Sample a field onto a coarser grid spanning the same box.
GridField restrict_field(const GridField& field, const Grid& coarse);

// Scalar permeability coefficient kappa(x); the effective tensor in all
// supported problems is kappa * I.
struct PermeabilityField {
    enum class Kind { closed_form_1d, closed_form_2d, tabulated };
    Kind kind = Kind::closed_form_1d;
    double c_min = 0.0;  // uniform ellipticity lower bound
    std::function<double(double, double)> eval;

    double operator()(double x, double y = 0.0) const { return eval(x, y); }
};

// b + c*sin(2*pi*x/eps); requires b > |c|.
PermeabilityField perm_1d_sin(double b, double c, double eps);

// 2 + sin(2*pi*x/eps)*cos(2*pi*y/eps).
PermeabilityField perm_2d_fast(double eps);

// Two-fraction multiple-scale coefficient with eight scale parameters.
// The raw closed form dips to about -0.77 on roughly 0.6% of the unit
// square, which would break ellipticity, so values are floored at
// floor_value (the floor is the recorded c_min).
PermeabilityField perm_2d_multiscale(const std::array<double, 8>& eps,
                                     double floor_value = 0.1);

PermeabilityField perm_const(double c, int dim = 1);

// Arbitrary closed-form 2D coefficient; caller supplies the positive
// lower bound it guarantees.
PermeabilityField perm_2d_from_fn(std::function<double(double, double)> f,
                                  double c_min);

// Piecewise-(bi)linear coefficient from sampled nodal values.
PermeabilityField perm_tabulated(GridField samples);

// Decimal with 17 significant digits: round-trips a double exactly.
std::string fmt17(double v);

// CSV layout: one `# grid: dim,n...,lo...,hi...` header line, then one
// value per line in node order (2D row-major, y fastest).
void write_field_csv(const GridField& field, std::ostream& out);
GridField read_field_csv(std::istream& in);
void write_field_csv_file(const GridField& field, const std::string& path);
GridField read_field_csv_file(const std::string& path);

}  // namespace downscale
