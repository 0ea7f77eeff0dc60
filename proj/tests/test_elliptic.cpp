#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "downscale/elliptic.hpp"
#include "downscale/errors.hpp"
#include "downscale/grid.hpp"
#include "downscale/rng.hpp"

using namespace downscale;

namespace {

constexpr double kPi = std::numbers::pi;

EllipticProblem problem_1d(PermeabilityField perm,
                           std::function<double(double, double)> f, int n) {
    EllipticProblem p;
    p.permeability = std::move(perm);
    p.forcing = std::move(f);
    p.grid = make_grid_1d(0.0, 1.0, n);
    return p;
}

EllipticProblem problem_2d(PermeabilityField perm,
                           std::function<double(double, double)> f, int n) {
    EllipticProblem p;
    p.permeability = std::move(perm);
    p.forcing = std::move(f);
    p.grid = make_grid_2d(0.0, 1.0, n, 0.0, 1.0, n);
    return p;
}

double half_forcing(double, double) { return 0.5; }
double unit_forcing(double, double) { return 1.0; }

const std::array<double, 8> kMultiEps = {1.0 / 5,  1.0 / 4,  1.0 / 25, 1.0 / 16,
                                         1.0 / 16, 1.0 / 32, 1.0 / 3,  1.0 / 9};

}  // namespace

TEST_CASE("1d constant coefficient solve is exact for the quadratic solution") {
    // -k u'' = f with constants: u = f x(1-x) / (2k), exactly representable
    // by the second-order stencil.
    auto u1 = solve_fine_1d(problem_1d(perm_const(1.0), half_forcing, 256));
    CHECK(interpolate(u1, {0.5, 0.0}) == doctest::Approx(0.0625).epsilon(1e-12));
    CHECK(interpolate(u1, {0.25, 0.0}) == doctest::Approx(0.046875).epsilon(1e-12));
    CHECK(u1.at(0, 0) == 0.0);
    CHECK(u1.at(256, 0) == 0.0);

    auto u2 = solve_fine_1d(problem_1d(perm_const(2.0), half_forcing, 256));
    CHECK(interpolate(u2, {0.5, 0.0}) == doctest::Approx(0.03125).epsilon(1e-12));
}

TEST_CASE("1d oscillatory coefficient solve matches frozen reference values") {
    // a(x) = 0.8 + 0.5 sin(2 pi x / (1/16)), f = 0.5; references from an
    // independent sparse direct solver.
    auto p = problem_1d(perm_1d_sin(0.8, 0.5, 1.0 / 16), half_forcing, 1024);
    auto u = solve_fine_1d(p);
    CHECK(u.at(512, 0) == doctest::Approx(0.100080096128).epsilon(1e-9));
    CHECK(u.at(256, 0) == doctest::Approx(0.075060072096).epsilon(1e-9));

    auto p4 = problem_1d(perm_1d_sin(0.8, 0.5, 1.0 / 16), half_forcing, 4096);
    auto u4 = solve_fine_1d(p4);
    CHECK(u4.at(2048, 0) == doctest::Approx(0.100080096128).epsilon(1e-9));
}

TEST_CASE("1d manufactured solution converges at second order") {
    auto kman = [](double x, double) { return 2.0 + std::sin(2 * kPi * x); };
    auto fman = [&](double x, double) {
        return -2 * kPi * std::cos(2 * kPi * x) * kPi * std::cos(kPi * x) +
               kman(x, 0.0) * kPi * kPi * std::sin(kPi * x);
    };
    auto err_at = [&](int n) {
        auto u = solve_fine_1d(problem_1d(perm_2d_from_fn(kman, 1.0), fman, n));
        auto exact = sample_field(u.grid, [](double x, double) { return std::sin(kPi * x); });
        return relative_l2_error(u, exact);
    };
    const double ratio = err_at(64) / err_at(128);
    CHECK(ratio > 3.6);
    CHECK(ratio < 4.4);
}

TEST_CASE("2d manufactured solution converges at second order") {
    auto kman = [](double x, double y) {
        return 1.0 + 0.3 * std::sin(2 * kPi * x) * std::cos(2 * kPi * y);
    };
    auto fman = [&](double x, double y) {
        const double ux = kPi * std::cos(kPi * x) * std::sin(kPi * y);
        const double uy = kPi * std::sin(kPi * x) * std::cos(kPi * y);
        const double lap = -2 * kPi * kPi * std::sin(kPi * x) * std::sin(kPi * y);
        const double kx = 0.6 * kPi * std::cos(2 * kPi * x) * std::cos(2 * kPi * y);
        const double ky = -0.6 * kPi * std::sin(2 * kPi * x) * std::sin(2 * kPi * y);
        return -(kx * ux + ky * uy + kman(x, y) * lap);
    };
    auto err_at = [&](int n) {
        auto u = solve_fine_2d(problem_2d(perm_2d_from_fn(kman, 0.7), fman, n));
        auto exact = sample_field(u.grid, [](double x, double y) {
            return std::sin(kPi * x) * std::sin(kPi * y);
        });
        return relative_l2_error(u, exact);
    };
    const double order = std::log2(err_at(32) / err_at(64));
    CHECK(order > 1.9);
    CHECK(order < 2.1);
}

TEST_CASE("2d oscillatory coefficient solve matches frozen reference values") {
    // kappa = 2 + sin(2 pi x/eps) cos(2 pi y/eps), eps = 1/8, f = 1, n = 128;
    // references from an independent sparse direct solver.
    auto u = solve_fine_2d(problem_2d(perm_2d_fast(1.0 / 8), unit_forcing, 128));
    CHECK(u.at(64, 64) == doctest::Approx(0.038021233399).epsilon(2e-7));
    CHECK(u.at(32, 96) == doctest::Approx(0.023625923029).epsilon(2e-7));
}

TEST_CASE("2d multiple-scale coefficient solve matches frozen reference value") {
    auto u = solve_fine_2d(problem_2d(perm_2d_multiscale(kMultiEps), unit_forcing, 128));
    CHECK(u.at(64, 64) == doctest::Approx(0.080411942487).epsilon(1e-6));
}

TEST_CASE("zero forcing returns the zero field") {
    auto zero = [](double, double) { return 0.0; };
    auto u1 = solve_fine_1d(problem_1d(perm_1d_sin(0.8, 0.5, 0.1), zero, 64));
    for (double v : u1.values) CHECK(v == 0.0);
    auto u2 = solve_fine_2d(problem_2d(perm_2d_fast(0.25), zero, 32));
    for (double v : u2.values) CHECK(v == 0.0);
}

TEST_CASE("nonnegative forcing gives a nonnegative solution") {
    auto u = solve_fine_2d(problem_2d(perm_2d_fast(1.0 / 8), unit_forcing, 64));
    double min_v = 0.0, max_v = 0.0;
    for (double v : u.values) {
        min_v = std::min(min_v, v);
        max_v = std::max(max_v, v);
    }
    CHECK(min_v >= -1e-12);
    CHECK(max_v > 0.0);
}

TEST_CASE("assembled operator is symmetric") {
    auto sys = assemble_fine_2d(problem_2d(perm_2d_fast(1.0 / 8), unit_forcing, 16));
    Rng rng(20240817);
    std::vector<double> v(sys.size), w(sys.size), av(sys.size), aw(sys.size);
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    for (auto& x : w) x = rng.uniform(-1.0, 1.0);
    sys.apply(v, av);
    sys.apply(w, aw);
    double avw = 0.0, vaw = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < sys.size; ++i) {
        avw += av[i] * w[i];
        vaw += v[i] * aw[i];
        scale += std::abs(av[i] * w[i]);
    }
    CHECK(std::abs(avw - vaw) <= 1e-12 * scale);
}

TEST_CASE("solution symmetry is preserved for a symmetric problem") {
    // kappa = 1 + 0.5 cos(2 pi x) cos(2 pi y) is invariant under x -> 1-x
    // and y -> 1-y, and so is f = 1; the discrete solution must be too.
    auto kappa = [](double x, double y) {
        return 1.0 + 0.5 * std::cos(2 * kPi * x) * std::cos(2 * kPi * y);
    };
    auto u = solve_fine_2d(problem_2d(perm_2d_from_fn(kappa, 0.5), unit_forcing, 48));
    for (int ix = 0; ix <= 48; ++ix)
        for (int iy = 0; iy <= 48; ++iy) {
            CHECK(u.at(ix, iy) == doctest::Approx(u.at(48 - ix, iy)).epsilon(1e-8));
            CHECK(u.at(ix, iy) == doctest::Approx(u.at(ix, 48 - iy)).epsilon(1e-8));
        }
}

TEST_CASE("coarse solver with a constant coefficient matches the fine solver") {
    auto pc = problem_2d(perm_const(1.7, 2), unit_forcing, 16);
    auto uc = solve_coarse_2d(pc, 16);
    auto uf = solve_fine_2d(pc);
    for (std::size_t i = 0; i < uc.values.size(); ++i)
        CHECK(uc.values[i] == doctest::Approx(uf.values[i]).epsilon(1e-8));
}

TEST_CASE("coarse solver accuracy on the oscillatory problem") {
    // Coarse n=16 against a resolved n=256 reference, both interpolated to
    // the 101x101 evaluation lattice; frozen oracle value 1.155%.
    auto p = problem_2d(perm_2d_fast(1.0 / 8), unit_forcing, 256);
    auto fine = solve_fine_2d(p);
    auto coarse = solve_coarse_2d(p, 16);
    Grid ev = make_grid_2d(0.0, 1.0, 100, 0.0, 1.0, 100);
    const double err = relative_l2_error(restrict_field(coarse, ev), restrict_field(fine, ev));
    CHECK(err > 0.008);
    CHECK(err < 0.016);
}

TEST_CASE("coarse solver accuracy on the multiple-scale problem") {
    // Frozen oracle value 6.638% for coarse n=16 vs fine n=256.
    auto p = problem_2d(perm_2d_multiscale(kMultiEps), unit_forcing, 256);
    auto fine = solve_fine_2d(p);
    auto coarse = solve_coarse_2d(p, 16);
    Grid ev = make_grid_2d(0.0, 1.0, 100, 0.0, 1.0, 100);
    const double err = relative_l2_error(restrict_field(coarse, ev), restrict_field(fine, ev));
    CHECK(err > 0.04);
    CHECK(err < 0.10);
}

TEST_CASE("coarse solver refuses grids that resolve the fast scale") {
    auto p = problem_2d(perm_2d_fast(0.25), unit_forcing, 64);
    p.eps_min = 0.25;
    CHECK_THROWS_AS(solve_coarse_2d(p, 16), DomainError);
    CHECK_NOTHROW(solve_coarse_2d(p, 8));
}

TEST_CASE("solvers surface non-positive coefficient samples") {
    // The factory cannot see that this function goes negative; the solver
    // must catch it at the sampled midpoints.
    auto bad = perm_2d_from_fn([](double x, double) { return std::cos(2 * kPi * x); }, 0.5);
    CHECK_THROWS_AS(solve_fine_1d(problem_1d(bad, unit_forcing, 64)), EllipticityError);
    CHECK_THROWS_AS(solve_fine_2d(problem_2d(bad, unit_forcing, 16)), EllipticityError);
    CHECK_THROWS_AS(solve_coarse_2d(problem_2d(bad, unit_forcing, 16), 8), EllipticityError);
}

TEST_CASE("iteration cap is reported with the residual") {
    auto p = problem_2d(perm_2d_fast(1.0 / 8), unit_forcing, 64);
    try {
        solve_fine_2d(p, 1e-10, 3);
        FAIL("expected IterationLimitError");
    } catch (const IterationLimitError& e) {
        CHECK(e.final_residual > 0.0);
        CHECK(std::isfinite(e.final_residual));
    }
}

TEST_CASE("solver rejects malformed grids and tolerances") {
    auto p1 = problem_1d(perm_const(1.0), unit_forcing, 64);
    CHECK_THROWS_AS(solve_fine_2d(p1), ShapeError);
    auto p2 = problem_2d(perm_const(1.0, 2), unit_forcing, 16);
    CHECK_THROWS_AS(solve_fine_1d(p2), ShapeError);
    CHECK_THROWS_AS(solve_fine_2d(p2, -1.0), ShapeError);
    CHECK_THROWS_AS(solve_coarse_2d(p2, 1), ShapeError);
}
