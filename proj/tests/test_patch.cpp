#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>
#include <sstream>

#include "downscale/errors.hpp"
#include "downscale/grid.hpp"
#include "downscale/patch.hpp"

using namespace downscale;

namespace {

Grid unit_square() { return make_grid_2d(0.0, 1.0, 16, 0.0, 1.0, 16); }
Grid unit_line() { return make_grid_1d(0.0, 1.0, 16); }

}  // namespace

TEST_CASE("singleton patch is the observation point") {
    auto pts = patch_points({0.37, 0.58}, {1, 0.0}, unit_square());
    REQUIRE(pts.size() == 1);
    CHECK(pts[0][0] == 0.37);
    CHECK(pts[0][1] == 0.58);
}

TEST_CASE("1d patch of three around the midpoint") {
    auto pts = patch_points({0.5, 0.0}, {3, 0.01}, unit_line());
    REQUIRE(pts.size() == 3);
    CHECK(pts[0][0] == doctest::Approx(0.49).epsilon(1e-15));
    CHECK(pts[1][0] == 0.5);
    CHECK(pts[2][0] == doctest::Approx(0.51).epsilon(1e-15));
}

TEST_CASE("corner patch clamps to the boundary") {
    auto pts = patch_points({0.0, 0.0}, {3, 0.1}, unit_square());
    REQUIRE(pts.size() == 9);
    std::set<std::pair<double, double>> distinct;
    for (const auto& q : pts) {
        CHECK(q[0] >= 0.0);
        CHECK(q[1] >= 0.0);
        distinct.insert({q[0], q[1]});
    }
    CHECK(distinct.size() == 4);
}

TEST_CASE("patch ordering is lexicographic with the first axis outermost") {
    const std::array<double, 2> x{0.5, 0.5};
    const double d = 0.01;
    auto pts = patch_points(x, {3, d}, unit_square());
    for (int k1 = -1; k1 <= 1; ++k1)
        for (int k2 = -1; k2 <= 1; ++k2) {
            const auto& q = pts[static_cast<std::size_t>((k1 + 1) * 3 + (k2 + 1))];
            CHECK(q[0] == doctest::Approx(x[0] + k1 * d).epsilon(1e-15));
            CHECK(q[1] == doctest::Approx(x[1] + k2 * d).epsilon(1e-15));
        }
    CHECK(pts[4][0] == x[0]);
    CHECK(pts[4][1] == x[1]);
}

TEST_CASE("unclamped patch is symmetric about its center") {
    auto pts = patch_points({0.5, 0.4}, {5, 0.02}, unit_square());
    const std::size_t n = pts.size();
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(pts[i][0] + pts[n - 1 - i][0] == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(pts[i][1] + pts[n - 1 - i][1] == doctest::Approx(0.8).epsilon(1e-15));
    }
}

TEST_CASE("patch spec validation") {
    CHECK_THROWS_AS(patch_points({0.5, 0.5}, {2, 0.1}, unit_square()), ShapeError);
    CHECK_THROWS_AS(patch_points({0.5, 0.5}, {-3, 0.1}, unit_square()), ShapeError);
    CHECK_THROWS_AS(patch_points({0.5, 0.5}, {3, 0.0}, unit_square()), ShapeError);
    CHECK_NOTHROW(patch_points({0.5, 0.5}, {1, 0.0}, unit_square()));
}

TEST_CASE("observation lattices are interior-uniform") {
    auto g3 = observation_grid(unit_square(), 3);
    CHECK(g3.node_count() == 9);
    for (int k = 0; k < 3; ++k) {
        CHECK(g3.node_coord(0, k) == doctest::Approx(0.25 * (k + 1)).epsilon(1e-15));
        CHECK(g3.node_coord(1, k) == doctest::Approx(0.25 * (k + 1)).epsilon(1e-15));
    }
    auto g7 = observation_grid(unit_square(), 7);
    CHECK(g7.node_count() == 49);
    CHECK(g7.node_coord(0, 0) == doctest::Approx(0.125).epsilon(1e-15));
    CHECK(g7.node_coord(0, 6) == doctest::Approx(0.875).epsilon(1e-15));

    auto g1 = observation_grid(unit_square(), 1);
    CHECK(g1.node_count() == 1);
    CHECK(g1.node_coord(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(g1.node_coord(1, 0) == doctest::Approx(0.5).epsilon(1e-15));

    auto g16 = observation_grid(unit_line(), 16);
    CHECK(g16.node_count() == 16);
    for (int j = 1; j <= 16; ++j)
        CHECK(g16.node_coord(0, j - 1) == doctest::Approx(j / 17.0).epsilon(1e-14));

    CHECK_THROWS_AS(observation_grid(unit_line(), 0), ShapeError);
}

TEST_CASE("noiseless sets carry the clean labels") {
    auto coarse = sample_field(make_grid_1d(0.0, 1.0, 64),
                               [](double x, double) { return x * (1 - x); });
    auto set = build_observation_set(coarse, coarse, observation_grid(coarse.grid, 16),
                                     {3, 1.0 / 256}, 0.0, 42);
    REQUIRE(set.size() == 16);
    for (const auto& t : set.triplets) {
        CHECK(t.label == t.clean_label);
        // identical coarse and fine fields: the branch center equals the label
        CHECK(t.branch_input[1] == t.label);
    }
}

TEST_CASE("dataset shapes follow the patch spec") {
    auto coarse = sample_field(make_grid_1d(0.0, 1.0, 1024),
                               [](double x, double) { return x * x; });
    auto set = build_observation_set(coarse, coarse, observation_grid(coarse.grid, 16),
                                     {9, 1.0 / 1024}, 0.0, 7);
    CHECK(set.size() == 16);
    CHECK(set.branch_dim() == 9);
    std::set<double> xs;
    for (const auto& t : set.triplets) {
        CHECK(t.branch_input.size() == 9);
        xs.insert(t.x[0]);
    }
    CHECK(xs.size() == 16);

    auto c2 = sample_field(unit_square(), [](double x, double y) { return x + y; });
    auto set2 = build_observation_set(c2, c2, observation_grid(c2.grid, 5), {3, 0.01}, 0.0, 7);
    CHECK(set2.size() == 25);
    CHECK(set2.branch_dim() == 9);
}

TEST_CASE("noise injection is deterministic per seed") {
    auto coarse = sample_field(make_grid_1d(0.0, 1.0, 64),
                               [](double x, double) { return x; });
    auto obs = observation_grid(coarse.grid, 8);
    auto a = build_observation_set(coarse, coarse, obs, {1, 0.0}, 0.005, 99);
    auto b = build_observation_set(coarse, coarse, obs, {1, 0.0}, 0.005, 99);
    auto c = build_observation_set(coarse, coarse, obs, {1, 0.0}, 0.005, 100);
    bool all_equal = true, any_differs = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        all_equal = all_equal && a.triplets[i].label == b.triplets[i].label;
        any_differs = any_differs || a.triplets[i].label != c.triplets[i].label;
        CHECK(a.triplets[i].label != a.triplets[i].clean_label);
    }
    CHECK(all_equal);
    CHECK(any_differs);
}

TEST_CASE("injected noise has the requested statistics") {
    const int n = 10000;
    auto zero = make_field(make_grid_1d(0.0, 1.0, 4));
    auto obs = observation_grid(zero.grid, n);
    const double sigma = 0.005;
    auto set = build_observation_set(zero, zero, obs, {1, 0.0}, sigma, 2024);
    double sum = 0.0, sq = 0.0;
    for (const auto& t : set.triplets) {
        sum += t.label;
        sq += t.label * t.label;
    }
    const double mean = sum / n;
    const double sd = std::sqrt((sq - n * mean * mean) / (n - 1));
    CHECK(std::abs(mean) <= 4.0 * sigma / std::sqrt(static_cast<double>(n)));
    CHECK(sd == doctest::Approx(sigma).epsilon(0.05));
}

TEST_CASE("observation nodes outside a field are rejected") {
    auto coarse = sample_field(make_grid_1d(0.0, 1.0, 64),
                               [](double x, double) { return x; });
    auto narrow = sample_field(make_grid_1d(0.25, 0.75, 64),
                               [](double x, double) { return x; });
    auto obs = observation_grid(coarse.grid, 8);
    CHECK_THROWS_AS(build_observation_set(coarse, narrow, obs, {1, 0.0}, 0.0, 1),
                    DomainError);
}

TEST_CASE("observation sets round-trip through csv") {
    auto coarse = sample_field(unit_square(), [](double x, double y) { return x * y + 0.3; });
    auto fine = sample_field(unit_square(), [](double x, double y) { return x - y; });
    auto set = build_observation_set(coarse, fine, observation_grid(coarse.grid, 3),
                                     {3, 0.017}, 0.005, 31337);
    std::stringstream buf;
    write_observation_set_csv(set, buf);
    auto back = read_observation_set_csv(buf);
    CHECK(back.dim == set.dim);
    CHECK(back.spec.p == set.spec.p);
    CHECK(back.spec.delta == set.spec.delta);
    CHECK(back.noise_sigma == set.noise_sigma);
    CHECK(back.rng_seed == set.rng_seed);
    REQUIRE(back.size() == set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
        CHECK(back.triplets[i].x[0] == set.triplets[i].x[0]);
        CHECK(back.triplets[i].x[1] == set.triplets[i].x[1]);
        CHECK(back.triplets[i].label == set.triplets[i].label);
        CHECK(back.triplets[i].clean_label == set.triplets[i].clean_label);
        REQUIRE(back.triplets[i].branch_input.size() == set.triplets[i].branch_input.size());
        for (std::size_t j = 0; j < set.triplets[i].branch_input.size(); ++j)
            CHECK(back.triplets[i].branch_input[j] == set.triplets[i].branch_input[j]);
    }

    std::stringstream empty;
    CHECK_THROWS_AS(read_observation_set_csv(empty), IoError);
    std::stringstream truncated("# observations: dim=1,p=1,delta=0,sigma=0,seed=1,count=3\n0.5,1,1\n");
    CHECK_THROWS_AS(read_observation_set_csv(truncated), IoError);
}
