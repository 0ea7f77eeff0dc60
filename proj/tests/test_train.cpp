#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "downscale/don.hpp"
#include "downscale/elliptic.hpp"
#include "downscale/errors.hpp"
#include "downscale/grid.hpp"
#include "downscale/homogenize.hpp"
#include "downscale/patch.hpp"
#include "downscale/rng.hpp"
#include "downscale/train.hpp"

using namespace downscale;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

DonParams zero_params(const DonArchitecture& arch) {
    DonParams p;
    p.theta.assign(arch.parameter_count(), 0.0);
    return p;
}

DonBatch random_batch(const DonArchitecture& arch, int n, std::uint64_t seed) {
    DonBatch b;
    b.count = n;
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < arch.branch_input_dim(); ++k) b.branch.push_back(rng.uniform(-1, 1));
        for (int k = 0; k < arch.trunk_input_dim(); ++k) b.trunk.push_back(rng.uniform(0, 1));
        b.labels.push_back(rng.uniform(-1, 1));
    }
    return b;
}

DonParams random_params(const DonArchitecture& arch, std::uint64_t seed) {
    DonParams p;
    p.theta.resize(arch.parameter_count());
    Rng rng(seed);
    for (double& v : p.theta) v = rng.uniform(-0.5, 0.5);
    return p;
}

ObservationSet zero_label_set(int branch_dim, int count) {
    ObservationSet set;
    set.dim = 1;
    set.spec = {1, 0.0};
    for (int i = 0; i < count; ++i) {
        ObservationTriplet t;
        t.branch_input.assign(branch_dim, 0.25 * (i + 1));
        t.x = {(i + 1.0) / (count + 1.0), 0.0};
        t.label = 0.0;
        t.clean_label = 0.0;
        set.triplets.push_back(t);
    }
    return set;
}

}  // namespace

TEST_CASE("adam leaves a zero-gradient problem untouched") {
    auto arch = default_architecture(3, 1);
    const auto set = zero_label_set(3, 4);
    TrainConfig cfg;
    cfg.epochs = 50;
    auto result = train_don(arch, set, cfg, zero_params(arch));
    REQUIRE(result.loss_history.size() == 50);
    for (double l : result.loss_history) CHECK(l == 0.0);
    CHECK(result.loss_history.back() <= 1e-20);
    for (double v : result.params.theta) CHECK(v == 0.0);
}

TEST_CASE("a single triplet is fit to interpolation accuracy") {
    DonArchitecture arch;
    arch.branch_layers = {1, 8, 8};
    arch.trunk_layers = {1, 8, 8};
    DonBatch batch;
    batch.count = 1;
    batch.branch = {0.3};
    batch.trunk = {0.4};
    batch.labels = {0.7};
    TrainConfig cfg;
    cfg.epochs = 4000;
    cfg.learning_rate = 1e-2;
    cfg.seed = 3;
    const auto result = train_don_batch(arch, batch, cfg);
    CHECK(don_loss_and_grad_batch(result.params, arch, batch).loss <= 1e-8);
}

TEST_CASE("training is bitwise deterministic per seed") {
    DonArchitecture arch;
    arch.branch_layers = {4, 8, 8};
    arch.trunk_layers = {2, 8, 8};
    const auto batch = random_batch(arch, 6, 51);
    TrainConfig cfg;
    cfg.epochs = 200;
    cfg.seed = 9;
    const auto a = train_don_batch(arch, batch, cfg);
    const auto b = train_don_batch(arch, batch, cfg);
    CHECK(a.loss_history == b.loss_history);
    CHECK(a.params.theta == b.params.theta);
    cfg.seed = 10;
    const auto c = train_don_batch(arch, batch, cfg);
    CHECK(a.params.theta != c.params.theta);
}

TEST_CASE("exploding training reports the failing epoch") {
    DonArchitecture arch;
    arch.branch_layers = {1, 4, 4};
    arch.trunk_layers = {1, 4, 4};
    arch.activation = Activation::Relu;
    DonParams huge;
    huge.theta.assign(arch.parameter_count(), 1e200);
    DonBatch batch;
    batch.count = 1;
    batch.branch = {1.0};
    batch.trunk = {1.0};
    batch.labels = {0.0};
    TrainConfig cfg;
    cfg.epochs = 10;
    try {
        train_don_batch(arch, batch, cfg, huge);
        FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
        CHECK(e.step == 0);
    }
}

TEST_CASE("patch-9 networks beat the homogenized baseline on most seeds") {
    const double eps = 1.0 / 16.0;
    const PermeabilityField perm = perm_1d_sin(0.8, 0.5, eps);
    EllipticProblem problem;
    problem.permeability = perm;
    problem.forcing = [](double, double) { return 0.5; };
    problem.grid = make_grid_1d(0.0, 1.0, 1024);
    const GridField fine = solve_fine_1d(problem);

    const double a_star = effective_coefficient_1d(perm, 4096).scalar();
    EllipticProblem hom = problem;
    hom.permeability = perm_const(a_star, 1);
    const GridField u0 = solve_fine_1d(hom);
    const double baseline = relative_l2_error(u0, fine);

    const Grid obs = observation_grid(problem.grid, 16);
    const PatchSpec spec{9, 1.0 / 4096.0};
    const ObservationSet set = build_observation_set(u0, fine, obs, spec, 0.0, 77);
    const auto arch = default_architecture(9, 1);

    TrainConfig cfg;
    cfg.epochs = 5000;
    cfg.learning_rate = 1e-3;
    int wins = 0;
    for (int k = 0; k < 20; ++k) {
        cfg.seed = 100 + k;
        const auto result = train_don(arch, set, cfg);
        const GridField pred = predict_field(result.params, arch, u0, spec, problem.grid);
        if (relative_l2_error(pred, fine) < baseline) ++wins;
    }
    CHECK(wins >= 16);
}

TEST_CASE("posterior value on trivial instances") {
    auto arch = default_architecture(2, 1);
    const auto zero = zero_params(arch);

    auto set = zero_label_set(2, 3);
    CHECK(negative_log_posterior(zero, arch, set, 0.005, 10.0) == 0.0);

    auto biased = zero;
    biased.theta.back() = 0.7;
    ObservationSet single = zero_label_set(2, 1);
    single.triplets[0].label = 0.25;
    const double r = 0.7 - 0.25;
    CHECK(negative_log_posterior(biased, arch, single, 1.0, kInf) ==
          doctest::Approx(r * r / 2.0).epsilon(1e-15));

    // The prior adds |theta|^2 / (2 tau^2).
    CHECK(negative_log_posterior(biased, arch, single, 1.0, 10.0) ==
          doctest::Approx(r * r / 2.0 + 0.7 * 0.7 / 200.0).epsilon(1e-12));
}

TEST_CASE("posterior gradient matches finite differences") {
    DonArchitecture arch;
    arch.branch_layers = {4, 8, 8};
    arch.trunk_layers = {2, 8, 8};
    const auto batch = random_batch(arch, 5, 61);
    auto params = random_params(arch, 62);
    const double sigma = 0.15;
    const double tau = 3.0;
    const auto g = negative_log_posterior_grad(params, arch, batch, sigma, tau);
    const double h = 1e-6;
    double worst = 0.0;
    for (std::size_t i = 0; i < params.theta.size(); ++i) {
        const double saved = params.theta[i];
        params.theta[i] = saved + h;
        const double up = negative_log_posterior_grad(params, arch, batch, sigma, tau).loss;
        params.theta[i] = saved - h;
        const double down = negative_log_posterior_grad(params, arch, batch, sigma, tau).loss;
        params.theta[i] = saved;
        const double fd = (up - down) / (2.0 * h);
        const double denom = std::max({1.0, std::fabs(fd), std::fabs(g.grad[i])});
        worst = std::max(worst, std::fabs(fd - g.grad[i]) / denom);
    }
    CHECK(worst <= 1e-5);
}

TEST_CASE("swap probability is a valid, monotone acceptance rule") {
    for (double u1 : {-3.0, 0.0, 2.5}) {
        for (double u2 : {-1.0, 0.0, 4.0}) {
            for (double f : {0.0, 0.5, 10.0}) {
                const double p = swap_probability(1e-5, 1e-2, u1, u2, f);
                CHECK(p >= 0.0);
                CHECK(p <= 1.0);
            }
        }
    }
    CHECK(swap_probability(1e-5, 1e-2, 5.0, 1.0, 0.0) == 1.0);
    CHECK(swap_probability(0.5, 0.5, -2.0, 7.0, 3.0) == 1.0);
    double prev = 2.0;
    for (double f = 0.0; f <= 20.0; f += 2.5) {
        const double p = swap_probability(1e-3, 1e-1, 0.3, 0.1, f);
        CHECK(p <= prev);
        prev = p;
    }
}

TEST_CASE("zero step size keeps every sample at the initialization") {
    DonArchitecture arch;
    arch.branch_layers = {2, 4, 4};
    arch.trunk_layers = {1, 4, 4};
    auto set = zero_label_set(2, 3);
    SgReldConfig cfg;
    cfg.step_size = 0.0;
    cfg.burn_in = 20;
    cfg.thin = 3;
    cfg.ensemble = 7;
    cfg.seed = 5;
    const auto start = init_params(arch, cfg.seed);
    const auto samples = sample_sg_reld(arch, set, cfg);
    REQUIRE(samples.size() == 7);
    for (const auto& s : samples) CHECK(s.theta == start.theta);
}

TEST_CASE("equal temperatures still produce a finite ensemble") {
    DonArchitecture arch;
    arch.branch_layers = {2, 4, 4};
    arch.trunk_layers = {1, 4, 4};
    auto set = zero_label_set(2, 3);
    SgReldConfig cfg;
    cfg.tau1 = 1e-4;
    cfg.tau2 = 1e-4;
    cfg.step_size = 1e-5;
    cfg.swap_interval = 5;
    cfg.burn_in = 30;
    cfg.thin = 2;
    cfg.ensemble = 10;
    cfg.sigma = 0.1;
    const auto samples = sample_sg_reld(arch, set, cfg);
    REQUIRE(samples.size() == 10);
    for (const auto& s : samples) {
        for (double v : s.theta) CHECK(std::isfinite(v));
    }
}

TEST_CASE("sampler variance matches the conjugate-Gaussian posterior") {
    // Linear model y = a theta + noise: the posterior over theta is Gaussian
    // with precision sum(a^2)/sigma^2 + 1/prior_tau^2.
    const std::vector<double> a{0.6, -1.1, 0.8, 1.4, -0.5};
    const std::vector<double> y{0.33, -0.61, 0.51, 0.76, -0.19};
    const double sigma = 0.25;
    const double prior_tau = 2.0;
    double a2 = 0.0, ay = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        a2 += a[i] * a[i];
        ay += a[i] * y[i];
    }
    const double precision = a2 / (sigma * sigma) + 1.0 / (prior_tau * prior_tau);
    const double post_var = 1.0 / precision;
    const double post_mean = ay / (sigma * sigma) * post_var;

    const Potential potential = [&](const std::vector<double>& x, std::vector<double>& grad) {
        double u = 0.5 * x[0] * x[0] / (prior_tau * prior_tau);
        double g = x[0] / (prior_tau * prior_tau);
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double r = a[i] * x[0] - y[i];
            u += r * r / (2.0 * sigma * sigma);
            g += r * a[i] / (sigma * sigma);
        }
        grad[0] = g;
        return u;
    };

    SgReldConfig cfg;
    cfg.tau1 = 1.0;
    cfg.tau2 = 4.0;
    cfg.step_size = 0.05 / precision;
    cfg.swap_interval = 50;
    cfg.burn_in = 500;
    cfg.thin = 40;
    cfg.ensemble = 2000;
    cfg.seed = 2024;
    const auto samples = sample_sg_reld_potential(1, potential, cfg, {post_mean});
    REQUIRE(samples.size() == 2000);
    double mean = 0.0;
    for (const auto& s : samples) mean += s[0];
    mean /= samples.size();
    double var = 0.0;
    for (const auto& s : samples) var += (s[0] - mean) * (s[0] - mean);
    var /= samples.size();
    CHECK(std::fabs(var - post_var) / post_var < 0.15);
    CHECK(std::fabs(mean - post_mean) < 5.0 * std::sqrt(post_var));
}

TEST_CASE("sampler divergence reports the step index") {
    const Potential quartic = [](const std::vector<double>& x, std::vector<double>& grad) {
        grad[0] = 4.0 * x[0] * x[0] * x[0];
        return x[0] * x[0] * x[0] * x[0];
    };
    SgReldConfig cfg;
    cfg.tau1 = 1.0;
    cfg.tau2 = 2.0;
    cfg.step_size = 10.0;
    cfg.burn_in = 0;
    cfg.thin = 1;
    cfg.ensemble = 1000;
    try {
        sample_sg_reld_potential(1, quartic, cfg, {3.0});
        FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
        CHECK(e.step >= 1);
    }
}

TEST_CASE("sampling is bitwise deterministic per seed") {
    DonArchitecture arch;
    arch.branch_layers = {2, 4, 4};
    arch.trunk_layers = {1, 4, 4};
    auto set = zero_label_set(2, 3);
    set.triplets[1].label = 0.4;
    SgReldConfig cfg;
    cfg.step_size = 1e-5;
    cfg.burn_in = 40;
    cfg.thin = 2;
    cfg.ensemble = 6;
    cfg.sigma = 0.1;
    cfg.seed = 31;
    const auto s1 = sample_sg_reld(arch, set, cfg);
    const auto s2 = sample_sg_reld(arch, set, cfg);
    REQUIRE(s1.size() == s2.size());
    for (std::size_t i = 0; i < s1.size(); ++i) CHECK(s1[i].theta == s2[i].theta);
    cfg.seed = 32;
    const auto s3 = sample_sg_reld(arch, set, cfg);
    CHECK(s1.back().theta != s3.back().theta);
}

TEST_CASE("ensemble statistics of synthetic members") {
    const Grid domain = make_grid_2d(0.0, 1.0, 8, 0.0, 1.0, 8);
    const GridField coarse = sample_field(domain, [](double x, double y) { return x - y; });
    const Grid eval = make_grid_2d(0.0, 1.0, 10, 0.0, 1.0, 10);
    const PatchSpec spec{1, 0.0};
    const auto arch1 = default_architecture(1, 2);

    auto constant_member = [&](double c) {
        DonParams p;
        p.theta.assign(arch1.parameter_count(), 0.0);
        p.theta.back() = c;
        return p;
    };

    SUBCASE("single member has zero variance") {
        const auto stats = ensemble_predict({constant_member(1.3)}, arch1, coarse, spec, eval);
        CHECK(stats.members == 1);
        for (double v : stats.mean.values) CHECK(v == 1.3);
        for (double v : stats.variance.values) CHECK(v == 0.0);
    }
    SUBCASE("identical members have zero variance") {
        const std::vector<DonParams> members(5, constant_member(-0.4));
        const auto stats = ensemble_predict(members, arch1, coarse, spec, eval);
        for (double v : stats.variance.values) CHECK(v == 0.0);
    }
    SUBCASE("two constant members give the closed-form mean and variance") {
        const double a = 0.9, b = -0.3;
        const auto stats =
            ensemble_predict({constant_member(a), constant_member(b)}, arch1, coarse, spec, eval);
        for (double v : stats.mean.values) {
            CHECK(v == doctest::Approx((a + b) / 2.0).epsilon(1e-12));
        }
        for (double v : stats.variance.values) {
            CHECK(v == doctest::Approx((a - b) * (a - b) / 4.0).epsilon(1e-12));
        }
        CHECK(stats.members == 2);
    }
    SUBCASE("variance is never negative") {
        std::vector<DonParams> members;
        for (int k = 0; k < 6; ++k) members.push_back(init_params(arch1, 400 + k));
        const auto stats = ensemble_predict(members, arch1, coarse, spec, eval);
        for (double v : stats.variance.values) CHECK(v >= 0.0);
    }
}

TEST_CASE("evaluate_run metrics") {
    const Grid g = make_grid_1d(0.0, 1.0, 4);
    GridField ref = make_field(g, 1.0);
    GridField pred = ref;
    auto m = evaluate_run(pred, ref);
    CHECK(m.rel_l2 == 0.0);
    CHECK(m.max_abs == 0.0);

    pred.values[2] = 1.5;
    m = evaluate_run(pred, ref);
    CHECK(m.max_abs == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(m.rel_l2 == doctest::Approx(0.5 / std::sqrt(5.0)).epsilon(1e-12));

    const GridField other = make_field(make_grid_1d(0.0, 1.0, 8));
    CHECK_THROWS_AS(evaluate_run(other, ref), ShapeError);
}

TEST_CASE("config validation rejects bad settings") {
    TrainConfig t;
    t.epochs = 0;
    CHECK_THROWS_AS(t.validate(), ConfigError);
    t.epochs = 10;
    t.adam_beta1 = 1.0;
    CHECK_THROWS_AS(t.validate(), ConfigError);
    t.adam_beta1 = 0.9;
    t.learning_rate = 0.0;
    CHECK_THROWS_AS(t.validate(), ConfigError);

    SgReldConfig s;
    s.tau1 = 2.0;
    s.tau2 = 1.0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s.tau1 = s.tau2 = 1.0;
    s.thin = 0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s.thin = 1;
    s.ensemble = 0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s.ensemble = 1;
    s.step_size = -1.0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
}
