#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "downscale/config.hpp"
#include "downscale/don.hpp"
#include "downscale/elliptic.hpp"
#include "downscale/errors.hpp"
#include "downscale/experiment.hpp"
#include "downscale/grid.hpp"
#include "downscale/homogenize.hpp"
#include "downscale/patch.hpp"
#include "downscale/rng.hpp"
#include "downscale/svg.hpp"
#include "downscale/train.hpp"

namespace {

namespace fs = std::filesystem;
using namespace downscale;

struct CommonOpts {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<int> threads;
};

void add_common(CLI::App* sub, CommonOpts& opts) {
    sub->add_option("--config", opts.config_path, "key = value configuration file")
        ->required();
    sub->add_option("--seed", opts.seed, "override the root seed");
    sub->add_option("--out-dir", opts.out_dir, "override the output directory");
    sub->add_option("--threads", opts.threads, "worker threads (0 = automatic)");
}

ExperimentConfig load_experiment_config(const CommonOpts& opts) {
    Config raw = parse_config_file(opts.config_path);
    if (opts.seed) raw.set("seed", std::to_string(*opts.seed));
    if (opts.out_dir) raw.set("out_dir", *opts.out_dir);
    if (opts.threads) raw.set("threads", std::to_string(*opts.threads));
    return experiment_config_from(raw);
}

fs::path ensure_out_dir(const ExperimentConfig& cfg) {
    fs::create_directories(cfg.out_dir);
    return fs::path(cfg.out_dir);
}

// Observation geometry shared by the dataset, train and bayes subcommands:
// the first configured patch size and observation count.
struct SingleRunData {
    ProblemFields fields;
    ObservationSet dataset;
    PatchSpec spec;
};

SingleRunData build_single_run(const ExperimentConfig& cfg) {
    SingleRunData run;
    run.fields = prepare_problem_fields(cfg);
    const int total_obs = cfg.obs_counts.front();
    int per_axis = total_obs;
    if (run.fields.dim == 2) {
        per_axis = static_cast<int>(std::lround(std::sqrt(static_cast<double>(total_obs))));
    }
    run.spec = PatchSpec{cfg.patch_sizes.front(), cfg.patch_delta};
    const Grid obs_grid = observation_grid(run.fields.fine.grid, per_axis);
    const std::uint64_t noise_seed =
        cfg.noise_sigma > 0.0 ? derive_seed(cfg.seed, 9000) : 0;
    run.dataset = build_observation_set(run.fields.coarse, run.fields.fine, obs_grid,
                                        run.spec, cfg.noise_sigma, noise_seed);
    return run;
}

int cmd_solve(const CommonOpts& opts) {
    const ExperimentConfig cfg = load_experiment_config(opts);
    const ProblemFields fields = prepare_problem_fields(cfg);
    const fs::path dir = ensure_out_dir(cfg);
    write_field_csv_file(fields.fine, (dir / "fine.csv").string());
    write_field_csv_file(fields.coarse, (dir / "coarse.csv").string());
    std::cout << "fine: " << fields.fine.values.size() << " nodes, coarse: "
              << fields.coarse.values.size() << " nodes\n";
    std::cout << "wrote " << (dir / "fine.csv").string() << " and "
              << (dir / "coarse.csv").string() << "\n";
    return 0;
}

int cmd_cell(const CommonOpts& opts) {
    const ExperimentConfig cfg = load_experiment_config(opts);
    const fs::path dir = ensure_out_dir(cfg);
    CellSolution cell;
    EffectiveCoefficient eff;
    if (cfg.experiment == ExperimentKind::elliptic_1d) {
        const PermeabilityField unit_cell = perm_1d_sin(0.8, 0.5, 1.0);
        cell = cell_solution_1d(unit_cell, cfg.cell_n);
        eff = effective_coefficient_1d(unit_cell, cfg.quad_n);
        std::cout << "a* = " << fmt17(eff.scalar()) << "\n";
        std::cout << "eigenvalues: " << fmt17(eff.scalar()) << "\n";
    } else if (cfg.experiment == ExperimentKind::elliptic_2d_fast) {
        const PermeabilityField unit_cell = perm_2d_fast(1.0);
        cell = solve_cell_problem_2d(unit_cell, cfg.cell_n);
        eff = effective_coefficient_2d(unit_cell, cell);
        std::cout << "a* = [[" << fmt17(eff.a[0][0]) << ", " << fmt17(eff.a[0][1])
                  << "], [" << fmt17(eff.a[1][0]) << ", " << fmt17(eff.a[1][1]) << "]]\n";
        const double mid = 0.5 * (eff.a[0][0] + eff.a[1][1]);
        const double disc = std::sqrt(0.25 * (eff.a[0][0] - eff.a[1][1]) *
                                          (eff.a[0][0] - eff.a[1][1]) +
                                      eff.a[0][1] * eff.a[1][0]);
        std::cout << "eigenvalues: " << fmt17(mid - disc) << " " << fmt17(mid + disc)
                  << "\n";
    } else {
        throw ConfigError("elliptic-2d-multiscale has no periodic unit cell");
    }
    {
        std::ofstream out(dir / "cell.csv", std::ios::binary);
        if (!out) throw IoError("cannot write cell solution");
        write_cell_solution_csv(cell, out);
    }
    {
        std::ofstream out(dir / "a_star.csv", std::ios::binary);
        if (!out) throw IoError("cannot write effective coefficient");
        write_effective_csv(eff, out);
    }
    std::cout << "wrote " << (dir / "cell.csv").string() << " and "
              << (dir / "a_star.csv").string() << "\n";
    return 0;
}

int cmd_dataset(const CommonOpts& opts) {
    const ExperimentConfig cfg = load_experiment_config(opts);
    const SingleRunData run = build_single_run(cfg);
    const fs::path dir = ensure_out_dir(cfg);
    write_observation_set_csv_file(run.dataset, (dir / "observations.csv").string());
    std::cout << "wrote " << run.dataset.size() << " observations (branch dim "
              << run.dataset.branch_dim() << ") to "
              << (dir / "observations.csv").string() << "\n";
    return 0;
}

int cmd_train(const CommonOpts& opts) {
    const ExperimentConfig cfg = load_experiment_config(opts);
    const SingleRunData run = build_single_run(cfg);
    DonArchitecture arch =
        default_architecture(static_cast<int>(run.dataset.branch_dim()), run.fields.dim);
    arch.activation = cfg.activation;
    const TrainResult result = train_don(arch, run.dataset, cfg.train);
    const fs::path dir = ensure_out_dir(cfg);
    save_don((dir / "don_params.csv").string(), arch, result.params);
    {
        std::ofstream out(dir / "loss_history.csv", std::ios::binary);
        if (!out) throw IoError("cannot write loss history");
        out << "epoch,loss\n";
        for (std::size_t e = 0; e < result.loss_history.size(); ++e) {
            out << e << "," << fmt17(result.loss_history[e]) << "\n";
        }
    }
    const GridField pred = predict_field(result.params, arch, run.fields.coarse, run.spec,
                                         run.fields.test_grid);
    const EvalMetrics metrics = evaluate_run(pred, run.fields.fine_test);
    std::cout << "final loss " << fmt17(result.loss_history.back()) << "\n";
    std::cout << "relative L2 error " << fmt17(metrics.rel_l2) << "\n";
    std::cout << "wrote " << (dir / "don_params.csv").string() << "\n";
    return 0;
}

int cmd_bayes(const CommonOpts& opts) {
    const ExperimentConfig cfg = load_experiment_config(opts);
    const SingleRunData run = build_single_run(cfg);
    DonArchitecture arch =
        default_architecture(static_cast<int>(run.dataset.branch_dim()), run.fields.dim);
    arch.activation = cfg.activation;
    TrainConfig warm_cfg = cfg.train;
    warm_cfg.epochs = std::min(cfg.bayes_warm_epochs, cfg.train.epochs);
    const TrainResult warm = train_don(arch, run.dataset, warm_cfg);
    SgReldConfig sampler_cfg = cfg.sgreld;
    sampler_cfg.seed = derive_seed(cfg.seed, 8000);
    sampler_cfg.step_size =
        cfg.sgreld.step_size / static_cast<double>(run.dataset.size());
    const std::vector<DonParams> samples =
        sample_sg_reld(arch, run.dataset, sampler_cfg, warm.params);
    const EnsembleStats stats =
        ensemble_predict(samples, arch, run.fields.coarse, run.spec, run.fields.test_grid);
    const fs::path dir = ensure_out_dir(cfg);
    write_field_csv_file(stats.mean, (dir / "ensemble_mean.csv").string());
    write_field_csv_file(stats.variance, (dir / "ensemble_variance.csv").string());
    const EvalMetrics metrics = evaluate_run(stats.mean, run.fields.fine_test);
    std::cout << "ensemble members " << stats.members << "\n";
    std::cout << "ensemble mean relative L2 error " << fmt17(metrics.rel_l2) << "\n";
    std::cout << "wrote " << (dir / "ensemble_mean.csv").string() << " and "
              << (dir / "ensemble_variance.csv").string() << "\n";
    return 0;
}

int cmd_experiment(const CommonOpts& opts, bool full) {
    Config raw = parse_config_file(opts.config_path);
    if (opts.seed) raw.set("seed", std::to_string(*opts.seed));
    if (opts.out_dir) raw.set("out_dir", *opts.out_dir);
    if (opts.threads) raw.set("threads", std::to_string(*opts.threads));
    if (full) raw.set("seeds", "100");
    const ExperimentConfig cfg = experiment_config_from(raw);
    const ExperimentResult result = run_experiment(cfg);
    for (const TrendRow& row : result.trend.rows) {
        std::cout << row.method << " sweep " << fmt17(row.sweep_value) << ": "
                  << fmt17(row.mean_rel_l2) << " +- " << fmt17(row.std_rel_l2) << " (n="
                  << row.n_seeds << ")\n";
    }
    const fs::path dir(cfg.out_dir);
    std::cout << "wrote " << (dir / "trend.csv").string() << ", "
              << (dir / "runs.csv").string() << " and " << (dir / "trend.svg").string()
              << "\n";
    return 0;
}

int cmd_plot(const std::string& config_path, std::string input, std::string output) {
    if (input.empty()) {
        if (!config_path.empty()) {
            const Config raw = parse_config_file(config_path);
            input = (fs::path(raw.get_string("out_dir", ".")) / "trend.csv").string();
        } else {
            input = "trend.csv";
        }
    }
    if (output.empty()) output = (fs::path(input).replace_extension(".svg")).string();
    const TrendTable table = read_trend_csv_file(input);
    emit_plot(table, output);
    std::cout << "wrote " << output << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"learned downscaling operators for multiscale elliptic problems"};
    app.require_subcommand(1);

    CommonOpts opts;
    int rc = 0;

    CLI::App* solve = app.add_subcommand("solve", "solve the fine and coarse problems");
    add_common(solve, opts);
    solve->callback([&] { rc = cmd_solve(opts); });

    CLI::App* cell = app.add_subcommand("cell", "solve the periodic cell problem");
    add_common(cell, opts);
    cell->callback([&] { rc = cmd_cell(opts); });

    CLI::App* dataset = app.add_subcommand("dataset", "write the observation set");
    add_common(dataset, opts);
    dataset->callback([&] { rc = cmd_dataset(opts); });

    CLI::App* train = app.add_subcommand("train", "train one downscaling network");
    add_common(train, opts);
    train->callback([&] { rc = cmd_train(opts); });

    CLI::App* bayes = app.add_subcommand("bayes", "sample a posterior ensemble");
    add_common(bayes, opts);
    bayes->callback([&] { rc = cmd_bayes(opts); });

    CLI::App* experiment = app.add_subcommand("experiment", "run a full sweep");
    add_common(experiment, opts);
    bool full = false;
    experiment->add_flag("--full", full, "run 100 seeds per sweep value");
    experiment->callback([&] { rc = cmd_experiment(opts, full); });

    CLI::App* plot = app.add_subcommand("plot", "render a trend CSV as SVG");
    std::string plot_config, plot_input, plot_output;
    plot->add_option("--config", plot_config, "config whose out_dir holds trend.csv");
    plot->add_option("--input", plot_input, "trend CSV to render");
    plot->add_option("--output", plot_output, "SVG path (default: input with .svg)");
    plot->callback([&] { rc = cmd_plot(plot_config, plot_input, plot_output); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << std::flush;
        return 2;
    } catch (const downscale::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const downscale::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return rc;
}
