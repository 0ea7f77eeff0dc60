#include "downscale/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "downscale/elliptic.hpp"
#include "downscale/errors.hpp"
#include "downscale/homogenize.hpp"
#include "downscale/patch.hpp"
#include "downscale/rng.hpp"
#include "downscale/svg.hpp"
#include "downscale/threads.hpp"

namespace downscale {

namespace {

std::string fmt_value(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

template <typename F>
auto run_stage(const std::string& stage, const std::string& where, F&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        throw Error("stage '" + stage + "' failed" + where + ": " + e.what());
    }
}

int exact_square_root(int total) {
    const int r = static_cast<int>(std::lround(std::sqrt(static_cast<double>(total))));
    if (r < 1 || r * r != total) return 0;
    return r;
}

int checked_int(const std::string& key, long v) {
    if (v < -(1L << 30) || v > (1L << 30)) {
        throw ConfigError("key '" + key + "': value out of range");
    }
    return static_cast<int>(v);
}

std::vector<int> int_list(const Config& raw, const std::string& key,
                          const std::vector<int>& fallback) {
    if (!raw.has(key)) return fallback;
    std::vector<int> out;
    for (long v : raw.get_int_list(key)) out.push_back(checked_int(key, v));
    return out;
}

struct RunOutput {
    std::vector<RunRecord> records;
};

}  // namespace

ProblemFields prepare_problem_fields(const ExperimentConfig& cfg) {
    ProblemFields data;
    const auto forcing = [f = cfg.forcing](double, double) { return f; };
    if (cfg.experiment == ExperimentKind::elliptic_1d) {
        data.dim = 1;
        const Grid fine_grid = make_grid_1d(0.0, 1.0, cfg.fine_n);
        const PermeabilityField perm = perm_1d_sin(0.8, 0.5, cfg.epsilon);
        const EllipticProblem problem{perm, forcing, fine_grid, cfg.epsilon};
        data.fine = run_stage("fine solve", "", [&] { return solve_fine_1d(problem); });
        data.coarse = run_stage("coarse solve", "", [&] {
            const EffectiveCoefficient a = effective_coefficient_1d(perm, cfg.quad_n);
            return solve_homogenized(a, forcing, fine_grid);
        });
        data.test_grid = make_grid_1d(0.0, 1.0, cfg.test_n);
    } else {
        data.dim = 2;
        const Grid fine_grid = make_grid_2d(0.0, 1.0, cfg.fine_n, 0.0, 1.0, cfg.fine_n);
        PermeabilityField perm;
        double eps_min = cfg.epsilon;
        if (cfg.experiment == ExperimentKind::elliptic_2d_fast) {
            perm = perm_2d_fast(cfg.epsilon);
        } else {
            perm = perm_2d_multiscale(cfg.epsilons, cfg.kappa_floor);
            eps_min = *std::min_element(cfg.epsilons.begin(), cfg.epsilons.end());
        }
        const EllipticProblem problem{perm, forcing, fine_grid, eps_min};
        data.fine = run_stage("fine solve", "", [&] { return solve_fine_2d(problem); });
        data.coarse = run_stage("coarse solve", "", [&] {
            if (cfg.experiment == ExperimentKind::elliptic_2d_fast) {
                const PermeabilityField cell_perm = perm_2d_fast(1.0);
                const CellSolution cell = solve_cell_problem_2d(cell_perm, cfg.cell_n);
                const EffectiveCoefficient a = effective_coefficient_2d(cell_perm, cell);
                return solve_homogenized(a, forcing, fine_grid);
            }
            return solve_coarse_2d(problem, cfg.coarse_n);
        });
        data.test_grid = make_grid_2d(0.0, 1.0, cfg.test_n, 0.0, 1.0, cfg.test_n);
    }
    data.fine_test = restrict_field(data.fine, data.test_grid);
    return data;
}

ExperimentKind parse_experiment_kind(const std::string& name) {
    if (name == "elliptic-1d") return ExperimentKind::elliptic_1d;
    if (name == "elliptic-2d-fast") return ExperimentKind::elliptic_2d_fast;
    if (name == "elliptic-2d-multiscale") return ExperimentKind::elliptic_2d_multiscale;
    throw ConfigError("unknown experiment '" + name + "'");
}

SweepKind parse_sweep_kind(const std::string& name) {
    if (name == "patch-size") return SweepKind::patch_size;
    if (name == "n-observations") return SweepKind::n_observations;
    if (name == "noisy-bayes") return SweepKind::noisy_bayes;
    throw ConfigError("unknown sweep '" + name + "'");
}

std::string experiment_kind_name(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::elliptic_1d: return "elliptic-1d";
        case ExperimentKind::elliptic_2d_fast: return "elliptic-2d-fast";
        case ExperimentKind::elliptic_2d_multiscale: return "elliptic-2d-multiscale";
    }
    return "";
}

std::string sweep_kind_name(SweepKind kind) {
    switch (kind) {
        case SweepKind::patch_size: return "patch-size";
        case SweepKind::n_observations: return "n-observations";
        case SweepKind::noisy_bayes: return "noisy-bayes";
    }
    return "";
}

void ExperimentConfig::validate() const {
    const int dim = experiment == ExperimentKind::elliptic_1d ? 1 : 2;
    if (patch_sizes.empty()) throw ConfigError("patch_sizes must not be empty");
    for (int p : patch_sizes) {
        if (p < 1 || p % 2 == 0) {
            throw ConfigError("patch size " + std::to_string(p) + " is not odd and positive");
        }
    }
    if (obs_counts.empty()) throw ConfigError("obs_counts must not be empty");
    for (int count : obs_counts) {
        if (count < 1) throw ConfigError("observation count must be positive");
        if (dim == 2 && exact_square_root(count) == 0) {
            throw ConfigError("observation count " + std::to_string(count) +
                              " is not a square lattice size");
        }
    }
    const std::vector<int>& sweep_list =
        sweep == SweepKind::patch_size ? patch_sizes : obs_counts;
    const std::vector<int>& fixed_list =
        sweep == SweepKind::patch_size ? obs_counts : patch_sizes;
    if (fixed_list.size() != 1) {
        throw ConfigError("the non-swept axis must hold exactly one value");
    }
    if (std::set<int>(sweep_list.begin(), sweep_list.end()).size() != sweep_list.size()) {
        throw ConfigError("sweep values must be distinct");
    }
    if (experiment == ExperimentKind::elliptic_2d_multiscale) {
        for (double e : epsilons) {
            if (!(e > 0.0)) throw ConfigError("epsilons must be positive");
        }
        if (!(kappa_floor > 0.0)) throw ConfigError("kappa_floor must be positive");
    } else if (!(epsilon > 0.0)) {
        throw ConfigError("epsilon must be positive");
    }
    if (fine_n < 2) throw ConfigError("fine_n must be at least 2");
    if (test_n < 1) throw ConfigError("test_n must be at least 1");
    if (cell_n < 2) throw ConfigError("cell_n must be at least 2");
    if (quad_n < 1) throw ConfigError("quad_n must be at least 1");
    if (coarse_n < 2) throw ConfigError("coarse_n must be at least 2");
    if (!(patch_delta > 0.0)) throw ConfigError("patch_delta must be positive");
    if (noise_sigma < 0.0) throw ConfigError("noise_sigma must not be negative");
    if (sweep == SweepKind::noisy_bayes && !(noise_sigma > 0.0)) {
        throw ConfigError("the noisy-bayes sweep needs noise_sigma > 0");
    }
    if (seeds < 1) throw ConfigError("seeds must be at least 1");
    if (threads < 0) throw ConfigError("threads must not be negative");
    if (bayes_warm_epochs < 1) throw ConfigError("bayes_warm_epochs must be at least 1");
    train.validate();
    sgreld.validate();
}

ExperimentConfig experiment_config_from(const Config& raw) {
    ExperimentConfig cfg;
    cfg.experiment = parse_experiment_kind(raw.get_string("experiment"));
    cfg.sweep = parse_sweep_kind(raw.get_string("sweep", "patch-size"));

    switch (cfg.experiment) {
        case ExperimentKind::elliptic_1d:
            cfg.epsilon = 1.0 / 16.0;
            cfg.forcing = 0.5;
            cfg.fine_n = 1024;
            cfg.test_n = 1024;
            cfg.patch_delta = 1.0 / 4096.0;
            cfg.patch_sizes = {1, 3, 5, 7, 9};
            cfg.obs_counts = {16};
            break;
        case ExperimentKind::elliptic_2d_fast:
            cfg.epsilon = 1.0 / 8.0;
            cfg.forcing = 1.0;
            cfg.fine_n = 256;
            cfg.test_n = 100;
            cfg.patch_delta = 1.0 / 256.0;
            cfg.patch_sizes = {1, 3, 5, 7, 9};
            cfg.obs_counts = {121};
            break;
        case ExperimentKind::elliptic_2d_multiscale:
            cfg.epsilons = {1.0 / 5.0,  1.0 / 4.0, 1.0 / 25.0, 1.0 / 16.0,
                            1.0 / 16.0, 1.0 / 32.0, 1.0 / 3.0,  1.0 / 9.0};
            cfg.forcing = 1.0;
            cfg.fine_n = 256;
            cfg.test_n = 100;
            cfg.patch_delta = 1.0 / 256.0;
            cfg.patch_sizes = {1, 3, 5, 9, 15};
            cfg.obs_counts = {121};
            break;
    }
    if (cfg.sweep != SweepKind::patch_size) {
        cfg.patch_sizes = {cfg.sweep == SweepKind::noisy_bayes ? 3 : 1};
        cfg.obs_counts = {9, 25, 49};
        if (cfg.sweep == SweepKind::noisy_bayes) cfg.noise_sigma = 0.005;
    }

    cfg.epsilon = raw.get_double("epsilon", cfg.epsilon);
    const std::vector<double> eps_list = raw.get_double_list(
        "epsilons", std::vector<double>(cfg.epsilons.begin(), cfg.epsilons.end()));
    if (eps_list.size() != cfg.epsilons.size()) {
        throw ConfigError("epsilons must list exactly 8 scales");
    }
    std::copy(eps_list.begin(), eps_list.end(), cfg.epsilons.begin());
    cfg.kappa_floor = raw.get_double("kappa_floor", cfg.kappa_floor);
    cfg.forcing = raw.get_double("forcing", cfg.forcing);
    cfg.fine_n = checked_int("fine_n", raw.get_int("fine_n", cfg.fine_n));
    cfg.test_n = checked_int("test_n", raw.get_int("test_n", cfg.test_n));
    cfg.cell_n = checked_int("cell_n", raw.get_int("cell_n", cfg.cell_n));
    cfg.quad_n = checked_int("quad_n", raw.get_int("quad_n", cfg.quad_n));
    cfg.coarse_n = checked_int("coarse_n", raw.get_int("coarse_n", cfg.coarse_n));
    cfg.patch_sizes = int_list(raw, "patch_sizes", cfg.patch_sizes);
    cfg.obs_counts = int_list(raw, "obs_counts", cfg.obs_counts);
    cfg.patch_delta = raw.get_double("patch_delta", cfg.patch_delta);
    cfg.noise_sigma = raw.get_double("noise_sigma", cfg.noise_sigma);
    cfg.activation = parse_activation(raw.get_string("activation", "tanh"));
    cfg.seeds = checked_int("seeds", raw.get_int("seeds", cfg.seeds));
    cfg.seed = raw.get_seed("seed", cfg.seed);
    cfg.threads = checked_int("threads", raw.get_int("threads", cfg.threads));
    cfg.out_dir = raw.get_string("out_dir", cfg.out_dir);

    cfg.train.epochs = raw.get_int("train.epochs", cfg.train.epochs);
    cfg.train.learning_rate = raw.get_double("train.learning_rate", cfg.train.learning_rate);
    cfg.train.adam_beta1 = raw.get_double("train.adam_beta1", cfg.train.adam_beta1);
    cfg.train.adam_beta2 = raw.get_double("train.adam_beta2", cfg.train.adam_beta2);
    cfg.train.adam_eps = raw.get_double("train.adam_eps", cfg.train.adam_eps);
    cfg.train.seed = raw.get_seed("train.seed", cfg.seed);

    cfg.sgreld.tau1 = raw.get_double("sgreld.tau1", cfg.sgreld.tau1);
    cfg.sgreld.tau2 = raw.get_double("sgreld.tau2", cfg.sgreld.tau2);
    cfg.sgreld.step_size = raw.get_double("sgreld.step_size", cfg.sgreld.step_size);
    cfg.sgreld.swap_interval =
        raw.get_int("sgreld.swap_interval", cfg.sgreld.swap_interval);
    cfg.sgreld.swap_correction =
        raw.get_double("sgreld.swap_correction", cfg.sgreld.swap_correction);
    cfg.sgreld.burn_in = raw.get_int("sgreld.burn_in", cfg.sgreld.burn_in);
    cfg.sgreld.thin = raw.get_int("sgreld.thin", cfg.sgreld.thin);
    cfg.sgreld.ensemble = raw.get_int("sgreld.ensemble", cfg.sgreld.ensemble);
    cfg.sgreld.sigma = raw.get_double("sgreld.sigma", cfg.sgreld.sigma);
    cfg.sgreld.prior_tau = raw.get_double("sgreld.prior_tau", cfg.sgreld.prior_tau);
    cfg.sgreld.seed = raw.get_seed("sgreld.seed", cfg.seed);
    cfg.bayes_warm_epochs =
        checked_int("bayes_warm_epochs", raw.get_int("bayes_warm_epochs", cfg.bayes_warm_epochs));

    cfg.validate();
    const std::vector<std::string> unused = raw.unused_keys();
    if (!unused.empty()) {
        std::string joined;
        for (const std::string& key : unused) {
            if (!joined.empty()) joined += ", ";
            joined += key;
        }
        throw ConfigError("unknown config keys: " + joined);
    }
    return cfg;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const ProblemFields data = prepare_problem_fields(cfg);
    const Grid& domain = data.fine.grid;
    const std::string experiment = experiment_kind_name(cfg.experiment);
    const bool bayes = cfg.sweep == SweepKind::noisy_bayes;
    const std::string base_method = bayes ? "noisy-DON" : "DON";

    const std::vector<int>& values =
        cfg.sweep == SweepKind::patch_size ? cfg.patch_sizes : cfg.obs_counts;
    const int n_values = static_cast<int>(values.size());
    const int n_tasks = n_values * cfg.seeds;
    std::vector<RunOutput> outputs(n_tasks);

    parallel_for(n_tasks, resolve_thread_count(cfg.threads), [&](int task) {
        const int v = task / cfg.seeds;
        const int k = task % cfg.seeds;
        const std::string where = " at sweep value " + fmt_value(values[v]);

        const int p = cfg.sweep == SweepKind::patch_size ? values[v] : cfg.patch_sizes[0];
        const int total_obs = cfg.sweep == SweepKind::patch_size ? cfg.obs_counts[0] : values[v];
        const int per_axis = data.dim == 1 ? total_obs : exact_square_root(total_obs);
        const PatchSpec spec{p, cfg.patch_delta};
        const std::uint64_t noise_seed =
            cfg.noise_sigma > 0.0
                ? derive_seed(cfg.seed, 9000 + 101 * static_cast<std::uint64_t>(v) + k)
                : 0;

        const ObservationSet dataset = run_stage("dataset", where, [&] {
            const Grid obs_grid = observation_grid(domain, per_axis);
            return build_observation_set(data.coarse, data.fine, obs_grid, spec,
                                         cfg.noise_sigma, noise_seed);
        });
        DonArchitecture arch =
            default_architecture(static_cast<int>(dataset.branch_dim()), data.dim);
        arch.activation = cfg.activation;
        TrainConfig train_cfg = cfg.train;
        train_cfg.seed = cfg.train.seed + static_cast<std::uint64_t>(k);

        const auto t0 = std::chrono::steady_clock::now();
        const TrainResult trained =
            run_stage("train", where, [&] { return train_don(arch, dataset, train_cfg); });
        const double err = run_stage("evaluate", where, [&] {
            const GridField pred =
                predict_field(trained.params, arch, data.coarse, spec, data.test_grid);
            return evaluate_run(pred, data.fine_test).rel_l2;
        });
        const auto t1 = std::chrono::steady_clock::now();
        const double wall = std::chrono::duration<double>(t1 - t0).count();
        outputs[task].records.push_back({experiment, train_cfg.seed, p, total_obs,
                                         cfg.noise_sigma, base_method, err, wall});

        if (bayes) {
            SgReldConfig sampler_cfg = cfg.sgreld;
            sampler_cfg.seed =
                derive_seed(cfg.seed, 8000 + 101 * static_cast<std::uint64_t>(v) + k);
            // The data term of the potential is a sum over observations, so
            // its stiffness grows with the count; the configured step is per
            // observation and the chain runs at step_size / n_obs.
            sampler_cfg.step_size = cfg.sgreld.step_size / total_obs;
            TrainConfig warm_cfg = train_cfg;
            warm_cfg.epochs = std::min(cfg.bayes_warm_epochs, train_cfg.epochs);
            const double errB = run_stage("sample", where, [&] {
                const TrainResult warm = train_don(arch, dataset, warm_cfg);
                const std::vector<DonParams> samples =
                    sample_sg_reld(arch, dataset, sampler_cfg, warm.params);
                const EnsembleStats stats =
                    ensemble_predict(samples, arch, data.coarse, spec, data.test_grid);
                return evaluate_run(stats.mean, data.fine_test).rel_l2;
            });
            const auto t2 = std::chrono::steady_clock::now();
            const double wallB = std::chrono::duration<double>(t2 - t1).count();
            outputs[task].records.push_back({experiment, train_cfg.seed, p, total_obs,
                                             cfg.noise_sigma, "B-DON", errB, wallB});
        }
    });

    ExperimentResult result;
    for (const RunOutput& out : outputs) {
        result.runs.insert(result.runs.end(), out.records.begin(), out.records.end());
    }

    std::vector<int> order(values.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return values[a] < values[b]; });
    std::vector<std::string> methods{base_method};
    if (bayes) methods.push_back("B-DON");
    for (const std::string& method : methods) {
        for (int v : order) {
            double sum = 0.0;
            std::vector<double> errs;
            for (int k = 0; k < cfg.seeds; ++k) {
                for (const RunRecord& rec : outputs[v * cfg.seeds + k].records) {
                    if (rec.method == method) {
                        errs.push_back(rec.rel_l2_error);
                        sum += rec.rel_l2_error;
                    }
                }
            }
            const double mean = sum / static_cast<double>(errs.size());
            double sq = 0.0;
            for (double e : errs) sq += (e - mean) * (e - mean);
            const double stddev = std::sqrt(sq / static_cast<double>(errs.size()));
            result.trend.rows.push_back({static_cast<double>(values[v]), mean, stddev,
                                         static_cast<int>(errs.size()), method});
        }
    }

    std::filesystem::create_directories(cfg.out_dir);
    const std::filesystem::path dir(cfg.out_dir);
    write_trend_csv_file(result.trend, (dir / "trend.csv").string());
    {
        const std::string path = (dir / "runs.csv").string();
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot write '" + path + "'");
        write_runs_csv(result.runs, out);
    }
    emit_plot(result.trend, (dir / "trend.svg").string());
    return result;
}

void write_trend_csv(const TrendTable& table, std::ostream& out) {
    out << "sweep_value,mean_rel_l2,std_rel_l2,n_seeds,method\n";
    for (const TrendRow& row : table.rows) {
        out << fmt17(row.sweep_value) << "," << fmt17(row.mean_rel_l2) << ","
            << fmt17(row.std_rel_l2) << "," << row.n_seeds << "," << row.method << "\n";
    }
}

TrendTable read_trend_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("sweep_value,", 0) != 0) {
        throw IoError("trend CSV is missing its header");
    }
    TrendTable table;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream fields(line);
        TrendRow row;
        std::string item;
        try {
            std::getline(fields, item, ',');
            row.sweep_value = std::stod(item);
            std::getline(fields, item, ',');
            row.mean_rel_l2 = std::stod(item);
            std::getline(fields, item, ',');
            row.std_rel_l2 = std::stod(item);
            std::getline(fields, item, ',');
            row.n_seeds = std::stoi(item);
        } catch (const std::exception&) {
            throw IoError("malformed trend CSV row '" + line + "'");
        }
        if (!std::getline(fields, row.method) || row.method.empty()) {
            throw IoError("malformed trend CSV row '" + line + "'");
        }
        table.rows.push_back(row);
    }
    return table;
}

void write_trend_csv_file(const TrendTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    write_trend_csv(table, out);
    if (!out) throw IoError("failed writing '" + path + "'");
}

TrendTable read_trend_csv_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read trend CSV '" + path + "'");
    return read_trend_csv(in);
}

void write_runs_csv(const std::vector<RunRecord>& runs, std::ostream& out) {
    out << "experiment,seed,patch_p,n_obs,noise_sigma,method,rel_l2_error,wall_seconds\n";
    for (const RunRecord& rec : runs) {
        out << rec.experiment << "," << rec.seed << "," << rec.patch_p << "," << rec.n_obs
            << "," << fmt17(rec.noise_sigma) << "," << rec.method << ","
            << fmt17(rec.rel_l2_error) << "," << fmt17(rec.wall_seconds) << "\n";
    }
}

}  // namespace downscale
