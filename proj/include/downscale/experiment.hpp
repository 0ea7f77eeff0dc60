#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "downscale/config.hpp"
#include "downscale/don.hpp"
#include "downscale/train.hpp"

namespace downscale {

enum class ExperimentKind { elliptic_1d, elliptic_2d_fast, elliptic_2d_multiscale };
enum class SweepKind { patch_size, n_observations, noisy_bayes };

ExperimentKind parse_experiment_kind(const std::string& name);
SweepKind parse_sweep_kind(const std::string& name);
std::string experiment_kind_name(ExperimentKind kind);
std::string sweep_kind_name(SweepKind kind);

// Full description of one experiment run: the PDE instance, the sweep to
// perform, and the training / sampling budgets. Defaults depend on the
// experiment kind; experiment_config_from applies them before overrides.
struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::elliptic_1d;
    SweepKind sweep = SweepKind::patch_size;

    double epsilon = 1.0 / 16.0;       // single-scale problems
    std::array<double, 8> epsilons{};  // multiscale problem
    double kappa_floor = 0.1;
    double forcing = 0.5;

    int fine_n = 1024;    // reference mesh cells per axis
    int test_n = 1024;    // evaluation mesh cells per axis
    int cell_n = 128;     // 2D cell-problem lattice
    int quad_n = 4096;    // 1D effective-coefficient quadrature panels
    int coarse_n = 16;    // multiscale coarse solver mesh

    std::vector<int> patch_sizes{1};  // sweep values, or [0] used for fixed p
    std::vector<int> obs_counts{16};  // total observation counts
    double patch_delta = 1.0 / 4096.0;
    double noise_sigma = 0.0;
    Activation activation = Activation::Tanh;

    int seeds = 20;
    std::uint64_t seed = 0;
    TrainConfig train;
    SgReldConfig sgreld;
    // Adam budget for the sampler's warm start; kept well short of
    // train.epochs so the chain starts before the fit commits to the noise.
    int bayes_warm_epochs = 500;
    int threads = 0;
    std::string out_dir = ".";

    void validate() const;
};

// Builds the config from flat key = value entries, filling kind-specific
// defaults first. Throws ConfigError on unknown keys or invalid values.
ExperimentConfig experiment_config_from(const Config& raw);

struct TrendRow {
    double sweep_value = 0.0;
    double mean_rel_l2 = 0.0;
    double std_rel_l2 = 0.0;
    int n_seeds = 0;
    std::string method;
};

// Aggregate errors per (method, sweep value), methods in pipeline order and
// sweep values ascending within each method.
struct TrendTable {
    std::vector<TrendRow> rows;
};

// One trained model evaluated once.
struct RunRecord {
    std::string experiment;
    std::uint64_t seed = 0;
    int patch_p = 1;
    int n_obs = 0;
    double noise_sigma = 0.0;
    std::string method;
    double rel_l2_error = 0.0;
    double wall_seconds = 0.0;
};

struct ExperimentResult {
    TrendTable trend;
    std::vector<RunRecord> runs;
};

// Reference, coarse and evaluation fields shared by every run of an
// experiment; also the backing data for the solve and dataset subcommands.
struct ProblemFields {
    GridField fine;
    GridField fine_test;
    GridField coarse;
    Grid test_grid;
    int dim = 1;
};

ProblemFields prepare_problem_fields(const ExperimentConfig& cfg);

// Runs the full sweep: reference solve, coarse solve, observation sets,
// one training per (sweep value, seed), evaluation on the test mesh, and
// aggregation. Writes trend.csv, runs.csv and trend.svg under out_dir.
// Identical configs produce byte-identical trend.csv and runs.csv apart
// from the wall_seconds column.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

void write_trend_csv(const TrendTable& table, std::ostream& out);
TrendTable read_trend_csv(std::istream& in);
void write_trend_csv_file(const TrendTable& table, const std::string& path);
TrendTable read_trend_csv_file(const std::string& path);
void write_runs_csv(const std::vector<RunRecord>& runs, std::ostream& out);

}  // namespace downscale
