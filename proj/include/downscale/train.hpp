#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "downscale/don.hpp"
#include "downscale/grid.hpp"
#include "downscale/patch.hpp"

namespace downscale {

// Full-batch Adam settings. The seed drives parameter initialization when no
// explicit starting point is given.
struct TrainConfig {
    int epochs = 5000;
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;

    // Throws ConfigError unless epochs >= 1, learning_rate > 0 and both betas
    // lie in (0,1).
    void validate() const;
};

struct TrainResult {
    DonParams params;
    // loss_history[e] is the full-batch mean squared error at the start of
    // epoch e, before that epoch's update.
    std::vector<double> loss_history;
};

// Full-batch Adam minimization of the mean squared error. Deterministic per
// config; throws DivergenceError naming the epoch if the loss leaves the
// finite range.
TrainResult train_don(const DonArchitecture& arch, const ObservationSet& dataset,
                      const TrainConfig& cfg,
                      const std::optional<DonParams>& init = std::nullopt);
TrainResult train_don_batch(const DonArchitecture& arch, const DonBatch& batch,
                            const TrainConfig& cfg,
                            const std::optional<DonParams>& init = std::nullopt);

// U(theta) = sum_j r_j^2 / (2 sigma^2) + |theta|^2 / (2 prior_tau^2), the
// negative log of Gaussian likelihood times Gaussian prior, constants
// dropped. prior_tau may be +infinity to disable the prior term.
double negative_log_posterior(const DonParams& params, const DonArchitecture& arch,
                              const ObservationSet& dataset, double sigma, double prior_tau);
DonGradient negative_log_posterior_grad(const DonParams& params, const DonArchitecture& arch,
                                        const DonBatch& batch, double sigma, double prior_tau);

// Two-temperature replica-exchange Langevin sampler settings.
struct SgReldConfig {
    double tau1 = 1e-5;
    double tau2 = 1e-2;
    double step_size = 1e-4;
    int swap_interval = 50;
    double swap_correction = 0.0;
    int burn_in = 2000;
    int thin = 20;
    int ensemble = 100;
    double sigma = 0.005;
    double prior_tau = 10.0;
    std::uint64_t seed = 0;

    // Throws ConfigError unless 0 < tau1 < tau2, step_size >= 0 (zero keeps
    // the chains at the starting point), sigma > 0, prior_tau > 0,
    // swap_interval >= 1, thin >= 1, burn_in >= 0, ensemble >= 1 and the
    // correction offset is >= 0.
    void validate() const;
};

// min{1, exp((1/tau1 - 1/tau2) (u1 - u2 - correction))}.
double swap_probability(double tau1, double tau2, double u1, double u2, double correction);

// Potential callback: returns U(x) and writes dU/dx into grad (pre-sized to
// the dimension).
using Potential = std::function<double(const std::vector<double>&, std::vector<double>&)>;

// Euler-Maruyama replica exchange on an arbitrary potential: two chains at
// tau1 and tau2 step x <- x - eta dU + sqrt(2 eta tau) xi, attempting a swap
// every swap_interval steps; after burn_in the low-temperature chain is
// collected every thin-th step until `ensemble` samples exist. Deterministic
// per seed; throws DivergenceError with the step index if U turns non-finite.
std::vector<std::vector<double>> sample_sg_reld_potential(int dim, const Potential& potential,
                                                          const SgReldConfig& cfg,
                                                          const std::vector<double>& init);

// The sampler above applied to the network posterior. Both chains start from
// `init` when given, otherwise from init_params(arch, cfg.seed).
std::vector<DonParams> sample_sg_reld(const DonArchitecture& arch, const ObservationSet& dataset,
                                      const SgReldConfig& cfg,
                                      const std::optional<DonParams>& init = std::nullopt);

// Node-wise ensemble mean and population variance (divide by member count)
// of the members' predicted fields.
struct EnsembleStats {
    GridField mean;
    GridField variance;
    int members = 0;
};

EnsembleStats ensemble_predict(const std::vector<DonParams>& samples, const DonArchitecture& arch,
                               const GridField& coarse, const PatchSpec& spec,
                               const Grid& eval_grid);

struct EvalMetrics {
    double rel_l2 = 0.0;
    double max_abs = 0.0;
};

// Relative L2 and max-abs error of a prediction against a congruent
// reference field.
EvalMetrics evaluate_run(const GridField& prediction, const GridField& fine_ref);

}  // namespace downscale
