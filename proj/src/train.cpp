#include "downscale/train.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "downscale/errors.hpp"
#include "downscale/rng.hpp"

namespace downscale {

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0)) {
        throw ConfigError("adam betas must lie in (0,1)");
    }
    if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
}

TrainResult train_don_batch(const DonArchitecture& arch, const DonBatch& batch,
                            const TrainConfig& cfg, const std::optional<DonParams>& init) {
    cfg.validate();
    arch.validate();
    TrainResult result;
    result.params = init ? *init : init_params(arch, cfg.seed);
    const std::size_t p = arch.parameter_count();
    if (result.params.theta.size() != p) {
        throw ShapeError("starting parameters do not match the architecture");
    }
    result.loss_history.reserve(cfg.epochs);

    std::vector<double> m(p, 0.0), v(p, 0.0);
    double beta1_t = 1.0, beta2_t = 1.0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const DonGradient g = don_loss_and_grad_batch(result.params, arch, batch);
        if (!std::isfinite(g.loss)) {
            throw DivergenceError("training loss became non-finite at epoch " +
                                      std::to_string(epoch),
                                  epoch);
        }
        result.loss_history.push_back(g.loss);
        beta1_t *= cfg.adam_beta1;
        beta2_t *= cfg.adam_beta2;
        const double c1 = 1.0 - beta1_t;
        const double c2 = 1.0 - beta2_t;
        for (std::size_t i = 0; i < p; ++i) {
            m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g.grad[i];
            v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g.grad[i] * g.grad[i];
            result.params.theta[i] -=
                cfg.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.adam_eps);
        }
    }
    return result;
}

TrainResult train_don(const DonArchitecture& arch, const ObservationSet& dataset,
                      const TrainConfig& cfg, const std::optional<DonParams>& init) {
    return train_don_batch(arch, make_batch(dataset, arch), cfg, init);
}

namespace {

double prior_precision(double prior_tau) {
    if (!(prior_tau > 0.0)) throw ConfigError("prior_tau must be positive");
    return std::isinf(prior_tau) ? 0.0 : 1.0 / (prior_tau * prior_tau);
}

}  // namespace

DonGradient negative_log_posterior_grad(const DonParams& params, const DonArchitecture& arch,
                                        const DonBatch& batch, double sigma, double prior_tau) {
    if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
    const double lambda = prior_precision(prior_tau);
    DonGradient g = don_loss_and_grad_batch(params, arch, batch);
    // g.loss is the mean of r^2; the likelihood term needs the plain sum.
    const double scale = batch.count / (2.0 * sigma * sigma);
    double value = scale * g.loss;
    for (std::size_t i = 0; i < g.grad.size(); ++i) {
        const double t = params.theta[i];
        g.grad[i] = scale * g.grad[i] + lambda * t;
        value += 0.5 * lambda * t * t;
    }
    g.loss = value;
    return g;
}

double negative_log_posterior(const DonParams& params, const DonArchitecture& arch,
                              const ObservationSet& dataset, double sigma, double prior_tau) {
    return negative_log_posterior_grad(params, arch, make_batch(dataset, arch), sigma, prior_tau)
        .loss;
}

void SgReldConfig::validate() const {
    if (!(tau1 > 0.0) || !(tau2 > 0.0)) throw ConfigError("temperatures must be positive");
    if (tau1 > tau2) throw ConfigError("tau1 must not exceed tau2");
    if (step_size < 0.0) throw ConfigError("step_size must be non-negative");
    if (swap_interval < 1) throw ConfigError("swap_interval must be at least 1");
    if (swap_correction < 0.0) throw ConfigError("swap_correction must be non-negative");
    if (burn_in < 0) throw ConfigError("burn_in must be non-negative");
    if (thin < 1) throw ConfigError("thin must be at least 1");
    if (ensemble < 1) throw ConfigError("ensemble must be at least 1");
    if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
    if (!(prior_tau > 0.0)) throw ConfigError("prior_tau must be positive");
}

double swap_probability(double tau1, double tau2, double u1, double u2, double correction) {
    const double exponent = (1.0 / tau1 - 1.0 / tau2) * (u1 - u2 - correction);
    if (exponent >= 0.0) return 1.0;
    return std::exp(exponent);
}

std::vector<std::vector<double>> sample_sg_reld_potential(int dim, const Potential& potential,
                                                          const SgReldConfig& cfg,
                                                          const std::vector<double>& init) {
    cfg.validate();
    if (dim < 1) throw ShapeError("sampler dimension must be positive");
    if (static_cast<int>(init.size()) != dim) {
        throw ShapeError("starting point does not match the sampler dimension");
    }

    Rng rng(cfg.seed);
    std::vector<std::vector<double>> chains{init, init};
    const double taus[2] = {cfg.tau1, cfg.tau2};
    std::vector<double> grad(dim);
    std::vector<std::vector<double>> samples;
    samples.reserve(cfg.ensemble);

    for (long step = 1; static_cast<int>(samples.size()) < cfg.ensemble; ++step) {
        for (int c = 0; c < 2; ++c) {
            const double u = potential(chains[c], grad);
            if (!std::isfinite(u)) {
                throw DivergenceError("chain potential became non-finite at step " +
                                          std::to_string(step),
                                      step);
            }
            const double noise_scale = std::sqrt(2.0 * cfg.step_size * taus[c]);
            for (int i = 0; i < dim; ++i) {
                chains[c][i] += -cfg.step_size * grad[i] + noise_scale * rng.normal();
            }
        }
        if (step % cfg.swap_interval == 0) {
            const double u1 = potential(chains[0], grad);
            const double u2 = potential(chains[1], grad);
            if (!std::isfinite(u1) || !std::isfinite(u2)) {
                throw DivergenceError("chain potential became non-finite at step " +
                                          std::to_string(step),
                                      step);
            }
            const double p = swap_probability(cfg.tau1, cfg.tau2, u1, u2, cfg.swap_correction);
            if (rng.uniform01() <= p) std::swap(chains[0], chains[1]);
        }
        if (step > cfg.burn_in && (step - cfg.burn_in) % cfg.thin == 0) {
            samples.push_back(chains[0]);
        }
    }
    return samples;
}

std::vector<DonParams> sample_sg_reld(const DonArchitecture& arch, const ObservationSet& dataset,
                                      const SgReldConfig& cfg,
                                      const std::optional<DonParams>& init) {
    arch.validate();
    const DonBatch batch = make_batch(dataset, arch);
    DonParams start = init ? *init : init_params(arch, cfg.seed);
    if (start.theta.size() != arch.parameter_count()) {
        throw ShapeError("starting parameters do not match the architecture");
    }
    const Potential potential = [&](const std::vector<double>& theta,
                                    std::vector<double>& grad) {
        const DonGradient g = negative_log_posterior_grad(DonParams{theta}, arch, batch,
                                                          cfg.sigma, cfg.prior_tau);
        grad = g.grad;
        return g.loss;
    };
    const auto raw = sample_sg_reld_potential(static_cast<int>(start.theta.size()), potential,
                                              cfg, start.theta);
    std::vector<DonParams> samples;
    samples.reserve(raw.size());
    for (const auto& theta : raw) samples.push_back(DonParams{theta});
    return samples;
}

EnsembleStats ensemble_predict(const std::vector<DonParams>& samples, const DonArchitecture& arch,
                               const GridField& coarse, const PatchSpec& spec,
                               const Grid& eval_grid) {
    if (samples.empty()) throw ShapeError("ensemble is empty");
    EnsembleStats stats;
    stats.members = static_cast<int>(samples.size());
    stats.mean = make_field(eval_grid);
    stats.variance = make_field(eval_grid);
    // Welford accumulation per node keeps the variance non-negative.
    std::vector<double> m2(stats.mean.values.size(), 0.0);
    for (int k = 0; k < stats.members; ++k) {
        const GridField pred = predict_field(samples[k], arch, coarse, spec, eval_grid);
        for (std::size_t i = 0; i < pred.values.size(); ++i) {
            const double delta = pred.values[i] - stats.mean.values[i];
            stats.mean.values[i] += delta / (k + 1);
            m2[i] += delta * (pred.values[i] - stats.mean.values[i]);
        }
    }
    for (std::size_t i = 0; i < m2.size(); ++i) {
        stats.variance.values[i] = m2[i] / stats.members;
    }
    return stats;
}

EvalMetrics evaluate_run(const GridField& prediction, const GridField& fine_ref) {
    EvalMetrics metrics;
    metrics.rel_l2 = relative_l2_error(prediction, fine_ref);
    for (std::size_t i = 0; i < prediction.values.size(); ++i) {
        metrics.max_abs = std::max(metrics.max_abs,
                                   std::fabs(prediction.values[i] - fine_ref.values[i]));
    }
    return metrics;
}

}  // namespace downscale
