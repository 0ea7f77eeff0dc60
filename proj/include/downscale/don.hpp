#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "downscale/grid.hpp"
#include "downscale/patch.hpp"

namespace downscale {

enum class Activation { Tanh, Relu };

Activation parse_activation(const std::string& name);
std::string activation_name(Activation a);

// Unstacked operator network: a branch MLP over sampled coarse values and a
// trunk MLP over the query point, combined by an inner product of width K
// plus an optional scalar output bias. Layer lists include the input width,
// so {4, 8, 8} means one hidden layer of width 8 and K = 8. Hidden layers
// use `activation`; the final layer of each net is linear.
struct DonArchitecture {
    std::vector<int> branch_layers;
    std::vector<int> trunk_layers;
    Activation activation = Activation::Tanh;
    bool use_output_bias = true;

    int branch_input_dim() const { return branch_layers.front(); }
    int trunk_input_dim() const { return trunk_layers.front(); }
    int inner_width() const { return branch_layers.back(); }

    // Throws ShapeError unless both lists have >= 2 positive widths and end
    // in the same K.
    void validate() const;

    // Total number of trainable scalars.
    std::size_t parameter_count() const;

    bool operator==(const DonArchitecture& other) const;
};

// Default experiment network for a given branch input width and spatial
// dimension: branch {p^d, 64, 64, 64}, trunk {d, 64, 64, 64}.
DonArchitecture default_architecture(int branch_input_dim, int spatial_dim);

// All trainable parameters in one flat vector. Layout, in order: for each
// branch layer l, the weight matrix W_l row-major (out x in, rows are output
// units) followed by the bias vector b_l; then the trunk layers in the same
// form; then output_bias if the architecture uses one.
struct DonParams {
    std::vector<double> theta;

    std::size_t size() const { return theta.size(); }
};

struct DonGradient {
    double loss = 0.0;
    std::vector<double> grad;
};

// Copy out / validate-and-adopt the flat parameter vector. unflatten throws
// ShapeError if the length does not match arch.parameter_count().
std::vector<double> flatten(const DonParams& params);
DonParams unflatten(const DonArchitecture& arch, std::vector<double> theta);

// Glorot-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases and
// output bias. Weights are drawn in flat-layout order, so the stream is part
// of the format. Deterministic per seed.
DonParams init_params(const DonArchitecture& arch, std::uint64_t seed);

// Single-point forward pass: <branch(branch_in), trunk(x)> + output_bias.
// Only the first trunk_input_dim entries of x are read.
double don_forward(const DonParams& params, const DonArchitecture& arch,
                   const std::vector<double>& branch_in, const std::array<double, 2>& x);

// Dataset flattened to row-major matrices for batched evaluation.
struct DonBatch {
    int count = 0;
    std::vector<double> branch;  // count x branch_input_dim
    std::vector<double> trunk;   // count x trunk_input_dim
    std::vector<double> labels;  // count
};

DonBatch make_batch(const ObservationSet& dataset, const DonArchitecture& arch);

// Forward over every row of a batch; labels may be empty.
std::vector<double> don_forward_batch(const DonParams& params, const DonArchitecture& arch,
                                      const DonBatch& batch);

// Mean squared error over the batch and its exact reverse-mode gradient.
DonGradient don_loss_and_grad_batch(const DonParams& params, const DonArchitecture& arch,
                                    const DonBatch& batch);

DonGradient don_loss_and_grad(const DonParams& params, const DonArchitecture& arch,
                              const ObservationSet& dataset);

// Evaluate the network at every node of eval_grid, assembling each branch
// input from `coarse` with the same patch geometry used for training data.
GridField predict_field(const DonParams& params, const DonArchitecture& arch,
                        const GridField& coarse, const PatchSpec& spec, const Grid& eval_grid);

// Parameters as one value per line (%.17g); the architecture goes to a JSON
// sidecar at path + ".json". Round-trip is bitwise.
void save_don(const std::string& path, const DonArchitecture& arch, const DonParams& params);
std::pair<DonArchitecture, DonParams> load_don(const std::string& path);

}  // namespace downscale
