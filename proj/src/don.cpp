#include "downscale/don.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <utility>

#include "json.hpp"

#include "downscale/errors.hpp"
#include "downscale/rng.hpp"

namespace downscale {

namespace {

// Offsets of one weight layer inside the flat parameter vector.
struct LayerView {
    std::size_t w_off = 0;
    std::size_t b_off = 0;
    int in = 0;
    int out = 0;
};

struct Layout {
    std::vector<LayerView> branch;
    std::vector<LayerView> trunk;
    std::size_t bias_off = 0;
    std::size_t total = 0;
};

Layout make_layout(const DonArchitecture& arch) {
    arch.validate();
    Layout lay;
    std::size_t off = 0;
    auto add_net = [&off](const std::vector<int>& widths, std::vector<LayerView>& views) {
        for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
            LayerView v;
            v.in = widths[l];
            v.out = widths[l + 1];
            v.w_off = off;
            off += static_cast<std::size_t>(v.in) * v.out;
            v.b_off = off;
            off += v.out;
            views.push_back(v);
        }
    };
    add_net(arch.branch_layers, lay.branch);
    add_net(arch.trunk_layers, lay.trunk);
    lay.bias_off = off;
    if (arch.use_output_bias) ++off;
    lay.total = off;
    return lay;
}

double apply_activation(Activation a, double z) {
    return a == Activation::Tanh ? std::tanh(z) : (z > 0.0 ? z : 0.0);
}

// Derivative expressed through the stored post-activation value.
double activation_slope(Activation a, double value) {
    return a == Activation::Tanh ? 1.0 - value * value : (value > 0.0 ? 1.0 : 0.0);
}

// Forward through one MLP for `count` rows. Returns one matrix per level:
// acts[0] is the input, acts[l+1] the output of layer l (post-activation for
// hidden layers, raw affine output for the final one).
std::vector<std::vector<double>> mlp_forward(const double* theta,
                                             const std::vector<LayerView>& layers,
                                             Activation activation,
                                             const std::vector<double>& input, int count) {
    std::vector<std::vector<double>> acts;
    acts.reserve(layers.size() + 1);
    acts.push_back(input);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const LayerView& v = layers[l];
        const bool hidden = l + 1 < layers.size();
        const std::vector<double>& a_prev = acts.back();
        std::vector<double> z(static_cast<std::size_t>(count) * v.out);
        const double* w = theta + v.w_off;
        const double* b = theta + v.b_off;
        for (int i = 0; i < count; ++i) {
            const double* row = a_prev.data() + static_cast<std::size_t>(i) * v.in;
            double* out = z.data() + static_cast<std::size_t>(i) * v.out;
            for (int o = 0; o < v.out; ++o) {
                const double* wrow = w + static_cast<std::size_t>(o) * v.in;
                double acc = b[o];
                for (int k = 0; k < v.in; ++k) acc += wrow[k] * row[k];
                out[o] = hidden ? apply_activation(activation, acc) : acc;
            }
        }
        acts.push_back(std::move(z));
    }
    return acts;
}

// Reverse pass through one MLP. d_out is the gradient w.r.t. the final
// output matrix and is consumed; gradients accumulate into grad.
void mlp_backward(const double* theta, const std::vector<LayerView>& layers,
                  Activation activation, const std::vector<std::vector<double>>& acts,
                  std::vector<double> d_out, int count, double* grad) {
    std::vector<double> dz = std::move(d_out);
    for (std::size_t l = layers.size(); l-- > 0;) {
        const LayerView& v = layers[l];
        const bool hidden = l + 1 < layers.size();
        if (hidden) {
            const std::vector<double>& a = acts[l + 1];
            for (std::size_t i = 0; i < dz.size(); ++i) {
                dz[i] *= activation_slope(activation, a[i]);
            }
        }
        const std::vector<double>& a_prev = acts[l];
        double* dw = grad + v.w_off;
        double* db = grad + v.b_off;
        for (int i = 0; i < count; ++i) {
            const double* row = a_prev.data() + static_cast<std::size_t>(i) * v.in;
            const double* dzrow = dz.data() + static_cast<std::size_t>(i) * v.out;
            for (int o = 0; o < v.out; ++o) {
                const double d = dzrow[o];
                if (d == 0.0) continue;
                db[o] += d;
                double* dwrow = dw + static_cast<std::size_t>(o) * v.in;
                for (int k = 0; k < v.in; ++k) dwrow[k] += d * row[k];
            }
        }
        if (l == 0) break;
        const double* w = theta + v.w_off;
        std::vector<double> d_prev(static_cast<std::size_t>(count) * v.in, 0.0);
        for (int i = 0; i < count; ++i) {
            const double* dzrow = dz.data() + static_cast<std::size_t>(i) * v.out;
            double* dprow = d_prev.data() + static_cast<std::size_t>(i) * v.in;
            for (int o = 0; o < v.out; ++o) {
                const double d = dzrow[o];
                if (d == 0.0) continue;
                const double* wrow = w + static_cast<std::size_t>(o) * v.in;
                for (int k = 0; k < v.in; ++k) dprow[k] += d * wrow[k];
            }
        }
        dz = std::move(d_prev);
    }
}

void check_theta(const DonArchitecture& arch, const DonParams& params, const Layout& lay) {
    if (params.theta.size() != lay.total) {
        throw ShapeError("parameter vector has " + std::to_string(params.theta.size()) +
                         " entries, architecture needs " + std::to_string(lay.total));
    }
    (void)arch;
}

}  // namespace

Activation parse_activation(const std::string& name) {
    if (name == "tanh") return Activation::Tanh;
    if (name == "relu") return Activation::Relu;
    throw ConfigError("unknown activation '" + name + "' (expected tanh or relu)");
}

std::string activation_name(Activation a) {
    return a == Activation::Tanh ? "tanh" : "relu";
}

void DonArchitecture::validate() const {
    if (branch_layers.size() < 2 || trunk_layers.size() < 2) {
        throw ShapeError("branch and trunk need at least an input and an output width");
    }
    for (int w : branch_layers) {
        if (w < 1) throw ShapeError("branch layer widths must be positive");
    }
    for (int w : trunk_layers) {
        if (w < 1) throw ShapeError("trunk layer widths must be positive");
    }
    if (branch_layers.back() != trunk_layers.back()) {
        throw ShapeError("branch and trunk must end in the same inner-product width");
    }
}

std::size_t DonArchitecture::parameter_count() const {
    return make_layout(*this).total;
}

bool DonArchitecture::operator==(const DonArchitecture& other) const {
    return branch_layers == other.branch_layers && trunk_layers == other.trunk_layers &&
           activation == other.activation && use_output_bias == other.use_output_bias;
}

DonArchitecture default_architecture(int branch_input_dim, int spatial_dim) {
    DonArchitecture arch;
    arch.branch_layers = {branch_input_dim, 64, 64, 64};
    arch.trunk_layers = {spatial_dim, 64, 64, 64};
    arch.validate();
    return arch;
}

std::vector<double> flatten(const DonParams& params) { return params.theta; }

DonParams unflatten(const DonArchitecture& arch, std::vector<double> theta) {
    if (theta.size() != arch.parameter_count()) {
        throw ShapeError("flat vector has " + std::to_string(theta.size()) +
                         " entries, architecture needs " +
                         std::to_string(arch.parameter_count()));
    }
    return DonParams{std::move(theta)};
}

DonParams init_params(const DonArchitecture& arch, std::uint64_t seed) {
    const Layout lay = make_layout(arch);
    DonParams params;
    params.theta.assign(lay.total, 0.0);
    Rng rng(seed);
    auto fill_net = [&](const std::vector<LayerView>& layers) {
        for (const LayerView& v : layers) {
            const double bound = std::sqrt(6.0 / (v.in + v.out));
            double* w = params.theta.data() + v.w_off;
            const std::size_t n = static_cast<std::size_t>(v.in) * v.out;
            for (std::size_t i = 0; i < n; ++i) w[i] = rng.uniform(-bound, bound);
        }
    };
    fill_net(lay.branch);
    fill_net(lay.trunk);
    return params;
}

double don_forward(const DonParams& params, const DonArchitecture& arch,
                   const std::vector<double>& branch_in, const std::array<double, 2>& x) {
    if (static_cast<int>(branch_in.size()) != arch.branch_input_dim()) {
        throw ShapeError("branch input has " + std::to_string(branch_in.size()) +
                         " entries, architecture expects " +
                         std::to_string(arch.branch_input_dim()));
    }
    DonBatch batch;
    batch.count = 1;
    batch.branch = branch_in;
    batch.trunk.assign(x.begin(), x.begin() + arch.trunk_input_dim());
    return don_forward_batch(params, arch, batch)[0];
}

DonBatch make_batch(const ObservationSet& dataset, const DonArchitecture& arch) {
    arch.validate();
    if (dataset.size() == 0) throw ShapeError("observation set is empty");
    const int pb = arch.branch_input_dim();
    const int pt = arch.trunk_input_dim();
    DonBatch batch;
    batch.count = static_cast<int>(dataset.size());
    batch.branch.reserve(static_cast<std::size_t>(batch.count) * pb);
    batch.trunk.reserve(static_cast<std::size_t>(batch.count) * pt);
    batch.labels.reserve(batch.count);
    for (const ObservationTriplet& t : dataset.triplets) {
        if (static_cast<int>(t.branch_input.size()) != pb) {
            throw ShapeError("triplet branch input has " +
                             std::to_string(t.branch_input.size()) +
                             " entries, architecture expects " + std::to_string(pb));
        }
        batch.branch.insert(batch.branch.end(), t.branch_input.begin(), t.branch_input.end());
        for (int k = 0; k < pt; ++k) batch.trunk.push_back(t.x[k]);
        batch.labels.push_back(t.label);
    }
    return batch;
}

std::vector<double> don_forward_batch(const DonParams& params, const DonArchitecture& arch,
                                      const DonBatch& batch) {
    const Layout lay = make_layout(arch);
    check_theta(arch, params, lay);
    const int n = batch.count;
    if (n <= 0) throw ShapeError("batch is empty");
    if (batch.branch.size() != static_cast<std::size_t>(n) * arch.branch_input_dim() ||
        batch.trunk.size() != static_cast<std::size_t>(n) * arch.trunk_input_dim()) {
        throw ShapeError("batch matrices do not match the architecture input widths");
    }
    const double* theta = params.theta.data();
    const auto b_acts = mlp_forward(theta, lay.branch, arch.activation, batch.branch, n);
    const auto t_acts = mlp_forward(theta, lay.trunk, arch.activation, batch.trunk, n);
    const std::vector<double>& phi = b_acts.back();
    const std::vector<double>& psi = t_acts.back();
    const int kk = arch.inner_width();
    const double bias = arch.use_output_bias ? theta[lay.bias_off] : 0.0;
    std::vector<double> y(n);
    for (int i = 0; i < n; ++i) {
        const double* prow = phi.data() + static_cast<std::size_t>(i) * kk;
        const double* qrow = psi.data() + static_cast<std::size_t>(i) * kk;
        double acc = bias;
        for (int k = 0; k < kk; ++k) acc += prow[k] * qrow[k];
        y[i] = acc;
    }
    return y;
}

DonGradient don_loss_and_grad_batch(const DonParams& params, const DonArchitecture& arch,
                                    const DonBatch& batch) {
    const Layout lay = make_layout(arch);
    check_theta(arch, params, lay);
    const int n = batch.count;
    if (n <= 0) throw ShapeError("batch is empty");
    if (batch.labels.size() != static_cast<std::size_t>(n)) {
        throw ShapeError("batch has " + std::to_string(batch.labels.size()) + " labels for " +
                         std::to_string(n) + " rows");
    }
    const double* theta = params.theta.data();
    const auto b_acts = mlp_forward(theta, lay.branch, arch.activation, batch.branch, n);
    const auto t_acts = mlp_forward(theta, lay.trunk, arch.activation, batch.trunk, n);
    const std::vector<double>& phi = b_acts.back();
    const std::vector<double>& psi = t_acts.back();
    const int kk = arch.inner_width();
    const double bias = arch.use_output_bias ? theta[lay.bias_off] : 0.0;

    DonGradient result;
    result.grad.assign(lay.total, 0.0);
    std::vector<double> d_phi(static_cast<std::size_t>(n) * kk);
    std::vector<double> d_psi(static_cast<std::size_t>(n) * kk);
    double loss = 0.0;
    double d_bias = 0.0;
    for (int i = 0; i < n; ++i) {
        const double* prow = phi.data() + static_cast<std::size_t>(i) * kk;
        const double* qrow = psi.data() + static_cast<std::size_t>(i) * kk;
        double acc = bias;
        for (int k = 0; k < kk; ++k) acc += prow[k] * qrow[k];
        const double r = acc - batch.labels[i];
        loss += r * r;
        const double dy = 2.0 * r / n;
        d_bias += dy;
        double* dp = d_phi.data() + static_cast<std::size_t>(i) * kk;
        double* dq = d_psi.data() + static_cast<std::size_t>(i) * kk;
        for (int k = 0; k < kk; ++k) {
            dp[k] = dy * qrow[k];
            dq[k] = dy * prow[k];
        }
    }
    result.loss = loss / n;
    if (arch.use_output_bias) result.grad[lay.bias_off] = d_bias;
    mlp_backward(theta, lay.branch, arch.activation, b_acts, std::move(d_phi), n,
                 result.grad.data());
    mlp_backward(theta, lay.trunk, arch.activation, t_acts, std::move(d_psi), n,
                 result.grad.data());
    return result;
}

DonGradient don_loss_and_grad(const DonParams& params, const DonArchitecture& arch,
                              const ObservationSet& dataset) {
    return don_loss_and_grad_batch(params, arch, make_batch(dataset, arch));
}

GridField predict_field(const DonParams& params, const DonArchitecture& arch,
                        const GridField& coarse, const PatchSpec& spec, const Grid& eval_grid) {
    const int dim = eval_grid.dim;
    DonBatch batch;
    batch.count = static_cast<int>(eval_grid.node_count());
    batch.branch.reserve(static_cast<std::size_t>(batch.count) * arch.branch_input_dim());
    batch.trunk.reserve(static_cast<std::size_t>(batch.count) * dim);
    for (int ix = 0; ix < eval_grid.nodes(0); ++ix) {
        for (int iy = 0; iy < eval_grid.nodes(1); ++iy) {
            const std::array<double, 2> x{eval_grid.node_coord(0, ix),
                                          dim == 2 ? eval_grid.node_coord(1, iy) : 0.0};
            const std::vector<double> bin = branch_input_at(coarse, x, spec);
            batch.branch.insert(batch.branch.end(), bin.begin(), bin.end());
            for (int k = 0; k < dim; ++k) batch.trunk.push_back(x[k]);
        }
    }
    const std::vector<double> y = don_forward_batch(params, arch, batch);
    GridField out = make_field(eval_grid);
    out.values = y;
    return out;
}

void save_don(const std::string& path, const DonArchitecture& arch, const DonParams& params) {
    arch.validate();
    const Layout lay = make_layout(arch);
    check_theta(arch, params, lay);
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    for (double v : params.theta) out << fmt17(v) << "\n";
    if (!out) throw IoError("failed writing '" + path + "'");
    out.close();

    nlohmann::json meta;
    meta["branch_layers"] = arch.branch_layers;
    meta["trunk_layers"] = arch.trunk_layers;
    meta["activation"] = activation_name(arch.activation);
    meta["output_bias"] = arch.use_output_bias;
    const std::string sidecar = path + ".json";
    std::ofstream js(sidecar);
    if (!js) throw IoError("cannot open '" + sidecar + "' for writing");
    js << meta.dump(2) << "\n";
    if (!js) throw IoError("failed writing '" + sidecar + "'");
}

std::pair<DonArchitecture, DonParams> load_don(const std::string& path) {
    const std::string sidecar = path + ".json";
    std::ifstream js(sidecar);
    if (!js) throw IoError("cannot open '" + sidecar + "'");
    nlohmann::json meta;
    try {
        js >> meta;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("bad JSON in '" + sidecar + "': " + e.what());
    }
    DonArchitecture arch;
    try {
        arch.branch_layers = meta.at("branch_layers").get<std::vector<int>>();
        arch.trunk_layers = meta.at("trunk_layers").get<std::vector<int>>();
        arch.activation = parse_activation(meta.at("activation").get<std::string>());
        arch.use_output_bias = meta.at("output_bias").get<bool>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError("bad architecture sidecar '" + sidecar + "': " + e.what());
    }
    arch.validate();

    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::vector<double> theta;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::size_t pos = 0;
        double v = 0.0;
        try {
            v = std::stod(line, &pos);
        } catch (const std::exception&) {
            throw IoError("bad parameter line in '" + path + "': " + line);
        }
        if (pos != line.size()) throw IoError("trailing junk in '" + path + "': " + line);
        theta.push_back(v);
    }
    return {arch, unflatten(arch, std::move(theta))};
}

}  // namespace downscale
