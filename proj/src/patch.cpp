#include "downscale/patch.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "downscale/errors.hpp"
#include "downscale/rng.hpp"

namespace downscale {

namespace {

void check_spec(const PatchSpec& spec) {
    if (spec.p < 1 || spec.p % 2 == 0)
        throw ShapeError("patch size must be odd and positive, got " + std::to_string(spec.p));
    if (spec.p > 1 && !(spec.delta > 0.0))
        throw ShapeError("patch spacing must be positive");
}

std::size_t pow_dim(int p, int dim) {
    std::size_t out = 1;
    for (int i = 0; i < dim; ++i) out *= static_cast<std::size_t>(p);
    return out;
}

}  // namespace

std::size_t ObservationSet::branch_dim() const {
    return pow_dim(spec.p, dim);
}

std::vector<std::array<double, 2>> patch_points(const std::array<double, 2>& x,
                                                const PatchSpec& spec, const Grid& domain) {
    check_spec(spec);
    const int half = (spec.p - 1) / 2;
    auto clamp_axis = [&](double v, int axis) {
        return std::min(std::max(v, domain.lo[static_cast<std::size_t>(axis)]),
                        domain.hi[static_cast<std::size_t>(axis)]);
    };
    std::vector<std::array<double, 2>> pts;
    pts.reserve(pow_dim(spec.p, domain.dim));
    if (domain.dim == 1) {
        for (int k = -half; k <= half; ++k)
            pts.push_back({k == 0 ? x[0] : clamp_axis(x[0] + k * spec.delta, 0), 0.0});
        return pts;
    }
    for (int k1 = -half; k1 <= half; ++k1)
        for (int k2 = -half; k2 <= half; ++k2)
            pts.push_back({k1 == 0 ? x[0] : clamp_axis(x[0] + k1 * spec.delta, 0),
                           k2 == 0 ? x[1] : clamp_axis(x[1] + k2 * spec.delta, 1)});
    return pts;
}

std::vector<double> branch_input_at(const GridField& coarse, const std::array<double, 2>& x,
                                    const PatchSpec& spec) {
    auto pts = patch_points(x, spec, coarse.grid);
    std::vector<double> values;
    values.reserve(pts.size());
    for (const auto& q : pts) values.push_back(interpolate(coarse, q));
    return values;
}

Grid observation_grid(const Grid& domain, int count_per_axis) {
    if (count_per_axis < 1) throw ShapeError("observation count must be at least 1");
    const int c = count_per_axis;
    auto lo = [&](int ax) {
        return domain.lo[static_cast<std::size_t>(ax)] +
               (domain.hi[static_cast<std::size_t>(ax)] - domain.lo[static_cast<std::size_t>(ax)]) / (c + 1);
    };
    auto hi = [&](int ax) {
        return domain.hi[static_cast<std::size_t>(ax)] -
               (domain.hi[static_cast<std::size_t>(ax)] - domain.lo[static_cast<std::size_t>(ax)]) / (c + 1);
    };
    if (domain.dim == 1) return make_grid_1d(lo(0), c == 1 ? lo(0) : hi(0), c - 1);
    return make_grid_2d(lo(0), c == 1 ? lo(0) : hi(0), c - 1,
                        lo(1), c == 1 ? lo(1) : hi(1), c - 1);
}

ObservationSet build_observation_set(const GridField& coarse, const GridField& fine_ref,
                                     const Grid& obs_grid, const PatchSpec& spec,
                                     double noise_sigma, std::uint64_t seed) {
    check_spec(spec);
    if (noise_sigma < 0.0) throw ShapeError("noise level must be nonnegative");
    if (obs_grid.dim != coarse.grid.dim || obs_grid.dim != fine_ref.grid.dim)
        throw ShapeError("observation grid dimension disagrees with the fields");

    ObservationSet set;
    set.spec = spec;
    set.dim = obs_grid.dim;
    set.noise_sigma = noise_sigma;
    set.rng_seed = seed;
    Rng rng(seed);
    for (int ix = 0; ix < obs_grid.nodes(0); ++ix)
        for (int iy = 0; iy < (obs_grid.dim == 2 ? obs_grid.nodes(1) : 1); ++iy) {
            ObservationTriplet t;
            t.x = {obs_grid.node_coord(0, ix),
                   obs_grid.dim == 2 ? obs_grid.node_coord(1, iy) : 0.0};
            t.branch_input = branch_input_at(coarse, t.x, spec);
            t.clean_label = interpolate(fine_ref, t.x);
            t.label = noise_sigma > 0.0 ? t.clean_label + noise_sigma * rng.normal()
                                        : t.clean_label;
            set.triplets.push_back(std::move(t));
        }
    return set;
}

void write_observation_set_csv(const ObservationSet& set, std::ostream& out) {
    out << "# observations: dim=" << set.dim << ",p=" << set.spec.p
        << ",delta=" << fmt17(set.spec.delta) << ",sigma=" << fmt17(set.noise_sigma)
        << ",seed=" << set.rng_seed << ",count=" << set.triplets.size() << "\n";
    for (const auto& t : set.triplets) {
        for (int j = 0; j < set.dim; ++j)
            out << (j ? "," : "") << fmt17(t.x[static_cast<std::size_t>(j)]);
        for (double v : t.branch_input) out << "," << fmt17(v);
        out << "," << fmt17(t.label) << "," << fmt17(t.clean_label) << "\n";
    }
}

ObservationSet read_observation_set_csv(std::istream& in) {
    std::string header;
    if (!std::getline(in, header) || header.rfind("# observations: ", 0) != 0)
        throw IoError("missing observation-set header");
    ObservationSet set;
    std::size_t count = 0;
    {
        std::istringstream fields(header.substr(16));
        std::string item;
        while (std::getline(fields, item, ',')) {
            const auto eq = item.find('=');
            if (eq == std::string::npos) throw IoError("malformed observation-set header");
            const std::string key = item.substr(0, eq), val = item.substr(eq + 1);
            if (key == "dim") set.dim = std::stoi(val);
            else if (key == "p") set.spec.p = std::stoi(val);
            else if (key == "delta") set.spec.delta = std::stod(val);
            else if (key == "sigma") set.noise_sigma = std::stod(val);
            else if (key == "seed") set.rng_seed = std::stoull(val);
            else if (key == "count") count = std::stoull(val);
            else throw IoError("unknown observation-set header key: " + key);
        }
    }
    if (set.dim < 1 || set.dim > 2) throw IoError("unsupported observation dimension");
    const std::size_t width = set.branch_dim() + static_cast<std::size_t>(set.dim) + 2;
    for (std::size_t r = 0; r < count; ++r) {
        std::string line;
        if (!std::getline(in, line)) throw IoError("truncated observation set");
        std::istringstream row(line);
        std::string item;
        std::vector<double> vals;
        while (std::getline(row, item, ',')) vals.push_back(std::stod(item));
        if (vals.size() != width)
            throw IoError("observation row has " + std::to_string(vals.size()) +
                          " fields, expected " + std::to_string(width));
        ObservationTriplet t;
        t.x = {vals[0], set.dim == 2 ? vals[1] : 0.0};
        t.branch_input.assign(vals.begin() + set.dim, vals.end() - 2);
        t.label = vals[vals.size() - 2];
        t.clean_label = vals.back();
        set.triplets.push_back(std::move(t));
    }
    return set;
}

void write_observation_set_csv_file(const ObservationSet& set, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    write_observation_set_csv(set, out);
}

ObservationSet read_observation_set_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return read_observation_set_csv(in);
}

}  // namespace downscale
