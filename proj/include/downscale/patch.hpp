#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "downscale/grid.hpp"

namespace downscale {

// Sampling lattice around an observation point. p = 1 is the vanilla
// no-patch algorithm; points falling outside the domain are clamped
// componentwise to the boundary.
struct PatchSpec {
    int p = 1;
    double delta = 0.0;
};

struct ObservationTriplet {
    std::vector<double> branch_input;
    std::array<double, 2> x{0.0, 0.0};
    double label = 0.0;
    double clean_label = 0.0;
};

struct ObservationSet {
    std::vector<ObservationTriplet> triplets;
    PatchSpec spec;
    int dim = 1;
    double noise_sigma = 0.0;
    std::uint64_t rng_seed = 0;

    std::size_t size() const { return triplets.size(); }
    std::size_t branch_dim() const;
};

// The p^d lattice x + delta*(k_1,..,k_d), k in {-(p-1)/2,..,(p-1)/2}, in
// lexicographic k order (k_1 outer), clamped to the domain box. The center
// entry is x exactly.
std::vector<std::array<double, 2>> patch_points(const std::array<double, 2>& x,
                                                const PatchSpec& spec, const Grid& domain);

// Coarse-solution values over the patch, in patch_points order.
std::vector<double> branch_input_at(const GridField& coarse, const std::array<double, 2>& x,
                                    const PatchSpec& spec);

// Interior-uniform observation lattice: nodes at lo + j*(hi-lo)/(count+1),
// j = 1..count per axis. count = 1 degenerates to the domain center.
Grid observation_grid(const Grid& domain, int count_per_axis);

// One triplet per observation node: branch input sampled from `coarse`
// over the patch, clean label from `fine_ref`, label = clean + sigma*z
// with z standard normal drawn deterministically from `seed`.
ObservationSet build_observation_set(const GridField& coarse, const GridField& fine_ref,
                                     const Grid& obs_grid, const PatchSpec& spec,
                                     double noise_sigma, std::uint64_t seed);

// CSV: header line recording dim, p, delta, sigma, seed, then one row per
// triplet holding x coordinates, p^d branch values, label, clean_label.
void write_observation_set_csv(const ObservationSet& set, std::ostream& out);
ObservationSet read_observation_set_csv(std::istream& in);
void write_observation_set_csv_file(const ObservationSet& set, const std::string& path);
ObservationSet read_observation_set_csv_file(const std::string& path);

}  // namespace downscale
