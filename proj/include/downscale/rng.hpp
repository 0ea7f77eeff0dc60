#pragma once

#include <cstdint>
#include <random>

namespace downscale {

// splitmix64 step; used to turn (seed, stream index) pairs into
// well-separated engine seeds.
std::uint64_t splitmix64(std::uint64_t& state);

// Mix a root seed with a stream index into an independent seed.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream);

// Deterministic random source. The distributions are implemented by hand
// (not std::uniform_real_distribution etc., whose output is
// implementation-defined) so that identical seeds give identical streams
// on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform on (0,1]; never returns 0 so it is safe inside log().
    double uniform01();

    // Uniform on [lo, hi).
    double uniform(double lo, double hi);

    // Standard normal via Box-Muller; caches the second variate.
    double normal();

    std::uint64_t next_u64() { return engine_(); }

private:
    std::mt19937_64 engine_;
    double cached_normal_ = 0.0;
    bool have_cached_ = false;
};

}  // namespace downscale
