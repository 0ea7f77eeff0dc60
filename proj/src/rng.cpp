#include "downscale/rng.hpp"

#include <cmath>

namespace downscale {

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) {
    std::uint64_t s = root;
    std::uint64_t a = splitmix64(s);
    s = a ^ stream;
    return splitmix64(s);
}

double Rng::uniform01() {
    // 53 high bits, shifted into (0,1]: (k+1) * 2^-53 for k in [0, 2^53).
    const std::uint64_t k = engine_() >> 11;
    return static_cast<double>(k + 1) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * (uniform01() - 0x1.0p-53);
}

double Rng::normal() {
    if (have_cached_) {
        have_cached_ = false;
        return cached_normal_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    cached_normal_ = r * std::sin(theta);
    have_cached_ = true;
    return r * std::cos(theta);
}

}  // namespace downscale
