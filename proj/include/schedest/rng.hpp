#pragma once

// Deterministic random number generation.
//
// The generator is SplitMix64 (Steele, Lea, Flood 2014; the java.util
// SplittableRandom mixer). Streams are derived in O(1) from a master seed:
// stream k starts from the (k+1)-th output of the SplitMix64 sequence seeded
// with the master seed. Identical (seed, stream index) pairs therefore yield
// identical draws regardless of evaluation order or worker count.

#include <cmath>
#include <cstdint>

namespace schedest {

inline constexpr std::uint64_t kSm64Gamma = 0x9E3779B97F4A7C15ULL;

inline std::uint64_t sm64_mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += kSm64Gamma;
        return sm64_mix(state_);
    }

    // Uniform on (0,1]; never 0, so log() is safe.
    double next_unit() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    // Uniform on [lo, hi).
    double next_uniform(double lo, double hi) {
        const double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
        return lo + u * (hi - lo);
    }

    // Standard normal pair via the Box-Muller transform.
    void next_normal_pair(double& z0, double& z1) {
        const double u1 = next_unit();
        const double u2 = next_unit();
        const double r = std::sqrt(-2.0 * std::log(u1));
        constexpr double two_pi = 6.283185307179586476925286766559;
        z0 = r * std::cos(two_pi * u2);
        z1 = r * std::sin(two_pi * u2);
    }

private:
    std::uint64_t state_;
};

// Seed of stream k under a master seed: the (k+1)-th output of the
// SplitMix64 sequence started at the master seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t k) {
    return sm64_mix(seed + (k + 1) * kSm64Gamma);
}

inline SplitMix64 derive_stream(std::uint64_t seed, std::uint64_t k) {
    return SplitMix64(derive_seed(seed, k));
}

}  // namespace schedest
