#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace partgraph {

// Deterministic 64-bit generator: xoshiro256** (Blackman & Vigna), state
// seeded through splitmix64. Both algorithms are fully specified by their
// update rules below, so streams reproduce bit-exactly on any platform.
// std::uniform_*_distribution is implementation-defined and must not be
// used anywhere reproducibility matters; draw through this class instead.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t z = seed;
        for (auto& s : state_) {
            s = splitmix64(z);
        }
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in [0, bound), unbiased via rejection. bound must be > 0.
    std::uint64_t next_below(std::uint64_t bound) {
        // Lemire's multiply-shift with rejection of the biased range.
        std::uint64_t x = next_u64();
        __uint128_t m = static_cast<__uint128_t>(x) * bound;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < bound) {
            const std::uint64_t threshold = -bound % bound;
            while (lo < threshold) {
                x = next_u64();
                m = static_cast<__uint128_t>(x) * bound;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    // Uniform in [lo, hi).
    double next_uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    // Standard normal via Box-Muller on the 53-bit uniform.
    double next_gaussian();

    // Derives an independent stream seed from (seed, stream index); used to
    // give each object/part its own generator so parallel featurization is
    // order-independent.
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
        return split(split(seed) ^ split(stream ^ 0x6a09e667f3bcc909ULL));
    }

    static std::uint64_t split(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    static std::uint64_t splitmix64(std::uint64_t& z) {
        z += 0x9e3779b97f4a7c15ULL;
        std::uint64_t r = z;
        r = (r ^ (r >> 30)) * 0xbf58476d1ce4e5b9ULL;
        r = (r ^ (r >> 27)) * 0x94d049bb133111ebULL;
        return r ^ (r >> 31);
    }

    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> state_{};
};

inline double Rng::next_gaussian() {
    // Box-Muller; u1 is kept away from 0 so the log stays finite.
    double u1 = next_double();
    if (u1 < 0x1.0p-53) {
        u1 = 0x1.0p-53;
    }
    const double u2 = next_double();
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

} // namespace partgraph
