#pragma once

#include <cmath>
#include <cstdint>

namespace condebate {

// splitmix64; used to expand one user seed into stream-specific seeds.
inline uint64_t splitmix64(uint64_t & state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic seed derivation for (seed, stream...) tuples, e.g. per
// (debate seed, round, agent). Order-sensitive.
inline uint64_t mix_seed(uint64_t seed, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
    uint64_t s = seed;
    uint64_t out = splitmix64(s);
    s ^= a * 0x9e3779b97f4a7c15ULL;
    out ^= splitmix64(s);
    s ^= b * 0xc2b2ae3d27d4eb4fULL;
    out ^= splitmix64(s);
    s ^= c * 0x165667b19e3779f9ULL;
    out ^= splitmix64(s);
    return out;
}

// Minimal PCG32 (XSH RR). Identical output on every platform, unlike the
// standard-library distributions.
class Pcg32 {
public:
    explicit Pcg32(uint64_t seed, uint64_t stream = 0x853c49e6748fea9bULL) {
        state_ = 0;
        inc_ = (stream << 1u) | 1u;
        next_u32();
        state_ += seed;
        next_u32();
    }

    uint32_t next_u32() {
        uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
        uint32_t rot = static_cast<uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
    }

    uint64_t next_u64() {
        return (static_cast<uint64_t>(next_u32()) << 32) | next_u32();
    }

    // Unbiased integer in [0, bound) via Lemire's method.
    uint32_t next_below(uint32_t bound) {
        uint64_t m = static_cast<uint64_t>(next_u32()) * bound;
        uint32_t low = static_cast<uint32_t>(m);
        if (low < bound) {
            uint32_t threshold = (-bound) % bound;
            while (low < threshold) {
                m = static_cast<uint64_t>(next_u32()) * bound;
                low = static_cast<uint32_t>(m);
            }
        }
        return static_cast<uint32_t>(m >> 32);
    }

    // Uniform in [0, 1) with 53 random mantissa bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    bool next_bernoulli(double p) {
        return next_double() < p;
    }

    // Box-Muller; one value per call, the pair's second half is discarded to
    // keep the draw count predictable.
    double next_normal(double mean, double stddev) {
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 0.0) {
            u1 = next_double();
        }
        double mag = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * mag * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

private:
    uint64_t state_;
    uint64_t inc_;
};

} // namespace condebate
