#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace stoptree {

/// splitmix64 — used to expand (seed, path index) into engine state.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d4a2ca9f6dd80bULL;
    return z ^ (z >> 31);
}

/// xoshiro256** — small, fast uniform bit generator for the Monte Carlo lab.
class Xoshiro256 {
public:
    using result_type = uint64_t;

    explicit Xoshiro256(uint64_t seed = 1) {
        uint64_t sm = seed;
        for (auto& word : s_) word = splitmix64(sm);
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~uint64_t{0}; }

    result_type operator()() {
        const uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform double in (0,1).
    double uniform() {
        // 53 random bits; offset by half an ulp so 0 is never returned.
        return (double((*this)() >> 11) + 0.5) * 0x1.0p-53;
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t s_[4];
};

/// Standard normals by Box-Muller on top of Xoshiro256, caching the second
/// draw of each pair.
class NormalSampler {
public:
    explicit NormalSampler(uint64_t seed = 1) : rng_(seed) {}

    double operator()() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = rng_.uniform();
        const double u2 = rng_.uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 6.283185307179586476925286766559 * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    double uniform() { return rng_.uniform(); }
    Xoshiro256& engine() { return rng_; }

private:
    Xoshiro256 rng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

/// Counter-style stream derivation: path i always sees the same stream for a
/// given seed, independent of how many paths are requested.
inline uint64_t path_stream_seed(uint64_t seed, uint64_t path_index) {
    uint64_t state = seed ^ (0x85ebca6b'c2b2ae35ULL + path_index * 0x9e3779b9'7f4a7c15ULL);
    return splitmix64(state);
}

}  // namespace stoptree
