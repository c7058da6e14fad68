// krrlab: numerical laboratory for kernel ridge regression on singular
// data densities.
// SPDX-License-Identifier: MIT
#pragma once

#include <cmath>
#include <cstdint>

namespace krrlab {

/// splitmix64 mixing step. Used for seed derivation; the generator below is
/// seeded through it so that nearby seeds give unrelated streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Deterministic, platform-independent random generator (xoshiro256++).
///
/// The standard library distributions are implementation-defined, which
/// would break the byte-identical-output contract of the experiment
/// drivers, so uniforms and normals are generated here explicitly.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : s_) word = splitmix64(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [a, b).
    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    /// Standard normal via Box-Muller (deterministic; caches the spare).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();  // log(0) guard
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t s_[4]{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Derive the seed of an independent task stream from the global seed and a
/// task coordinate (sample-size index, ridge index, replicate index). Every
/// parallel worker builds its own Rng from this, so results do not depend on
/// scheduling order or worker count.
inline std::uint64_t derive_stream(std::uint64_t global_seed,
                                   std::uint64_t p_index,
                                   std::uint64_t lambda_index,
                                   std::uint64_t replicate_index) {
    std::uint64_t s = global_seed;
    std::uint64_t h = splitmix64(s);
    s = h ^ (0x9e3779b97f4a7c15ULL * (p_index + 1));
    h = splitmix64(s);
    s = h ^ (0xc2b2ae3d27d4eb4fULL * (lambda_index + 1));
    h = splitmix64(s);
    s = h ^ (0x165667b19e3779f9ULL * (replicate_index + 1));
    return splitmix64(s);
}

}  // namespace krrlab
