#pragma once

#include <cstdint>
#include <random>

#include "puftrial/normal.hpp"

namespace puftrial {

// Deterministic random stream. The engine (mt19937_64) has standard-specified
// output, and gaussians are drawn by inverse transform through the project's
// own quantile, so sequences are reproducible across platforms and toolchains.
class Rng {
public:
    explicit Rng(uint64_t seed) : seed_(seed), eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // Uniform on the open interval (0, 1).
    double uniform01() { return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53; }

    double normal(double mu = 0.0, double sigma = 1.0) {
        return mu + sigma * stats::normal_quantile(uniform01());
    }

    // Uniform integer in [0, n).
    uint64_t below(uint64_t n) {
        uint64_t threshold = (0 - n) % n;  // rejection bound for unbiased draw
        for (;;) {
            uint64_t r = eng_();
            if (r >= threshold) return r % n;
        }
    }

    uint64_t seed() const { return seed_; }

    // Independent child stream with a fixed derivation schedule; used to hand
    // one stream per partition/session so parallel runs reproduce sequential.
    Rng child(uint64_t index) const { return Rng(mix(seed_ + 0x9e3779b97f4a7c15ull * (index + 1))); }

    static uint64_t mix(uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

private:
    uint64_t seed_;
    std::mt19937_64 eng_;
};

}  // namespace puftrial
