#pragma once

#include <cstdint>

#include "irflow/types.hpp"

namespace irflow {

// SplitMix64: tiny, fast, platform-independent generator.  Used everywhere a
// reproducible stream is needed (starting vectors, sample draws) so that runs
// with the same seed are bit-identical across machines; std::mt19937 would
// work too but its seeding / distribution behaviour is easier to get subtly
// wrong across standard libraries.
struct SplitMix64 {
    std::uint64_t state;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 random bits.
    Real uniform() {
        return static_cast<Real>(next() >> 11) * 0x1.0p-53;
    }

    // Uniform in [lo, hi).
    Real uniform(Real lo, Real hi) { return lo + (hi - lo) * uniform(); }
};

// Deterministic complex unit vector (used as Lanczos/sampling starts).
inline CVec seeded_unit(Eigen::Index n, std::uint64_t seed) {
    SplitMix64 rng(seed);
    CVec v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        v[i] = Complex(2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0);
    }
    const Real nrm = v.norm();
    if (nrm > 0.0) v /= nrm;
    return v;
}

}  // namespace irflow
