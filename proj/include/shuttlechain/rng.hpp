#pragma once

#include <cstdint>

namespace shuttlechain {

// Counter-based generator built on the SplitMix64 finalizer. Chosen for
// reproducibility across platforms and languages: the whole state is one
// 64-bit counter and the output is a pure function of (seed, index), so any
// substream can be reconstructed from its key without sharing state.
//
//   next()     : output = mix(counter += GOLDEN)
//   substream  : keyed re-seed, mixing the child index into the parent seed
//
// Substream derivation (documented contract, relied on by tests):
//   child_seed = mix(parent_seed ^ mix(GOLDEN * (index + 1)))
struct Rng {
    static constexpr std::uint64_t golden = 0x9E3779B97F4A7C15ull;

    std::uint64_t state;

    explicit Rng(std::uint64_t seed) : state(seed) {}

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    std::uint64_t next() {
        state += golden;
        return mix(state);
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Symmetric uniform in [-r, r).
    double symmetric(double r) { return uniform(-r, r); }

    // Two-point distribution on {-r, +r}.
    double two_point(double r) { return next() & 1u ? r : -r; }

    static std::uint64_t substream_seed(std::uint64_t parent, std::uint64_t index) {
        return mix(parent ^ mix(golden * (index + 1)));
    }

    Rng substream(std::uint64_t index) const { return Rng(substream_seed(state, index)); }
};

}  // namespace shuttlechain
