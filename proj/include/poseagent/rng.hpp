#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace poseagent {

// All randomness in the library flows from one master seed through named
// substreams. Engines are seeded with a splitmix64 hash of
// (master, stream, index) so that substreams are statistically independent
// and reproducible regardless of evaluation order.

enum class Stream : std::uint64_t {
    Model = 1,
    Scene = 2,
    Pool = 3,
    Episode = 4,
    Baseline = 5,
    Init = 6,
    Eval = 7,
    Bench = 8,
};

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, Stream stream, std::uint64_t index = 0) {
    std::uint64_t h = splitmix64(master);
    h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
    h = splitmix64(h ^ index);
    return h;
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t master, Stream stream, std::uint64_t index = 0) {
    return Rng(derive_seed(master, stream, index));
}

/// Canonical uniform draw in [0,1) with 53 random bits.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_range(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

/// Samples an index from a probability vector (entries sum to 1).
/// One engine draw per call; the last index absorbs rounding slack.
inline int sample_categorical(std::span<const double> probs, Rng& rng) {
    const double u = uniform01(rng);
    double cum = 0.0;
    for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
        cum += probs[i];
        if (u < cum) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
}

}  // namespace poseagent
