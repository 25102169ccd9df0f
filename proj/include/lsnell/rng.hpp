#pragma once
#include <cmath>
#include <cstdint>
#include <random>

namespace lsnell {

// splitmix64: cheap, well-mixed 64-bit stream used for seed derivation and for
// the bootstrap index streams (where mt19937_64 would dominate the runtime).
struct SplitMix64 {
    std::uint64_t state;
    explicit SplitMix64(std::uint64_t seed) : state(seed) {}
    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    // Unbiased-enough bounded draw (Lemire multiply-shift; bias < 2^-64).
    std::uint64_t bounded(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next()) * n) >> 64);
    }
};

// Counter scheme for independent substreams: stream k of master seed s is
// splitmix64 seeded with s XOR (golden-ratio constant multiplied by k+1).
// Path simulation uses stream k = path index; bootstrap uses k = cell*B + b.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    SplitMix64 mix(master ^ (0x9E3779B97F4A7C15ULL * (stream + 1)));
    return mix.next();
}

// Deterministic normal/uniform source. Box-Muller on explicit mt19937_64
// output keeps the draw sequence pinned to the engine's standardized stream
// instead of the library's unspecified std::normal_distribution algorithm.
struct Rng {
    std::mt19937_64 eng;
    explicit Rng(std::uint64_t seed) : eng(seed) {}
    double uniform() { // [0, 1)
        return static_cast<double>(eng() >> 11) * 0x1.0p-53;
    }
    double normal() {
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }
};

} // namespace lsnell
