#pragma once

#include <cstdint>
#include <random>

namespace mlcsc {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent per-trial seeds from a root seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) {
    return splitmix64(root ^ splitmix64(stream + 1));
}

inline Rng make_rng(std::uint64_t root, std::uint64_t stream) { return Rng(derive_seed(root, stream)); }

inline double standard_normal(Rng& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    return dist(rng);
}

}  // namespace mlcsc
