#pragma once

#include <cstdint>
#include <random>

namespace uapforge {

// splitmix64 finalizer: decorrelates (seed, label) pairs into a new seed.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t label) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (label + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t label) {
    return std::mt19937_64(derive_seed(seed, label));
}

}  // namespace uapforge
