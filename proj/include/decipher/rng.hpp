#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace decipher {

using Rng = std::mt19937_64;

// Derives an independent seed for a named sub-stream (split, init, sampling, ...)
// so that one top-level --seed drives every stage reproducibly.
inline std::uint64_t substream(std::uint64_t seed, std::string_view name) {
    std::uint64_t h = 1469598103934665603ull;
    for (char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    h ^= seed + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    // splitmix64 finalizer
    h ^= h >> 30; h *= 0xbf58476d1ce4e5b9ull;
    h ^= h >> 27; h *= 0x94d049bb133111ebull;
    h ^= h >> 31;
    return h;
}

inline Rng make_rng(std::uint64_t seed, std::string_view name) {
    return Rng(substream(seed, name));
}

}  // namespace decipher
