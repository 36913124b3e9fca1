#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace metacl {

using Rng = std::mt19937_64;

// splitmix64 step; the standard trick for spreading a user seed into
// well-mixed stream seeds.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stable per-purpose seed derivation so e.g. the weight init stream and the
// batch sampling stream never alias, and adding a new consumer does not
// shift existing ones.
inline uint64_t derive_seed(uint64_t master, std::string_view tag) {
    uint64_t h = 0xcbf29ce484222325ULL; // FNV-1a
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return splitmix64(master ^ h);
}

inline Rng make_rng(uint64_t master, std::string_view tag) {
    return Rng(derive_seed(master, tag));
}

} // namespace metacl
