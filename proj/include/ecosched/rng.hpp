#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace ecosched {

// FNV-1a, used for config hashes and child-seed derivation. Stable across
// platforms so artifact names and seeded draws reproduce everywhere.
inline uint64_t fnv1a64(std::string_view bytes, uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// Every stochastic component derives its own stream from (base seed, name),
// so partial reruns and sweep points stay reproducible.
inline uint64_t child_seed(uint64_t base, std::string_view component) {
    uint64_t h = fnv1a64(component);
    h ^= base + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    return h ? h : 0x2545f4914f6cdd1dull;
}

inline std::mt19937_64 make_rng(uint64_t seed) { return std::mt19937_64(seed); }

// Uniform in [0, 1). 53-bit mantissa path; identical on every platform,
// unlike std::uniform_real_distribution.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [lo, hi], inclusive. Rejection sampling keeps it unbiased.
inline int64_t uniform_int(std::mt19937_64& rng, int64_t lo, int64_t hi) {
    if (hi <= lo) return lo;
    const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    uint64_t v;
    do {
        v = rng();
    } while (v >= limit);
    return lo + static_cast<int64_t>(v % span);
}

}  // namespace ecosched
