#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace covkit::rng {

// Distinct stream tags so that independent consumers of the same user seed
// never share an engine state.
namespace stream {
inline constexpr std::uint64_t calibration = 0x414f2d43414cULL;  // interval pair draws
inline constexpr std::uint64_t assets = 0x4153534554ULL;         // asset subset draws
inline constexpr std::uint64_t shuffle = 0x534855464cULL;        // row permutations
inline constexpr std::uint64_t synth_basis = 0x42415349ULL;      // initial basis + rotation angles
inline constexpr std::uint64_t synth_factors = 0x46414354ULL;    // factor innovations
inline constexpr std::uint64_t backtest = 0x42414b54ULL;         // backtest window/asset draws
inline constexpr std::uint64_t bootstrap = 0x424f4f54ULL;        // bootstrap resampling
inline constexpr std::uint64_t testing = 0x54455354ULL;          // test-only instances
} // namespace stream

/// SplitMix64 step; the standard finalizer used to decorrelate seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derive a child seed from a root seed and a path of indices (stream tag,
/// sample index, replication index, ...). Deterministic and order-sensitive,
/// so sample b always gets the same engine no matter which worker runs it.
inline std::uint64_t derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = seed;
    std::uint64_t out = splitmix64(s);
    for (std::uint64_t p : path) {
        s = out ^ (p + 0x9e3779b97f4a7c15ULL);
        out = splitmix64(s);
    }
    return out;
}

inline std::mt19937_64 engine(std::uint64_t seed, std::initializer_list<std::uint64_t> path = {}) {
    return std::mt19937_64(derive(seed, path));
}

/// Unbiased integer draw in [0, bound) via Lemire reduction; keeps integer
/// draws identical across standard library implementations.
inline std::uint64_t uniform_below(std::mt19937_64& eng, std::uint64_t bound) {
    if (bound == 0) return 0;
    for (;;) {
        std::uint64_t x = eng();
        __uint128_t m = static_cast<__uint128_t>(x) * bound;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo >= bound || lo >= (-bound) % bound) return static_cast<std::uint64_t>(m >> 64);
    }
}

/// Sample k distinct indices from [0, n) in draw order (partial Fisher-Yates).
inline std::vector<std::uint64_t> sample_without_replacement(std::mt19937_64& eng,
                                                             std::uint64_t n, std::uint64_t k) {
    std::vector<std::uint64_t> pool(n);
    for (std::uint64_t i = 0; i < n; ++i) pool[i] = i;
    std::vector<std::uint64_t> out;
    out.reserve(k);
    for (std::uint64_t i = 0; i < k && i < n; ++i) {
        std::uint64_t j = i + uniform_below(eng, n - i);
        std::swap(pool[i], pool[j]);
        out.push_back(pool[i]);
    }
    return out;
}

} // namespace covkit::rng
