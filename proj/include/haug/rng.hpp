#pragma once

#include <cstdint>
#include <random>

namespace haug {

// splitmix64 finalizer; used to derive independent substream seeds from
// (global_seed, epoch, sample_index, ...) tuples.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t mix_seed(uint64_t a, uint64_t b) { return splitmix64(a ^ splitmix64(b)); }

template <class... Rest>
uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c, Rest... rest) {
    return mix_seed(mix_seed(a, b), c, rest...);
}

// mt19937's output sequence is fixed by the standard, so everything built on
// these helpers replays bit-identically across platforms. std::*_distribution
// is implementation-defined and must not be used anywhere determinism matters.
using Rng = std::mt19937;

inline Rng make_rng(uint64_t seed) { return Rng(static_cast<uint32_t>(splitmix64(seed))); }

// uniform in [lo, hi); 24-bit resolution so the value is exact in float
inline float uniform_float(Rng& g, float lo = 0.0f, float hi = 1.0f) {
    const float u = static_cast<float>(g() >> 8) * (1.0f / 16777216.0f);
    return lo + (hi - lo) * u;
}

inline double uniform_double(Rng& g, double lo = 0.0, double hi = 1.0) {
    const double u = static_cast<double>(g()) * (1.0 / 4294967296.0);
    return lo + (hi - lo) * u;
}

// uniform integer in [0, n) via fixed-point multiply (no modulo bias pattern
// dependence on n's magnitude at the sizes used here)
inline int uniform_int(Rng& g, int n) {
    return static_cast<int>((static_cast<uint64_t>(g()) * static_cast<uint64_t>(n)) >> 32);
}

inline bool bernoulli(Rng& g, float p) { return uniform_float(g) < p; }

// Box-Muller; draws two uniforms per call
inline double normal_double(Rng& g) {
    double u1 = uniform_double(g);
    double u2 = uniform_double(g);
    if (u1 < 1e-12) u1 = 1e-12;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace haug
