#pragma once

// Counter-based random numbers. Every draw is a pure function of its keys,
// so ensembles are reproducible under any execution order.

#include <cmath>
#include <cstdint>

namespace thinflow {

inline std::uint64_t mix64(std::uint64_t x) {
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t key_mix(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                             std::uint64_t c) {
    std::uint64_t h = mix64(seed);
    h = mix64(h ^ a);
    h = mix64(h ^ b);
    h = mix64(h ^ c);
    return h;
}

// Uniform in (0,1]; strictly positive so log() below is finite.
inline double uniform01(std::uint64_t bits) {
    return static_cast<double>((bits >> 11) + 1) * 0x1.0p-53;
}

// Uniform in [-1,1).
inline double uniform_sym(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-52 - 1.0;
}

struct GaussPair {
    double z0, z1;
};

// Standard normal pair via Box-Muller, keyed by (seed, a, b, c).
inline GaussPair gauss_pair(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                            std::uint64_t c) {
    const std::uint64_t h1 = key_mix(seed, a, b, c);
    const std::uint64_t h2 = mix64(h1 + 0x6a09e667f3bcc909ULL);
    const double u1 = uniform01(h1);
    const double u2 = uniform01(h2);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 6.283185307179586476925286766559 * u2;
    return {r * std::cos(t), r * std::sin(t)};
}

inline double gauss1(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                     std::uint64_t c) {
    return gauss_pair(seed, a, b, c).z0;
}

} // namespace thinflow
