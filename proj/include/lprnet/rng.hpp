#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace lprnet {

// All randomness flows through these helpers rather than <random>
// distributions, whose outputs are implementation-defined. Draws here are a
// fixed function of the engine stream, so seeds reproduce bit-identically.
namespace rng {

using Engine = std::mt19937_64;

inline std::uint64_t next_u64(Engine& e) { return e(); }

// uniform in [0, n)
inline std::uint64_t below(Engine& e, std::uint64_t n) { return e() % n; }

// uniform in [0, 1)
inline double uniform(Engine& e) { return double(e() >> 11) * 0x1.0p-53; }

// uniform in [lo, hi)
inline double uniform(Engine& e, double lo, double hi) { return lo + (hi - lo) * uniform(e); }

// standard normal, Box-Muller (consumes two draws)
inline double normal(Engine& e) {
    double u1 = uniform(e);
    while (u1 <= 0.0) u1 = uniform(e);
    const double u2 = uniform(e);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

template <typename T>
void shuffle(Engine& e, std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(e, i)]);
}

}  // namespace rng

}  // namespace lprnet
