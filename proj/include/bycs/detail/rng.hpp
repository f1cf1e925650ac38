#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace bycs::detail {

// Uniform integer in [0, n) by rejection sampling. std::uniform_int_distribution
// is implementation-defined, so outputs would differ across standard libraries;
// this keeps seeded runs reproducible everywhere mt19937_64 is.
inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

inline double uniform_unit(std::mt19937_64& rng) {
    // 53-bit mantissa in [0,1); rejects exact zero for use under log().
    double u;
    do {
        u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    } while (u == 0.0);
    return u;
}

// Box-Muller standard normal; hand-rolled for the same portability reason.
inline double gaussian(std::mt19937_64& rng) {
    const double u1 = uniform_unit(rng);
    const double u2 = uniform_unit(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

} // namespace bycs::detail
