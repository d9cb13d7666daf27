#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace roving {

/// Every logical task (replication, MC chunk) owns exactly one stream.
using Rng = std::mt19937_64;

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace detail

/// Independent stream `stream_id` derived from `master_seed`; reproducible.
inline Rng make_stream(std::uint64_t master_seed, std::uint64_t stream_id) {
    const std::uint64_t a = detail::splitmix64(master_seed);
    const std::uint64_t b = detail::splitmix64(a ^ detail::splitmix64(stream_id + 0x632be59bd9b4e019ULL));
    std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    return Rng(seq);
}

/// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Rng &rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform on (0, 1].
inline double uniform01_open_low(Rng &rng) {
    return 1.0 - uniform01(rng);
}

inline double sample_exponential(double mean, Rng &rng) {
    return -mean * std::log(uniform01_open_low(rng));
}

inline double sample_standard_normal(Rng &rng) {
    const double u1 = uniform01_open_low(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Exact Gamma(shape, rate) draw (Marsaglia-Tsang rejection, with the
/// U^(1/shape) boost for shape < 1).
inline double sample_gamma(double shape, double rate, Rng &rng) {
    if (shape < 1.0) {
        const double g = sample_gamma(shape + 1.0, 1.0, rng);
        return g * std::pow(uniform01_open_low(rng), 1.0 / shape) / rate;
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = 0.0;
        double v = 0.0;
        do {
            x = sample_standard_normal(rng);
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform01_open_low(rng);
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
    }
}

}  // namespace roving
