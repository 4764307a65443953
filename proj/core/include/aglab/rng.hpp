#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace aglab {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; the basis of all keyed (counter-based) streams.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) noexcept
{
    return mix64(seed ^ mix64(value));
}

template <typename... Ts>
constexpr std::uint64_t stream_key(std::uint64_t seed, Ts... parts) noexcept
{
    std::uint64_t h = mix64(seed);
    ((h = hash_combine(h, static_cast<std::uint64_t>(parts))), ...);
    return h;
}

/// Uniform in [0, 1) with 53 random bits.
inline double uniform01(std::uint64_t bits) noexcept
{
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

template <typename Engine>
double uniform01(Engine& rng)
{
    return uniform01(static_cast<std::uint64_t>(rng()));
}

/// Standard normal from two keyed hash draws (Box-Muller, cosine branch).
inline double keyed_normal(std::uint64_t key) noexcept
{
    const double u1 = 1.0 - uniform01(mix64(key));
    const double u2 = uniform01(mix64(key ^ 0x5851f42d4c957f2dULL));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Standard normal from an engine. Implemented locally so streams do not
/// depend on the standard library's distribution algorithms.
template <typename Engine>
double standard_normal(Engine& rng)
{
    const double u1 = 1.0 - uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

} // namespace aglab
