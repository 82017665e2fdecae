#pragma once

#include <cstdint>
#include <random>

namespace ergodic {

using Engine = std::mt19937_64;

/// SplitMix64 finalizer; bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed of stream `stream` under master seed `seed`. Streams with distinct
/// indices are decorrelated, so trajectory i of an ensemble can be replayed
/// on its own without generating trajectories 0..i-1.
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) noexcept
{
    return mix64(mix64(seed) ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

inline Engine make_engine(std::uint64_t seed, std::uint64_t stream = 0)
{
    return Engine(stream_seed(seed, stream));
}

inline double uniform01(Engine& engine)
{
    return std::uniform_real_distribution<double>(0.0, 1.0)(engine);
}

inline double standard_normal(Engine& engine)
{
    return std::normal_distribution<double>(0.0, 1.0)(engine);
}

} // namespace ergodic
