#pragma once

#include <cstdint>
#include <random>

namespace shotsort {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Independent stream for (seed, purpose, index): per-shot and per-task engines
// make Monte Carlo output independent of thread scheduling.
inline std::mt19937_64 derived_engine(std::uint64_t seed, std::uint64_t purpose,
                                      std::uint64_t index) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ (purpose * 0xd1b54a32d192ed03ULL));
    h = splitmix64(h ^ index);
    return std::mt19937_64(h);
}

// Stream tags, one per consumer.
namespace stream {
inline constexpr std::uint64_t kShot = 1;
inline constexpr std::uint64_t kCalibration = 2;
inline constexpr std::uint64_t kStabilitySplit = 3;
} // namespace stream

} // namespace shotsort
