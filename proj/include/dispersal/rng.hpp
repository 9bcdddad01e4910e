#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace dispersal {

inline constexpr std::uint64_t kDefaultSeed = 20240607ULL;

/// SplitMix64 output function applied to x + golden-ratio increment.
/// Bijective on 64-bit values.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Stream seed for item `index` under `master`. Fixed across versions:
///   derive_seed(s, i) = splitmix64(splitmix64(s) ^ splitmix64(i))
/// For a fixed master the map i -> seed is injective.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
    return splitmix64(splitmix64(master) ^ splitmix64(index));
}

/// Private random stream owned by one trial or worker.
///
/// Variates are produced from raw 64-bit engine output with our own
/// transforms, so draw sequences do not depend on the standard library's
/// distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on the open interval (0, 1).
    double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

    /// Exponential with the given rate (> 0).
    double exponential(double rate) { return -std::log(uniform()) / rate; }

private:
    std::mt19937_64 engine_;
};

}  // namespace dispersal
