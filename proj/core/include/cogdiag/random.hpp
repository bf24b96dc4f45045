#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace cogdiag {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

}  // namespace detail

/// Deterministic seeded randomness. Every draw is built from raw mt19937_64
/// output (the engine is fully specified by the standard), never from
/// std::*_distribution, so sequences are identical across platforms.
///
/// derive() mixes a stream id into the *construction* seed, not the engine
/// state, so sub-streams are reproducible regardless of how many draws the
/// parent has made or on which thread they happen.
class RandomSource {
public:
    explicit RandomSource(std::uint64_t seed)
        : seed_(seed), engine_(detail::splitmix64(seed)) {}

    std::uint64_t seed() const noexcept { return seed_; }

    RandomSource derive(std::uint64_t stream) const {
        return RandomSource(detail::splitmix64(seed_ ^ (0x9E3779B97F4A7C15ULL * (stream + 1))));
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0,1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform01() < p; }

    /// A single fair bit (the engine's top bit).
    std::uint8_t bit() { return static_cast<std::uint8_t>(next_u64() >> 63); }

    /// Uniform in [0,n); unbiased via rejection. n must be positive.
    std::size_t below(std::size_t n) {
        const std::uint64_t span = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        std::uint64_t draw = next_u64();
        while (draw >= limit) draw = next_u64();
        return static_cast<std::size_t>(draw % span);
    }

    /// Fisher-Yates with the portable below(); std::shuffle is
    /// implementation-defined and must not be used here.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[below(i)]);
        }
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

/// count distinct indices drawn uniformly from [0,n), returned sorted.
/// Draws nothing when count >= n.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count, RandomSource& rng);

}  // namespace cogdiag
