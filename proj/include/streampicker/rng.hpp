// rng.hpp
#pragma once
#include <bit>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>

namespace streampicker {

// SplitMix64 finalizer. Used both to seed xoshiro256** and to derive
// per-realization / per-strategy seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stream-splitting rule:
//   seed(base, realization, id) = sm(sm(sm(base) ^ realization) ^ id)
// where sm is splitmix64. Every random stream in the library is derived this
// way.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t realization,
                                    std::uint64_t id) noexcept {
    return splitmix64(splitmix64(splitmix64(base) ^ realization) ^ id);
}

// Salts for non-strategy consumers of derive_seed, outside the StrategyKind
// id range 1..6.
inline constexpr std::uint64_t kStreamSalt = 0x53545245414dULL;   // "STREAM"
inline constexpr std::uint64_t kTuningSalt = 0x54554e494e47ULL;   // "TUNING"

// xoshiro256** 1.0 (Blackman & Vigna). 32 bytes of state, identical output on
// every platform, as are the hand-written distributions below.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) noexcept { reseed(seed); }

    void reseed(std::uint64_t seed) noexcept {
        std::uint64_t x = seed;
        for (auto& s : state_) {
            x += 0x9e3779b97f4a7c15ULL;
            std::uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            s = z ^ (z >> 31);
        }
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        const std::uint64_t result = std::rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = std::rotl(state_[3], 45);
        return result;
    }

    // Uniform on [0, 1) with 53 bits of resolution.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n) noexcept {
        // Lemire's nearly-divisionless method.
        unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (low < threshold) {
                m = static_cast<unsigned __int128>((*this)()) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    bool bernoulli(double p) noexcept { return uniform() < p; }

    friend bool operator==(const Rng&, const Rng&) = default;

private:
    std::uint64_t state_[4]{};
};

// Inverse-CDF draw from a (normalized) weight vector given a uniform u in
// [0, 1). Falls back to the last index with positive weight when rounding
// leaves the cumulative sum just short of u.
inline std::size_t sample_index(std::span<const double> weights, double u) noexcept {
    double cumulative = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0.0) continue;
        cumulative += weights[i];
        last_positive = i;
        if (u < cumulative) return i;
    }
    return last_positive;
}

}  // namespace streampicker
