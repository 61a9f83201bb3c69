#pragma once

#include <cstdint>
#include <random>

namespace herdsim {

// SplitMix64 finalizer. Used for seed derivation only; the streams
// themselves run on mt19937_64, whose output sequence is fixed by the
// standard so seeded runs are bit-identical across toolchains.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t combine_seed(std::uint64_t a, std::uint64_t b) noexcept {
    return mix64(a ^ mix64(b + 0x632be59bd9b4e019ULL));
}

// Episode seed for (condition or seed group, episode index).
constexpr std::uint64_t derive_episode_seed(std::uint64_t base_seed,
                                            std::uint64_t group,
                                            std::uint64_t episode) noexcept {
    return combine_seed(combine_seed(base_seed, group), episode);
}

// Named sub-streams of one episode. Each consumer draws from its own
// stream so adding draws in one place never shifts another.
enum class Stream : std::uint64_t {
    target = 1,
    perturbation = 2,
    tie_break = 3,
    channel = 4,
};

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n); n must be positive.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return x % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

private:
    std::mt19937_64 engine_;
};

inline Rng make_stream(std::uint64_t episode_seed, Stream kind, std::uint64_t index = 0) {
    return Rng(combine_seed(combine_seed(episode_seed, static_cast<std::uint64_t>(kind)), index));
}

}  // namespace herdsim
