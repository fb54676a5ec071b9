#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace evo {

/// Purpose tags mixed into stream keys so that independent phases of a run
/// never share random numbers.
enum class Stream : std::uint64_t {
    InitialNoise = 1,
    Rollout = 2,
    Advance = 3,
    Mutation = 4,
    Selection = 5,
    Resample = 6,
    Prior = 7,
    Test = 99,
};

/// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Random engine for a single particle. Satisfies UniformRandomBitGenerator
/// so it can drive std distributions.
class ParticleRng {
public:
    using result_type = std::uint64_t;

    explicit ParticleRng(std::uint64_t state) : state_(state) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    double normal() { return normal_(*this); }
    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Deterministic, hierarchical stream identifier. A run seed forks into
/// phase keys, and each key hands out one engine per particle index, so the
/// numbers a particle sees do not depend on how the batch is partitioned
/// across threads.
class RngKey {
public:
    constexpr explicit RngKey(std::uint64_t seed) : value_(mix64(seed)) {}

    constexpr RngKey fork(std::uint64_t a) const { return RngKey(Raw{}, mix64(value_ ^ mix64(a + 0x632be59bd9b4e019ULL))); }
    constexpr RngKey fork(Stream s) const { return fork(static_cast<std::uint64_t>(s)); }
    template <class... Rest>
    constexpr RngKey fork(Stream s, Rest... rest) const {
        return fork(s).fork(static_cast<std::uint64_t>(rest)...);
    }
    template <class... Rest>
    constexpr RngKey fork(std::uint64_t a, std::uint64_t b, Rest... rest) const {
        return fork(a).fork(b, static_cast<std::uint64_t>(rest)...);
    }

    ParticleRng particle(std::uint64_t index) const { return ParticleRng(mix64(value_ + mix64(index))); }
    /// Engine for sequential (non particle-indexed) decisions.
    ParticleRng sequential() const { return ParticleRng(value_); }

    constexpr std::uint64_t value() const { return value_; }

private:
    struct Raw {};
    constexpr RngKey(Raw, std::uint64_t v) : value_(v) {}
    std::uint64_t value_;
};

}  // namespace evo
