#pragma once

#include <cstdint>

namespace skl {

// Counter-based SplitMix64 stream. The i-th output of a stream with key k is
// finalize(k + (i+1) * 0x9E3779B97F4A7C15), so a stream is a pure function of
// (key, position): the same key replays the same sequence on any platform,
// and child streams derived via derive(salt) are independent of the order in
// which sibling streams are consumed. This is the generator every sampling
// operation in the library is pinned to.
class Rng {
public:
    Rng() = default;
    explicit Rng(std::uint64_t key) : key_(key) {}

    // SplitMix64 finalizer.
    static std::uint64_t mix(std::uint64_t z) noexcept {
        z += 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Independent child stream: hash(key, salt). Used to hand one stream per
    // unit of parallel work so results never depend on scheduling order.
    Rng derive(std::uint64_t salt) const noexcept {
        return Rng(mix(key_ ^ mix(salt ^ 0xD2B74407B1CE6E93ULL)));
    }

    std::uint64_t key() const noexcept { return key_; }

    std::uint64_t next_u64() noexcept {
        counter_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = key_ + counter_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53 random bits.
    double next_unit() noexcept {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in (0, 1]; safe as a log() argument.
    double next_unit_open() noexcept {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    double next_uniform(double lo, double hi) noexcept {
        return lo + (hi - lo) * next_unit();
    }

    // Standard normal via Box-Muller; the second value of each pair is cached.
    double next_normal() noexcept;

    // Uniform index in [0, bound); bound must be >= 1.
    std::uint64_t next_below(std::uint64_t bound) noexcept {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
    }

private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

}  // namespace skl
